#pragma once

#include "c2p/analysis/decoder.hpp"
#include "c2p/analysis/detection_feature.hpp"
#include "c2p/analysis/kmeans.hpp"
#include "c2p/analysis/projection.hpp"
#include "c2p/analysis/word_frequency.hpp"
#include "c2p/caption/cache.hpp"
#include "c2p/caption/enhance.hpp"
#include "c2p/caption/provider.hpp"
#include "c2p/cli/run_config.hpp"
#include "c2p/data/image.hpp"
#include "c2p/data/manifest.hpp"
#include "c2p/data/preprocess.hpp"
#include "c2p/data/synthetic.hpp"
#include "c2p/encoder/adapter.hpp"
#include "c2p/encoder/backend.hpp"
#include "c2p/encoder/embedding.hpp"
#include "c2p/encoder/image_tower.hpp"
#include "c2p/encoder/parameters.hpp"
#include "c2p/encoder/tape.hpp"
#include "c2p/encoder/text_tower.hpp"
#include "c2p/error.hpp"
#include "c2p/eval/histogram.hpp"
#include "c2p/eval/metrics.hpp"
#include "c2p/eval/predict.hpp"
#include "c2p/rng.hpp"
#include "c2p/train/adam.hpp"
#include "c2p/train/checkpoint.hpp"
#include "c2p/train/classifier.hpp"
#include "c2p/train/fit.hpp"
#include "c2p/train/losses.hpp"
#include "c2p/version.hpp"
