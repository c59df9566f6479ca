#include <gtest/gtest.h>

#include "c2p/encoder/backend.hpp"
#include "c2p/encoder/embedding.hpp"
#include "c2p/encoder/image_tower.hpp"
#include "c2p/encoder/text_tower.hpp"
#include "reference_forward.hpp"
#include "test_util.hpp"

using namespace c2p;
using namespace c2p::nn;
using c2p::test::random_tensor;

namespace {

BackendConfig toy_config() {
  BackendConfig c;
  c.image = ImageTowerConfig{16, 4, 16, 2, 4, 4, 12};
  c.text = TextTowerConfig{512, 16, 77, 12};
  return c;
}

AdapterSet randomized_adapters(const ImageTower& tower, const AdapterConfig& ac, std::uint64_t seed) {
  AdapterSet set = tower.make_adapters(ac, seed);
  Rng rng(seed + 1);
  for (auto& [_, p] : set.parameters()) p.value = random_normal(rng, p.value.rows(), p.value.cols(), 0.2);
  return set;
}

// independent FNV-1a 64
std::uint64_t fnv(const std::string& s) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

TEST(TextEncoder, EmptyListIsZeroRows) {
  Backend b(toy_config());
  auto u = encode_text(b.text, {});
  EXPECT_EQ(u.size(), 0);
  EXPECT_EQ(u.dim(), 12);
}

TEST(TextEncoder, SameTextSameRow) {
  Backend b(toy_config());
  auto u = encode_text(b.text, {"Camera, a dog", "Camera, a dog"});
  EXPECT_EQ(u.vectors.row(0), u.vectors.row(1));
  auto w = encode_text(b.text, {"Deepfake, a dog"});
  EXPECT_NE(u.vectors.row(0), w.vectors.row(0));
}

TEST(TextEncoder, MatchesClosedForm) {
  BackendConfig cfg = toy_config();
  cfg.seed = 123;
  TextTower tower = make_text_tower(cfg);
  const auto& E = tower.parameters().at("token_embedding.weight").value;
  const auto& P = tower.parameters().at("position_embedding.weight").value;
  const auto& T = tower.parameters().at("text_projection.weight").value;

  // "Camera, a" -> tokens "camera", "a"
  std::vector<double> pooled(static_cast<std::size_t>(cfg.text.width), 0.0);
  const std::vector<std::string> toks{"camera", "a"};
  for (std::size_t k = 0; k < toks.size(); ++k) {
    const auto row = static_cast<Eigen::Index>(fnv(toks[k]) % static_cast<std::uint64_t>(cfg.text.vocab_size));
    for (int i = 0; i < cfg.text.width; ++i) pooled[i] += (E(row, i) + P(static_cast<Eigen::Index>(k), i)) / 2.0;
  }
  auto u = encode_text(tower, {"Camera, a"});
  for (int d = 0; d < cfg.text.embed_dim; ++d) {
    double expect = 0.0;
    for (int i = 0; i < cfg.text.width; ++i) expect += T(d, i) * pooled[i];
    EXPECT_NEAR(u.vectors(0, d), expect, 1e-12);
  }
}

TEST(TextEncoder, SeedChangesWeights) {
  BackendConfig a = toy_config(), b = toy_config();
  b.seed = 124;
  EXPECT_NE(checksum(make_text_tower(a).parameters()), checksum(make_text_tower(b).parameters()));
  EXPECT_EQ(checksum(make_text_tower(a).parameters()), checksum(make_text_tower(a).parameters()));
}

TEST(ImageEncoder, MatchesReferenceForward) {
  Backend b(toy_config());
  for (std::uint64_t seed : {1, 2, 3}) {
    auto img = random_tensor(16, seed);
    auto v = encode_image(b.image, std::vector{img});
    auto ref = c2p::test::reference_image_forward(b.image, img);
    for (int d = 0; d < 12; ++d) EXPECT_NEAR(v.vectors(0, d), ref[d], 1e-10);
  }
}

TEST(ImageEncoder, AllZeroImageGivesDocumentedConstant) {
  Backend b(toy_config());
  data::ImageTensor zeros(16);
  auto v = encode_image(b.image, std::vector{zeros});
  auto ref = c2p::test::reference_image_forward(b.image, zeros);
  for (int d = 0; d < 12; ++d) EXPECT_NEAR(v.vectors(0, d), ref[d], 1e-10);
  // With zero pixels every patch token is its position embedding alone, so
  // the output does not depend on anything but the weights.
  auto again = encode_image(b.image, std::vector{zeros, zeros});
  EXPECT_EQ(again.vectors.row(0), again.vectors.row(1));
  EXPECT_EQ(again.vectors.row(0), v.vectors.row(0));
}

TEST(ImageEncoder, EmptyBatchAndShapeMismatch) {
  Backend b(toy_config());
  EXPECT_EQ(encode_image(b.image, std::vector<data::ImageTensor>{}).size(), 0);
  try {
    encode_image(b.image, std::vector{data::ImageTensor(8)});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InvalidInput);
  }
}

TEST(ImageEncoder, ZeroInitAdaptersAreExactIdentity) {
  Backend b(toy_config());
  AdapterSet fresh = b.image.make_adapters(AdapterConfig{}, 9);
  std::vector<data::ImageTensor> imgs{random_tensor(16, 4), random_tensor(16, 5)};
  auto plain = encode_image(b.image, imgs);
  auto adapted = encode_image(b.image, imgs, &fresh);
  EXPECT_EQ(plain.vectors, adapted.vectors);  // bitwise
  // in training mode the dropout-masked branch still contributes zero
  Rng rng(1);
  auto train_mode = encode_image(b.image, imgs, &fresh, true, &rng);
  EXPECT_EQ(plain.vectors, train_mode.vectors);
}

TEST(ImageEncoder, EvalModeIsDeterministic) {
  Backend b(toy_config());
  AdapterSet set = randomized_adapters(b.image, AdapterConfig{}, 3);
  std::vector<data::ImageTensor> imgs{random_tensor(16, 6)};
  EXPECT_EQ(encode_image(b.image, imgs, &set).vectors, encode_image(b.image, imgs, &set).vectors);
  // training mode with dropout differs between draws
  Rng r1(1), r2(2);
  EXPECT_NE(encode_image(b.image, imgs, &set, true, &r1).vectors, encode_image(b.image, imgs, &set, true, &r2).vectors);
  EXPECT_THROW(encode_image(b.image, imgs, &set, true, nullptr), Error);
}

TEST(ImageEncoder, AdaptersMatchReferenceWithEffectiveWeights) {
  Backend b(toy_config());
  AdapterConfig ac;
  ac.targets = {"q_proj", "v_proj", "out_proj"};
  AdapterSet set = randomized_adapters(b.image, ac, 11);
  auto img = random_tensor(16, 12);
  auto v = encode_image(b.image, std::vector{img}, &set);
  auto ref = c2p::test::reference_image_forward(b.image, img, &set);
  for (int d = 0; d < 12; ++d) EXPECT_NEAR(v.vectors(0, d), ref[d], 1e-10);
}

TEST(Adapters, AttachToConfiguredProjectionsOnly) {
  Backend b(toy_config());
  AdapterSet set = b.image.make_adapters(AdapterConfig{}, 1);
  EXPECT_EQ(set.adapted_weights().size(), 2u * 3u);
  for (const auto& name : set.adapted_weights()) {
    EXPECT_TRUE(name.find("q_proj") != std::string::npos || name.find("k_proj") != std::string::npos ||
                name.find("v_proj") != std::string::npos);
    EXPECT_TRUE(b.image.parameters().contains(name));
  }
  for (const auto& [name, p] : set.parameters()) {
    if (name.ends_with("lora_B")) EXPECT_TRUE(p.value.isZero());
    if (name.ends_with("lora_A")) {
      EXPECT_EQ(p.value.rows(), 6);
      EXPECT_LE(p.value.cwiseAbs().maxCoeff(), 1.0 / std::sqrt(16.0));
    }
  }
}

TEST(Adapters, ConfigValidation) {
  AdapterConfig ok;
  EXPECT_NO_THROW(ok.validate());
  EXPECT_DOUBLE_EQ(ok.scaling(), 1.0);
  AdapterConfig bad = ok;
  bad.rank = 0;
  EXPECT_THROW(bad.validate(), Error);
  bad = ok;
  bad.dropout = 1.0;
  EXPECT_THROW(bad.validate(), Error);
  bad = ok;
  bad.targets.clear();
  EXPECT_THROW(bad.validate(), Error);
  bad = ok;
  bad.targets = {"fc1"};
  EXPECT_THROW(bad.validate(), Error);
}

TEST(Merge, ZeroInitMergeReproducesBackbone) {
  Backend b(toy_config());
  AdapterSet fresh = b.image.make_adapters(AdapterConfig{}, 2);
  ImageTower merged = merge_adapters(b.image, fresh);
  EXPECT_TRUE(merged.merged());
  EXPECT_EQ(checksum(merged.parameters()), checksum(b.image.parameters()));
  EXPECT_EQ(merged.parameter_count(), b.image.parameter_count());
}

TEST(Merge, MergedMatchesAdapterForward) {
  Backend b(toy_config());
  AdapterSet set = randomized_adapters(b.image, AdapterConfig{}, 5);
  ImageTower merged = merge_adapters(b.image, set);
  EXPECT_EQ(merged.parameter_count(), b.image.parameter_count());
  double worst = 0.0;
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto img = random_tensor(16, 100 + s);
    auto a = encode_image(b.image, std::vector{img}, &set);
    auto m = encode_image(merged, std::vector{img});
    worst = std::max(worst, (a.vectors - m.vectors).cwiseAbs().maxCoeff());
  }
  EXPECT_LE(worst, 1e-5);
  EXPECT_GT(checksum(merged.parameters()), 0u);
  EXPECT_NE(checksum(merged.parameters()), checksum(b.image.parameters()));
}

TEST(Merge, TwiceIsAlreadyMerged) {
  Backend b(toy_config());
  AdapterSet set = randomized_adapters(b.image, AdapterConfig{}, 5);
  ImageTower merged = merge_adapters(b.image, set);
  try {
    merge_adapters(merged, set);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::AlreadyMerged);
  }
  // and adapters cannot be stacked on top of a merged tower
  EXPECT_THROW(encode_image(merged, std::vector{random_tensor(16, 1)}, &set), Error);
}

TEST(Merge, OnlyAdaptedWeightsChange) {
  Backend b(toy_config());
  AdapterSet set = randomized_adapters(b.image, AdapterConfig{}, 8);
  ImageTower merged = merge_adapters(b.image, set);
  for (const auto& [name, p] : merged.parameters()) {
    const bool adapted = set.adapts(name);
    const bool same = p.value == b.image.parameters().at(name).value;
    EXPECT_EQ(same, !adapted) << name;
  }
}

TEST(Embedding, NormalizeIsIdempotent) {
  Rng rng(4);
  EmbeddingBatch raw{random_normal(rng, 7, 5, 3.0), false};
  auto once = normalize(raw);
  EXPECT_TRUE(once.valid());
  EmbeddingBatch reflagged{once.vectors, false};
  auto twice = normalize(reflagged);
  EXPECT_LE((twice.vectors - once.vectors).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_EQ(normalize(once).vectors, once.vectors);
  EmbeddingBatch zero{Matrix::Zero(1, 3), false};
  EXPECT_THROW(normalize(zero), Error);
}

TEST(Backend, PretrainedModeIsUnsupportedOffline) {
  BackendConfig c = toy_config();
  c.mode = BackendMode::PretrainedViTL14;
  try {
    make_image_tower(c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Unsupported);
  }
  BackendConfig mismatch = toy_config();
  mismatch.text.embed_dim = 7;
  EXPECT_THROW(make_image_tower(mismatch), Error);
}

TEST(Archive, RoundTripAndVersionCheck) {
  auto dir = c2p::test::scratch_dir();
  Backend b(toy_config());
  save_archive(to_tensor_map(b.image.parameters()), dir / "t.c2pt");
  auto loaded = ImageTower::from_tensors(b.image.config(), load_archive(dir / "t.c2pt"), false);
  EXPECT_EQ(checksum(loaded.parameters()), checksum(b.image.parameters()));

  auto bytes = c2p::test::read_file(dir / "t.c2pt");
  bytes[4] = 9;  // version field
  c2p::test::write_bytes(dir / "v.c2pt", bytes);
  try {
    load_archive(dir / "v.c2pt");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::VersionError);
  }
  c2p::test::write_bytes(dir / "junk.c2pt", "nope");
  EXPECT_THROW(load_archive(dir / "junk.c2pt"), Error);
}
