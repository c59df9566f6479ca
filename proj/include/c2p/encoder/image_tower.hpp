#pragma once

#include <cmath>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "c2p/data/preprocess.hpp"
#include "c2p/encoder/adapter.hpp"
#include "c2p/encoder/parameters.hpp"
#include "c2p/encoder/tape.hpp"
#include "c2p/error.hpp"
#include "c2p/rng.hpp"

namespace c2p::nn {

struct ImageTowerConfig {
  int image_size = 32;
  int patch_size = 8;
  int width = 32;
  int layers = 2;
  int heads = 4;
  int mlp_ratio = 4;
  int embed_dim = 32;

  int grid() const { return image_size / patch_size; }
  int tokens() const { return grid() * grid() + 1; }
  int patch_dim() const { return 3 * patch_size * patch_size; }

  void validate() const {
    require(image_size > 0 && patch_size > 0 && image_size % patch_size == 0, ErrorKind::InvalidInput,
            "image_size must be a positive multiple of patch_size");
    require(width > 0 && heads > 0 && width % heads == 0, ErrorKind::InvalidInput, "width must divide into heads");
    require(layers >= 0 && mlp_ratio > 0 && embed_dim > 0, ErrorKind::InvalidInput, "bad tower dimensions");
  }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ImageTowerConfig, image_size, patch_size, width, layers, heads,
                                                mlp_ratio, embed_dim)

struct ForwardOptions {
  bool training = false;  ///< enables adapter dropout
  Rng* dropout_rng = nullptr;
};

inline std::string layer_prefix(int layer) { return "encoder.layers." + std::to_string(layer) + "."; }

/// Vision transformer in the CLIP layout: patch embedding without bias, a
/// class token, pre-norm residual blocks with QuickGELU MLPs, and a linear
/// projection of the normalized class token into the joint embedding space.
class ImageTower {
 public:
  ImageTower() = default;

  /// Seeded random initialization.
  ImageTower(const ImageTowerConfig& config, std::uint64_t seed) : config_(config) {
    config_.validate();
    Rng rng(seed);
    const int w = config_.width;
    const double ws = 1.0 / std::sqrt(static_cast<double>(w));
    store_.add("embeddings.patch_embedding.weight",
               random_normal(rng, w, config_.patch_dim(), 1.0 / std::sqrt(static_cast<double>(config_.patch_dim()))));
    store_.add("embeddings.class_embedding", random_normal(rng, 1, w, ws));
    store_.add("embeddings.position_embedding", random_normal(rng, config_.tokens(), w, ws));
    add_norm("pre_layrnorm");
    for (int l = 0; l < config_.layers; ++l) {
      const std::string p = layer_prefix(l);
      add_norm(p + "layer_norm1");
      for (const char* proj : {"q_proj", "k_proj", "v_proj", "out_proj"}) {
        store_.add(p + "self_attn." + proj + ".weight", random_normal(rng, w, w, ws));
        store_.add(p + "self_attn." + proj + ".bias", Matrix::Zero(1, w));
      }
      add_norm(p + "layer_norm2");
      const int hidden = w * config_.mlp_ratio;
      store_.add(p + "mlp.fc1.weight", random_normal(rng, hidden, w, ws));
      store_.add(p + "mlp.fc1.bias", Matrix::Zero(1, hidden));
      store_.add(p + "mlp.fc2.weight", random_normal(rng, w, hidden, 1.0 / std::sqrt(static_cast<double>(hidden))));
      store_.add(p + "mlp.fc2.bias", Matrix::Zero(1, w));
    }
    add_norm("post_layernorm");
    store_.add("visual_projection.weight", random_normal(rng, config_.embed_dim, w, ws));
  }

  static ImageTower from_tensors(const ImageTowerConfig& config, const std::map<std::string, Matrix>& tensors,
                                 bool merged) {
    ImageTower tower(config, 0);
    assign_from(tower.store_, tensors);
    tower.merged_ = merged;
    return tower;
  }

  const ImageTowerConfig& config() const { return config_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }
  std::size_t parameter_count() const { return store_.scalar_count(); }
  int embed_dim() const { return config_.embed_dim; }

  /// True once adapter deltas have been folded into the weights.
  bool merged() const { return merged_; }

  /// (weight name, (out, in)) for every projection an adapter config targets.
  std::vector<std::pair<std::string, std::pair<int, int>>> adapter_targets(const AdapterConfig& ac) const {
    std::vector<std::pair<std::string, std::pair<int, int>>> out;
    for (int l = 0; l < config_.layers; ++l)
      for (const char* proj : {"q_proj", "k_proj", "v_proj", "out_proj"})
        if (ac.targets_projection(proj)) out.push_back({layer_prefix(l) + "self_attn." + proj + ".weight",
                                                        {config_.width, config_.width}});
    return out;
  }

  /// Fresh adapters for this tower (B = 0).
  AdapterSet make_adapters(const AdapterConfig& ac, std::uint64_t seed) const {
    return AdapterSet(ac, adapter_targets(ac), seed);
  }

  /// (patches) x (3 * P * P), channel-major within each patch.
  Matrix patchify(const data::ImageTensor& img) const {
    require(img.size == config_.image_size, ErrorKind::InvalidInput,
            "image tensor is " + std::to_string(img.size) + " px, tower expects " +
                std::to_string(config_.image_size));
    const int g = config_.grid();
    const int ps = config_.patch_size;
    Matrix patches(g * g, config_.patch_dim());
    for (int py = 0; py < g; ++py)
      for (int px = 0; px < g; ++px) {
        Eigen::Index col = 0;
        for (int c = 0; c < 3; ++c)
          for (int y = 0; y < ps; ++y)
            for (int x = 0; x < ps; ++x) patches(py * g + px, col++) = img.at(c, py * ps + y, px * ps + x);
      }
    return patches;
  }

  /// Embeds one image; returns a 1 x embed_dim node.
  Var forward(Tape& t, const data::ImageTensor& img, const AdapterSet* adapters = nullptr,
              const ForwardOptions& opts = {}) const {
    require(!(merged_ && adapters != nullptr), ErrorKind::InvalidInput,
            "adapters are already folded into this tower");
    Var patches = t.constant(patchify(img));
    Var tokens = matmul_nt(patches, p(t, "embeddings.patch_embedding.weight"));
    Var x = concat_rows({p(t, "embeddings.class_embedding"), tokens});
    x = add(x, p(t, "embeddings.position_embedding"));
    x = norm(t, x, "pre_layrnorm");
    for (int l = 0; l < config_.layers; ++l) x = block(t, x, l, adapters, opts);
    Var cls = norm(t, slice_rows(x, 0, 1), "post_layernorm");
    return matmul_nt(cls, p(t, "visual_projection.weight"));
  }

  /// N x embed_dim node.
  Var forward_batch(Tape& t, std::span<const data::ImageTensor> images, const AdapterSet* adapters = nullptr,
                    const ForwardOptions& opts = {}) const {
    require(!images.empty(), ErrorKind::InvalidInput, "empty image batch");
    std::vector<Var> rows;
    rows.reserve(images.size());
    for (const auto& img : images) rows.push_back(forward(t, img, adapters, opts));
    return concat_rows(rows);
  }

 private:
  void add_norm(const std::string& name) {
    store_.add(name + ".weight", Matrix::Ones(1, config_.width));
    store_.add(name + ".bias", Matrix::Zero(1, config_.width));
  }

  Var p(Tape& t, const std::string& name) const { return t.param(store_.at(name)); }

  Var norm(Tape& t, Var x, const std::string& name) const {
    return layer_norm(x, p(t, name + ".weight"), p(t, name + ".bias"));
  }

  Var linear(Tape& t, Var x, const std::string& name, const AdapterSet* adapters, const ForwardOptions& opts) const {
    const std::string wname = name + ".weight";
    Var y = add_row(matmul_nt(x, p(t, wname)), p(t, name + ".bias"));
    if (adapters == nullptr || !adapters->adapts(wname)) return y;

    const AdapterConfig& ac = adapters->config();
    Var xin = x;
    if (opts.training && ac.dropout > 0.0) {
      require(opts.dropout_rng != nullptr, ErrorKind::InvalidInput, "training forward needs a dropout generator");
      const double keep = 1.0 - ac.dropout;
      Matrix mask(x.rows(), x.cols());
      for (Eigen::Index i = 0; i < mask.size(); ++i)
        mask.data()[i] = opts.dropout_rng->bernoulli(keep) ? 1.0 / keep : 0.0;
      xin = mul_const(x, std::move(mask));
    }
    Var low = matmul_nt(xin, t.param(adapters->down(wname)));
    Var delta = matmul_nt(low, t.param(adapters->up(wname)));
    return add(y, scale(delta, ac.scaling()));
  }

  Var block(Tape& t, Var x, int l, const AdapterSet* adapters, const ForwardOptions& opts) const {
    const std::string pre = layer_prefix(l);
    Var h = norm(t, x, pre + "layer_norm1");
    Var q = linear(t, h, pre + "self_attn.q_proj", adapters, opts);
    Var k = linear(t, h, pre + "self_attn.k_proj", adapters, opts);
    Var v = linear(t, h, pre + "self_attn.v_proj", adapters, opts);
    const int dh = config_.width / config_.heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    std::vector<Var> heads;
    heads.reserve(config_.heads);
    for (int hd = 0; hd < config_.heads; ++hd) {
      Var qh = slice_cols(q, hd * dh, dh);
      Var kh = slice_cols(k, hd * dh, dh);
      Var vh = slice_cols(v, hd * dh, dh);
      Var attn = softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt));
      heads.push_back(matmul(attn, vh));
    }
    Var o = linear(t, concat_cols(heads), pre + "self_attn.out_proj", adapters, opts);
    x = add(x, o);
    Var m = norm(t, x, pre + "layer_norm2");
    m = linear(t, m, pre + "mlp.fc1", nullptr, opts);
    m = quick_gelu(m);
    m = linear(t, m, pre + "mlp.fc2", nullptr, opts);
    return add(x, m);
  }

  ImageTowerConfig config_;
  ParameterStore store_;
  bool merged_ = false;
};

/// Folds every adapter delta into its frozen projection, producing a plain
/// tower with the backbone's parameter count.
inline ImageTower merge_adapters(const ImageTower& tower, const AdapterSet& adapters) {
  if (tower.merged()) fail(ErrorKind::AlreadyMerged, "adapters were already merged into this tower");
  std::map<std::string, Matrix> tensors = to_tensor_map(tower.parameters());
  for (const auto& wname : adapters.adapted_weights()) {
    auto it = tensors.find(wname);
    require(it != tensors.end(), ErrorKind::InvalidInput, "adapter targets unknown weight " + wname);
    it->second += adapters.delta(wname);
  }
  return ImageTower::from_tensors(tower.config(), tensors, true);
}

}  // namespace c2p::nn
