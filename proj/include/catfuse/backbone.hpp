#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "catfuse/autodiff.hpp"
#include "catfuse/resample.hpp"
#include "catfuse/rng.hpp"
#include "catfuse/tensor.hpp"

namespace catfuse {

/// Fusion network shape: stem conv (C+1 -> S) + `blocks` residual blocks
/// (S -> S) form the feature extractor; a single head conv (S -> C) plus the
/// upsampled-LRMS residual forms the channel transform.
struct BackboneConfig {
  int latent = 32;  // S
  int blocks = 2;
  int kernel = 3;
  int bands = 4;    // C
  int ratio = 4;    // r

  void validate() const {
    if (bands < 1) throw ValidationError("backbone: bands must be >= 1");
    if (latent < bands)
      throw ValidationError("backbone: latent channels must be >= bands");
    if (blocks < 0) throw ValidationError("backbone: blocks must be >= 0");
    if (kernel % 2 == 0 || kernel < 1)
      throw ValidationError("backbone: kernel must be odd");
    if (ratio < 2) throw ValidationError("backbone: ratio must be >= 2");
  }
};

namespace detail {
inline std::string block_name(int i, int conv) {
  return "backbone/block" + std::to_string(i) + "/conv" +
         std::to_string(conv) + "/";
}
} // namespace detail

/// Creates the backbone parameter tensors in `store`. Conv weights get
/// He-style fan-in scaled normal init drawn from `rng` in creation order
/// (stem, block convs in order, head); biases start at zero.
template <typename T>
void make_backbone_params(const BackboneConfig& cfg, Rng& rng,
                          diff::ParamStoreT<T>& store, bool trainable) {
  cfg.validate();
  const int k = cfg.kernel;
  auto conv = [&](const std::string& prefix, int c_out, int c_in) {
    diff::ParamT<T>* w =
        store.add(prefix + "w", {c_out, c_in, k, k}, trainable);
    const double std = std::sqrt(2.0 / (static_cast<double>(c_in) * k * k));
    for (T& v : w->value) v = static_cast<T>(rng.next_normal() * std);
    store.add(prefix + "b", {c_out}, trainable);
  };
  conv("backbone/stem/", cfg.latent, cfg.bands + 1);
  for (int i = 0; i < cfg.blocks; ++i) {
    conv(detail::block_name(i, 1), cfg.latent, cfg.latent);
    conv(detail::block_name(i, 2), cfg.latent, cfg.latent);
  }
  conv("backbone/head/", cfg.bands, cfg.latent);
}

template <typename T>
struct BackboneForwardT {
  diff::NodeT<T>* z = nullptr;     // latent, S x H x W
  diff::NodeT<T>* up = nullptr;    // upsample(Y), C x H x W (constant leaf)
  diff::NodeT<T>* xhat = nullptr;  // head(z) + up
};

/// Latent head only (F1): stem conv over [upsample(Y); P] with ReLU, then the
/// residual blocks. Parameters are bound through tape.param, so gradients
/// reach them exactly when their store entries are trainable.
template <typename T>
diff::NodeT<T>* extract_features(diff::TapeT<T>& tape,
                                 diff::ParamStoreT<T>& params,
                                 const BackboneConfig& cfg,
                                 const diff::ArrayT<T>& y,
                                 const diff::ArrayT<T>& p,
                                 diff::NodeT<T>** up_out = nullptr) {
  cfg.validate();
  if (y.shape.size() != 3 || y.shape[0] != cfg.bands)
    throw ValidationError("backbone: LRMS must be rank 3 with " +
                          std::to_string(cfg.bands) + " bands");
  if (p.shape.size() != 3 || p.shape[0] != 1)
    throw ValidationError("backbone: PAN must be 1 x H x W");
  const int r = cfg.ratio;
  if (p.shape[1] != y.shape[1] * r || p.shape[2] != y.shape[2] * r)
    throw ValidationError(
        "backbone: PAN size must equal ratio x LRMS size (H_pan = r*H_lrms)");

  auto get = [&](const std::string& name) -> diff::ParamT<T>& {
    diff::ParamT<T>* q = params.find(name);
    if (!q) throw ValidationError("backbone: missing parameter " + name);
    return *q;
  };

  diff::NodeT<T>* up = tape.upsample(tape.input(y), r);
  if (up_out) *up_out = up;

  // [upsample(Y); P] concatenated along channels. Y and P carry no gradient,
  // so the concatenation enters the graph as a fresh constant leaf.
  const int H = p.shape[1], W = p.shape[2];
  diff::ArrayT<T> stem_in({cfg.bands + 1, H, W});
  std::copy(up->val.v.begin(), up->val.v.end(), stem_in.v.begin());
  std::copy(p.v.begin(), p.v.end(),
            stem_in.v.begin() + up->val.v.size());

  diff::NodeT<T>* t = tape.relu(
      tape.conv2d(tape.input(std::move(stem_in)), tape.param(get("backbone/stem/w")),
                  tape.param(get("backbone/stem/b")), true));
  for (int i = 0; i < cfg.blocks; ++i) {
    diff::NodeT<T>* u = tape.relu(
        tape.conv2d(t, tape.param(get(detail::block_name(i, 1) + "w")),
                    tape.param(get(detail::block_name(i, 1) + "b")), true));
    diff::NodeT<T>* v =
        tape.conv2d(u, tape.param(get(detail::block_name(i, 2) + "w")),
                    tape.param(get(detail::block_name(i, 2) + "b")), true);
    t = tape.relu(tape.add(v, t));
  }
  return t;
}

/// Channel transform plus residual (F2): head conv of the latent, added to
/// the upsampled LRMS.
template <typename T>
diff::NodeT<T>* transform_channels(diff::TapeT<T>& tape,
                                   diff::ParamStoreT<T>& params,
                                   diff::NodeT<T>* z, diff::NodeT<T>* up) {
  diff::ParamT<T>* w = params.find("backbone/head/w");
  diff::ParamT<T>* b = params.find("backbone/head/b");
  if (!w || !b) throw ValidationError("backbone: missing head parameters");
  if (z->val.shape.size() != 3 || z->val.shape[0] != w->shape[1])
    throw ValidationError("backbone: latent channel count does not match the "
                          "head weights");
  return tape.add(tape.conv2d(z, tape.param(*w), tape.param(*b), true), up);
}

template <typename T>
BackboneForwardT<T> backbone_forward(diff::TapeT<T>& tape,
                                     diff::ParamStoreT<T>& params,
                                     const BackboneConfig& cfg,
                                     const diff::ArrayT<T>& y,
                                     const diff::ArrayT<T>& p) {
  BackboneForwardT<T> out;
  out.z = extract_features(tape, params, cfg, y, p, &out.up);
  out.xhat = transform_channels(tape, params, out.z, out.up);
  return out;
}

/// Float production backbone: config + named parameter store.
struct Backbone {
  BackboneConfig cfg;
  diff::ParamStore params;

  static Backbone init(const BackboneConfig& cfg, Rng& rng,
                       bool trainable = true) {
    Backbone b;
    b.cfg = cfg;
    make_backbone_params<float>(cfg, rng, b.params, trainable);
    return b;
  }
};

/// Untraced convenience forward. Returns (Z, X̂).
std::pair<RasterTensor, RasterTensor> forward(Backbone& bb,
                                              const RasterTensor& y,
                                              const RasterTensor& p);

struct PretrainConfig {
  int epochs = 200;
  double lr = 5e-4;
  double weight_decay = 0.0;
  uint64_t seed = 0;
};

/// Supervised pretraining on reduced bundles (gt sits at PAN scale): Adam on
/// mean L1(X̂, gt), one optimizer step per scene, scenes in dataset order.
/// Deterministic per seed. `loss_trace` (optional) records every step.
Backbone pretrain(const std::vector<SceneBundle>& reduced,
                  const BackboneConfig& bcfg, const PretrainConfig& cfg,
                  std::vector<double>* loss_trace = nullptr);

void save_backbone(const Backbone& bb, const std::string& path);
Backbone load_backbone(const BackboneConfig& cfg, const std::string& path);

} // namespace catfuse
