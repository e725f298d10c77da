#pragma once

#include <array>
#include <cstdint>
#include <utility>
#include <vector>

#include "catfuse/autodiff.hpp"
#include "catfuse/backbone.hpp"
#include "catfuse/resample.hpp"
#include "catfuse/rng.hpp"

namespace catfuse {

/// Residual latent adapter: Z* = conv2(ReLU(conv1(Z))) + Z. conv1 is
/// randomly initialized, conv2 starts at exactly zero, so a fresh adapter is
/// the identity on Z and the adapted output equals the plain output
/// bit-for-bit.
template <typename T>
void make_cat_params(int latent, Rng& rng, diff::ParamStoreT<T>& store) {
  if (latent < 1) throw ValidationError("cat: latent channels must be >= 1");
  diff::ParamT<T>* w1 = store.add("cat/conv1/w", {latent, latent, 3, 3}, true);
  const double std = std::sqrt(2.0 / (static_cast<double>(latent) * 9));
  for (T& v : w1->value) v = static_cast<T>(rng.next_normal() * std);
  store.add("cat/conv1/b", {latent}, true);
  store.add("cat/conv2/w", {latent, latent, 3, 3}, true);  // zero
  store.add("cat/conv2/b", {latent}, true);                // zero
}

struct CatParams {
  int latent = 0;
  diff::ParamStore store;

  static CatParams init(int latent, Rng& rng) {
    CatParams p;
    p.latent = latent;
    make_cat_params<float>(latent, rng, p.store);
    return p;
  }
};

/// Test-time adaptation settings. Patch size is at PAN scale.
struct AdaptConfig {
  int n_patches = 8;
  int patch_size = 64;
  int epochs = 10;
  double lr = 1e-4;
  double weight_decay = 1e-5;
  std::array<double, 3> eta = {1.0, 1.0, 0.1};  // real_world preset
  uint64_t seed = 0;
  double eps_div = 1e-6;

  static std::array<double, 3> preset_real_world() { return {1.0, 1.0, 0.1}; }
  static std::array<double, 3> preset_simulated() {
    return {10.0, 100.0, 10000.0};
  }

  void validate(int ratio) const {
    if (n_patches < 1) throw ValidationError("adapt: n_patches must be >= 1");
    if (patch_size < ratio || patch_size % ratio != 0)
      throw ValidationError(
          "adapt: patch_size must be a positive multiple of the ratio");
    if (epochs < 0) throw ValidationError("adapt: epochs must be >= 0");
    if (!(lr > 0.0)) throw ValidationError("adapt: lr must be > 0");
    if (weight_decay < 0.0)
      throw ValidationError("adapt: weight_decay must be >= 0");
    for (double e : eta)
      if (e < 0.0) throw ValidationError("adapt: loss weights must be >= 0");
    if (!(eps_div > 0.0)) throw ValidationError("adapt: eps_div must be > 0");
  }
};

// ---------------------------------------------------------------------------
// Graph builders (templated so the double oracle engine can trace the same
// computation the float engine runs).
// ---------------------------------------------------------------------------

template <typename T>
diff::NodeT<T>* cat_forward_graph(diff::TapeT<T>& tape,
                                  diff::ParamStoreT<T>& cat_store,
                                  diff::NodeT<T>* z) {
  diff::ParamT<T>* w1 = cat_store.find("cat/conv1/w");
  diff::ParamT<T>* b1 = cat_store.find("cat/conv1/b");
  diff::ParamT<T>* w2 = cat_store.find("cat/conv2/w");
  diff::ParamT<T>* b2 = cat_store.find("cat/conv2/b");
  if (!w1 || !b1 || !w2 || !b2)
    throw ValidationError("cat: store is missing adapter parameters");
  if (z->val.shape.size() != 3 || z->val.shape[0] != w1->shape[1])
    throw ValidationError("cat: latent channel count does not match conv1");
  diff::NodeT<T>* hidden =
      tape.relu(tape.conv2d(z, tape.param(*w1), tape.param(*b1), true));
  diff::NodeT<T>* res =
      tape.conv2d(hidden, tape.param(*w2), tape.param(*b2), true);
  return tape.add(res, z);
}

template <typename T>
struct LossNodesT {
  diff::NodeT<T>* spe = nullptr;
  diff::NodeT<T>* spa = nullptr;
  diff::NodeT<T>* ori = nullptr;
  diff::NodeT<T>* total = nullptr;
};

/// The three unsupervised losses and their weighted total.
///   spe: |decimate(blur_ms(X̂*), r) − Y|
///   spa: |X̂* − blur_ms(X̂*) ∘ ratio|, ratio = P̂ ⊘ (blur_pan(P̂) + eps)
///   ori: |X̂* − X̂|
/// `ratio` is passed in as a leaf because it never depends on the adapter:
/// callers compute it once per patch (see spa_ratio).
template <typename T>
LossNodesT<T> build_losses(diff::TapeT<T>& tape, diff::NodeT<T>* xstar,
                           diff::NodeT<T>* xhat, diff::NodeT<T>* y,
                           diff::NodeT<T>* ratio,
                           const std::vector<std::vector<double>>& ms_taps,
                           int r, const std::array<double, 3>& eta) {
  for (double e : eta)
    if (e < 0.0) throw ValidationError("total_loss: weights must be >= 0");
  LossNodesT<T> out;
  diff::NodeT<T>* blurred = tape.blur(xstar, ms_taps);
  out.spe = tape.l1(tape.decimate(blurred, r), y);
  out.spa = tape.l1(xstar, tape.mul(blurred, ratio));
  out.ori = tape.l1(xstar, xhat);
  out.total = tape.weighted_sum({out.spe, out.spa, out.ori},
                                {eta[0], eta[1], eta[2]});
  return out;
}

/// P̂ ⊘ (blur_pan(P̂) + eps) with P̂ = P replicated to `bands` channels.
/// Every replicated band is the same plane, so the single-plane ratio is
/// computed once and copied.
template <typename T>
diff::ArrayT<T> spa_ratio(const diff::ArrayT<T>& pan,
                          const std::vector<double>& pan_taps, int bands,
                          double eps_div) {
  if (pan.shape.size() != 3 || pan.shape[0] != 1)
    throw ValidationError("spa_ratio: PAN must be 1 x H x W");
  const int h = pan.shape[1], w = pan.shape[2];
  diff::TapeT<T> tape;
  diff::NodeT<T>* p = tape.input(pan);
  diff::NodeT<T>* denom =
      tape.add_scalar(tape.blur(p, {pan_taps}), eps_div);
  diff::NodeT<T>* ratio = tape.div(p, denom);
  diff::ArrayT<T> out({bands, h, w});
  const size_t plane = static_cast<size_t>(h) * w;
  for (int b = 0; b < bands; ++b)
    std::copy(ratio->val.v.begin(), ratio->val.v.end(),
              out.v.begin() + plane * b);
  return out;
}

// ---------------------------------------------------------------------------
// Float production entry points.
// ---------------------------------------------------------------------------

/// Z* = conv2(ReLU(conv1(Z))) + Z.
RasterTensor cat_forward(const RasterTensor& z, CatParams& phi);

/// (X̂, X̂*) with F1 executed once and shared by both heads.
std::pair<RasterTensor, RasterTensor> adapted_forward(const RasterTensor& y,
                                                      const RasterTensor& p,
                                                      Backbone& bb,
                                                      CatParams& phi);

double loss_spe(const RasterTensor& xstar, const RasterTensor& y,
                const SensorDescriptor& sensor);
double loss_spa(const RasterTensor& xstar, const RasterTensor& pan,
                const SensorDescriptor& sensor, double eps_div = 1e-6);
double loss_ori(const RasterTensor& xstar, const RasterTensor& xhat);
double total_loss(double spe, double spa, double ori,
                  const std::array<double, 3>& eta);

/// One optimizer-step record of the adaptation loop.
struct AdaptStep {
  int epoch = 0;
  int patch = 0;  // id within the selected list
  double spe = 0, spa = 0, ori = 0, total = 0;
};

struct AdaptResult {
  CatParams phi;
  std::vector<AdaptStep> trace;  // epochs x patches entries, step order
};

/// Trains the adapter on the selected (LRMS, PAN) patch pairs with the
/// backbone frozen: per epoch, per patch in list order, one Adam step on the
/// total loss. The backbone store is read, never written.
AdaptResult adapt(const std::vector<std::pair<RasterTensor, RasterTensor>>& patches,
                  Backbone& bb, const SensorDescriptor& sensor,
                  const AdaptConfig& cfg);

} // namespace catfuse
