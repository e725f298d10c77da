#include "catfuse/cat.hpp"

namespace catfuse {

namespace {

/// Marks every parameter in the store non-trainable for the current scope,
/// so a traced forward binds them as constants (gradients still flow through
/// the ops that consume them, but never into them).
class FreezeGuard {
 public:
  explicit FreezeGuard(diff::ParamStore& ps) {
    for (diff::Param* p : ps.all()) {
      saved_.emplace_back(p, p->trainable);
      p->trainable = false;
    }
  }
  ~FreezeGuard() {
    for (auto& [p, t] : saved_) p->trainable = t;
  }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  std::vector<std::pair<diff::Param*, bool>> saved_;
};

void check_pair(const RasterTensor& xstar, const RasterTensor& other,
                const char* what) {
  if (!xstar.same_shape(other))
    throw ValidationError(std::string(what) + ": shape mismatch (" +
                          xstar.shape_str() + " vs " + other.shape_str() + ")");
}

} // namespace

RasterTensor cat_forward(const RasterTensor& z, CatParams& phi) {
  diff::Tape tape;
  FreezeGuard freeze(phi.store);
  diff::Node* out = cat_forward_graph<float>(
      tape, phi.store, tape.input(diff::from_raster<float>(z)));
  return diff::to_raster(out->val);
}

std::pair<RasterTensor, RasterTensor> adapted_forward(const RasterTensor& y,
                                                      const RasterTensor& p,
                                                      Backbone& bb,
                                                      CatParams& phi) {
  diff::Tape tape;
  FreezeGuard freeze_bb(bb.params);
  FreezeGuard freeze_cat(phi.store);
  const auto fwd = backbone_forward<float>(tape, bb.params, bb.cfg,
                                           diff::from_raster<float>(y),
                                           diff::from_raster<float>(p));
  diff::Node* zstar = cat_forward_graph<float>(tape, phi.store, fwd.z);
  diff::Node* xstar = transform_channels<float>(tape, bb.params, zstar, fwd.up);
  return {diff::to_raster(fwd.xhat->val), diff::to_raster(xstar->val)};
}

double loss_spe(const RasterTensor& xstar, const RasterTensor& y,
                const SensorDescriptor& sensor) {
  const int r = sensor.ratio;
  if (xstar.channels != y.channels)
    throw ValidationError("loss_spe: band count mismatch");
  if (xstar.height % r != 0 || xstar.width % r != 0)
    throw ValidationError("loss_spe: patch side not divisible by the ratio");
  if (y.height * r != xstar.height || y.width * r != xstar.width)
    throw ValidationError("loss_spe: LRMS size must be the fused size / r");
  diff::Tape tape;
  diff::Node* x = tape.input(diff::from_raster<float>(xstar));
  diff::Node* yn = tape.input(diff::from_raster<float>(y));
  diff::Node* loss =
      tape.l1(tape.decimate(tape.blur(x, ms_tap_sets(sensor)), r), yn);
  return static_cast<double>(loss->val.v[0]);
}

double loss_spa(const RasterTensor& xstar, const RasterTensor& pan,
                const SensorDescriptor& sensor, double eps_div) {
  if (pan.channels != 1) throw ValidationError("loss_spa: PAN must have 1 band");
  if (pan.height != xstar.height || pan.width != xstar.width)
    throw ValidationError("loss_spa: PAN and fused sizes must match");
  diff::Tape tape;
  diff::Node* x = tape.input(diff::from_raster<float>(xstar));
  diff::Node* ratio = tape.input(spa_ratio<float>(
      diff::from_raster<float>(pan), pan_kernel(sensor).taps, xstar.channels,
      eps_div));
  diff::Node* loss =
      tape.l1(x, tape.mul(tape.blur(x, ms_tap_sets(sensor)), ratio));
  return static_cast<double>(loss->val.v[0]);
}

double loss_ori(const RasterTensor& xstar, const RasterTensor& xhat) {
  check_pair(xstar, xhat, "loss_ori");
  return kernels::l1_mean(xstar.data.data(), xhat.data.data(),
                          xstar.data.size());
}

double total_loss(double spe, double spa, double ori,
                  const std::array<double, 3>& eta) {
  for (double e : eta)
    if (e < 0.0) throw ValidationError("total_loss: weights must be >= 0");
  return eta[0] * spe + eta[1] * spa + eta[2] * ori;
}

AdaptResult adapt(
    const std::vector<std::pair<RasterTensor, RasterTensor>>& patches,
    Backbone& bb, const SensorDescriptor& sensor, const AdaptConfig& cfg) {
  cfg.validate(sensor.ratio);
  if (patches.empty()) throw ValidationError("adapt: empty patch selection");
  const int r = sensor.ratio;
  for (const auto& [y, p] : patches) {
    if (p.channels != 1) throw ValidationError("adapt: PAN must have 1 band");
    if (p.height % r != 0 || p.width % r != 0)
      throw ValidationError("adapt: patch size not divisible by the ratio");
    if (y.height * r != p.height || y.width * r != p.width ||
        y.channels != bb.cfg.bands)
      throw ValidationError("adapt: LRMS/PAN patch shapes inconsistent");
  }

  FreezeGuard freeze(bb.params);
  Rng seed_rng(cfg.seed);
  Rng init_rng = seed_rng.split(1);
  AdaptResult out;
  out.phi = CatParams::init(bb.cfg.latent, init_rng);
  if (cfg.epochs == 0) return out;

  const auto ms_taps = ms_tap_sets(sensor);
  const std::vector<double> pan_taps = pan_kernel(sensor).taps;

  // Everything the loss consumes besides the adapter output is fixed across
  // steps; compute it once per patch.
  struct PatchCtx {
    diff::Array z, up, xhat, y, ratio;
  };
  std::vector<PatchCtx> ctx(patches.size());
  for (size_t j = 0; j < patches.size(); ++j) {
    diff::Tape tape;
    const diff::Array y = diff::from_raster<float>(patches[j].first);
    const diff::Array p = diff::from_raster<float>(patches[j].second);
    const auto fwd = backbone_forward<float>(tape, bb.params, bb.cfg, y, p);
    ctx[j].z = fwd.z->val;
    ctx[j].up = fwd.up->val;
    ctx[j].xhat = fwd.xhat->val;
    ctx[j].y = y;
    ctx[j].ratio = spa_ratio<float>(p, pan_taps, bb.cfg.bands, cfg.eps_div);
  }

  diff::AdamConfig acfg;
  acfg.lr = cfg.lr;
  acfg.weight_decay = cfg.weight_decay;
  diff::Adam opt(acfg);

  for (int e = 0; e < cfg.epochs; ++e) {
    for (size_t j = 0; j < patches.size(); ++j) {
      diff::Tape tape;
      diff::Node* z = tape.input(ctx[j].z);
      diff::Node* zstar = cat_forward_graph<float>(tape, out.phi.store, z);
      diff::Node* xstar = transform_channels<float>(tape, bb.params, zstar,
                                                    tape.input(ctx[j].up));
      const auto losses = build_losses<float>(
          tape, xstar, tape.input(ctx[j].xhat), tape.input(ctx[j].y),
          tape.input(ctx[j].ratio), ms_taps, r, cfg.eta);
      out.phi.store.zero_grads();
      tape.backward(losses.total);
      opt.step(out.phi.store);
      AdaptStep step;
      step.epoch = e;
      step.patch = static_cast<int>(j);
      step.spe = static_cast<double>(losses.spe->val.v[0]);
      step.spa = static_cast<double>(losses.spa->val.v[0]);
      step.ori = static_cast<double>(losses.ori->val.v[0]);
      step.total = static_cast<double>(losses.total->val.v[0]);
      out.trace.push_back(step);
    }
  }
  return out;
}

} // namespace catfuse
