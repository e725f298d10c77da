#include "catfuse/backbone.hpp"

#include "catfuse/resample.hpp"

namespace catfuse {

std::pair<RasterTensor, RasterTensor> forward(Backbone& bb,
                                              const RasterTensor& y,
                                              const RasterTensor& p) {
  diff::Tape tape;
  const auto fwd = backbone_forward<float>(tape, bb.params, bb.cfg,
                                           diff::from_raster<float>(y),
                                           diff::from_raster<float>(p));
  return {diff::to_raster(fwd.z->val), diff::to_raster(fwd.xhat->val)};
}

Backbone pretrain(const std::vector<SceneBundle>& reduced,
                  const BackboneConfig& bcfg, const PretrainConfig& cfg,
                  std::vector<double>* loss_trace) {
  if (reduced.empty()) throw ValidationError("pretrain: empty dataset");
  if (cfg.epochs < 0) throw ValidationError("pretrain: epochs must be >= 0");
  for (const SceneBundle& b : reduced) {
    const int r = b.sensor.ratio;
    if (b.gt.height != b.lrms.height * r || b.gt.width != b.lrms.width * r ||
        b.pan.height != b.gt.height || b.pan.width != b.gt.width)
      throw ValidationError(
          "pretrain: bundle gt must sit at the PAN scale of its lrms "
          "(run wald_reduce first)");
    if (b.gt.channels != bcfg.bands)
      throw ValidationError("pretrain: bundle band count does not match the "
                            "backbone config");
  }

  Rng rng(cfg.seed);
  Backbone bb = Backbone::init(bcfg, rng, /*trainable=*/true);

  diff::AdamConfig acfg;
  acfg.lr = cfg.lr;
  acfg.weight_decay = cfg.weight_decay;
  diff::Adam opt(acfg);

  // Inputs are fixed across epochs; convert once.
  std::vector<diff::Array> ys, ps, gts;
  for (const SceneBundle& b : reduced) {
    ys.push_back(diff::from_raster<float>(b.lrms));
    ps.push_back(diff::from_raster<float>(b.pan));
    gts.push_back(diff::from_raster<float>(b.gt));
  }

  for (int e = 0; e < cfg.epochs; ++e) {
    for (size_t i = 0; i < reduced.size(); ++i) {
      diff::Tape tape;
      const auto fwd =
          backbone_forward<float>(tape, bb.params, bcfg, ys[i], ps[i]);
      diff::Node* loss = tape.l1(fwd.xhat, tape.input(gts[i]));
      bb.params.zero_grads();
      tape.backward(loss);
      opt.step(bb.params);
      if (loss_trace)
        loss_trace->push_back(static_cast<double>(loss->val.v[0]));
    }
  }
  return bb;
}

void save_backbone(const Backbone& bb, const std::string& path) {
  diff::save_params(bb.params, path);
}

Backbone load_backbone(const BackboneConfig& cfg, const std::string& path) {
  Rng rng(0);
  Backbone bb = Backbone::init(cfg, rng, /*trainable=*/false);
  diff::load_params(bb.params, path);
  return bb;
}

} // namespace catfuse
