#include "catfuse/pipeline.hpp"

#include <chrono>
#include <cstring>
#include <numeric>
#include <sstream>

#include "catfuse/rng.hpp"

namespace catfuse {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

template <typename F>
auto stage(const char* label, F&& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(label) + " stage: " + e.what());
  } catch (const IoError& e) {
    throw IoError(std::string(label) + " stage: " + e.what());
  }
}

} // namespace

std::pair<int, int> PatchGrid::coords(int id) const {
  if (id < 0 || id >= count())
    throw ValidationError("patch id " + std::to_string(id) +
                          " out of range [0, " + std::to_string(count()) + ")");
  return {id / cols, id % cols};
}

PatchGrid partition(const RasterTensor& y, const RasterTensor& p,
                    int patch_size) {
  if (p.channels != 1) throw ValidationError("partition: PAN must have 1 band");
  if (p.height % y.height != 0 || p.width % y.width != 0)
    throw ValidationError(
        "partition: PAN size must be an integer multiple of the LRMS size");
  const int r = p.height / y.height;
  if (r < 2 || p.width / y.width != r)
    throw ValidationError(
        "partition: PAN/LRMS scale factor must be the same integer >= 2 on "
        "both axes (H_pan = r*H_lrms)");
  if (patch_size < r || patch_size % r != 0)
    throw ValidationError(
        "partition: patch size must be a positive multiple of the scale "
        "factor");
  if (p.height % patch_size != 0 || p.width % patch_size != 0) {
    std::ostringstream m;
    m << "partition: image " << p.height << "x" << p.width
      << " is not divisible into " << patch_size << "x" << patch_size
      << " patches; pad or crop the inputs first";
    throw ValidationError(m.str());
  }
  PatchGrid g;
  g.patch_h = patch_size;
  g.patch_w = patch_size;
  g.rows = p.height / patch_size;
  g.cols = p.width / patch_size;
  g.ratio = r;
  return g;
}

std::pair<RasterTensor, RasterTensor> patch_at(const RasterTensor& y,
                                               const RasterTensor& p,
                                               const PatchGrid& g, int id) {
  const auto [row, col] = g.coords(id);
  const int r = g.ratio;
  const int yh = g.patch_h / r, yw = g.patch_w / r;
  RasterTensor yp(y.channels, yh, yw);
  for (int b = 0; b < y.channels; ++b)
    for (int i = 0; i < yh; ++i)
      std::memcpy(yp.data.data() + (static_cast<size_t>(b) * yh + i) * yw,
                  y.band(b) + (static_cast<size_t>(row) * yh + i) * y.width +
                      static_cast<size_t>(col) * yw,
                  sizeof(float) * static_cast<size_t>(yw));
  RasterTensor pp(1, g.patch_h, g.patch_w);
  for (int i = 0; i < g.patch_h; ++i)
    std::memcpy(pp.data.data() + static_cast<size_t>(i) * g.patch_w,
                p.data.data() +
                    (static_cast<size_t>(row) * g.patch_h + i) * p.width +
                    static_cast<size_t>(col) * g.patch_w,
                sizeof(float) * static_cast<size_t>(g.patch_w));
  return {std::move(yp), std::move(pp)};
}

std::vector<int> select_random(const PatchGrid& g, int n, uint64_t seed) {
  const int total = g.count();
  if (n < 1 || n > total)
    throw ValidationError("select_random: n must be in [1, " +
                          std::to_string(total) + "], got " +
                          std::to_string(n));
  // Partial Fisher-Yates over the id array; the first n entries are the
  // selection, in selection order.
  std::vector<int> ids(static_cast<size_t>(total));
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(seed);
  for (int i = 0; i < n; ++i) {
    const int j =
        i + static_cast<int>(rng.next_below(static_cast<uint64_t>(total - i)));
    std::swap(ids[static_cast<size_t>(i)], ids[static_cast<size_t>(j)]);
  }
  ids.resize(static_cast<size_t>(n));
  return ids;
}

RasterTensor stitch(const std::vector<RasterTensor>& patches,
                    const PatchGrid& g) {
  if (patches.size() != static_cast<size_t>(g.count()))
    throw ValidationError("stitch: expected " + std::to_string(g.count()) +
                          " patches, got " + std::to_string(patches.size()));
  const int c = patches[0].channels;
  RasterTensor out(c, g.rows * g.patch_h, g.cols * g.patch_w);
  for (int id = 0; id < g.count(); ++id) {
    const RasterTensor& pt = patches[static_cast<size_t>(id)];
    if (pt.channels != c || pt.height != g.patch_h || pt.width != g.patch_w)
      throw ValidationError("stitch: patch " + std::to_string(id) +
                            " has shape " + pt.shape_str() + ", expected " +
                            std::to_string(c) + "x" +
                            std::to_string(g.patch_h) + "x" +
                            std::to_string(g.patch_w));
    const auto [row, col] = g.coords(id);
    for (int b = 0; b < c; ++b)
      for (int i = 0; i < g.patch_h; ++i)
        std::memcpy(out.band(b) +
                        (static_cast<size_t>(row) * g.patch_h + i) * out.width +
                        static_cast<size_t>(col) * g.patch_w,
                    pt.band(b) + static_cast<size_t>(i) * g.patch_w,
                    sizeof(float) * static_cast<size_t>(g.patch_w));
  }
  return out;
}

std::vector<RasterTensor> infer_all(const RasterTensor& y,
                                    const RasterTensor& p, const PatchGrid& g,
                                    Backbone& bb, CatParams* phi,
                                    int workers) {
  if (workers < 1) throw ValidationError("infer_all: workers must be >= 1");
  const int total = g.count();
  std::vector<RasterTensor> results(static_cast<size_t>(total));
  std::vector<std::string> errors(static_cast<size_t>(total));

#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (int id = 0; id < total; ++id) {
    try {
      auto [yp, pp] = patch_at(y, p, g, id);
      diff::Tape tape;
      const auto fwd = backbone_forward<float>(tape, bb.params, bb.cfg,
                                               diff::from_raster<float>(yp),
                                               diff::from_raster<float>(pp));
      diff::Node* out = fwd.xhat;
      if (phi) {
        diff::Node* zstar = cat_forward_graph<float>(tape, phi->store, fwd.z);
        out = transform_channels<float>(tape, bb.params, zstar, fwd.up);
      }
      RasterTensor t = diff::to_raster(out->val);
      require_finite(t, "patch output");
      results[static_cast<size_t>(id)] = std::move(t);
    } catch (const std::exception& e) {
      errors[static_cast<size_t>(id)] = e.what();
    }
  }

  std::ostringstream bad;
  int nbad = 0;
  for (int id = 0; id < total; ++id)
    if (!errors[static_cast<size_t>(id)].empty()) {
      if (nbad++) bad << "; ";
      bad << "patch " << id << ": " << errors[static_cast<size_t>(id)];
    }
  if (nbad)
    throw ValidationError("infer_all: " + std::to_string(nbad) +
                          " patch(es) failed [" + bad.str() + "]");
  return results;
}

PipelineResult run_pipeline(const RasterTensor& y, const RasterTensor& p,
                            Backbone& bb, const SensorDescriptor& sensor,
                            const AdaptConfig& cfg, int workers,
                            bool use_cat) {
  const auto t0 = std::chrono::steady_clock::now();
  PipelineResult out;

  const PatchGrid grid =
      stage("partition", [&] { return partition(y, p, cfg.patch_size); });
  if (grid.ratio != sensor.ratio)
    throw ValidationError(
        "pipeline: sensor ratio does not match the PAN/LRMS scale factor");
  out.total_patches = grid.count();

  CatParams phi;
  if (use_cat) {
    out.selected = stage("select", [&] {
      return select_random(grid, cfg.n_patches, cfg.seed);
    });
    const auto ta = std::chrono::steady_clock::now();
    stage("adapt", [&] {
      std::vector<std::pair<RasterTensor, RasterTensor>> pairs;
      pairs.reserve(out.selected.size());
      for (int id : out.selected) pairs.push_back(patch_at(y, p, grid, id));
      AdaptResult res = adapt(pairs, bb, sensor, cfg);
      phi = std::move(res.phi);
      out.trace = std::move(res.trace);
      return 0;
    });
    out.adapt_seconds = seconds_since(ta);
  }

  const auto ti = std::chrono::steady_clock::now();
  const auto patches = stage("inference", [&] {
    return infer_all(y, p, grid, bb, use_cat ? &phi : nullptr, workers);
  });
  out.infer_seconds = seconds_since(ti);

  out.fused = stage("stitch", [&] { return stitch(patches, grid); });
  out.total_seconds = seconds_since(t0);
  return out;
}

} // namespace catfuse
