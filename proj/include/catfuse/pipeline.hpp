#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "catfuse/cat.hpp"

namespace catfuse {

/// Non-overlapping tiling of an LRMS/PAN pair. Patch ids are 0-based and
/// row-major: id = row * cols + col. Every PAN patch (patch_h x patch_w)
/// pairs with the LRMS patch (patch_h/r x patch_w/r) at the scaled
/// coordinates.
struct PatchGrid {
  int patch_h = 0, patch_w = 0;  // PAN scale
  int rows = 0, cols = 0;
  int ratio = 0;

  int count() const { return rows * cols; }
  std::pair<int, int> coords(int id) const;  // (row, col); validates id
};

/// Validates divisibility and builds the grid. Image sizes that do not
/// divide evenly are a hard error (crop upstream; stitching must be exact).
PatchGrid partition(const RasterTensor& y, const RasterTensor& p,
                    int patch_size);

/// Copies of the (LRMS, PAN) patch pair with the given id.
std::pair<RasterTensor, RasterTensor> patch_at(const RasterTensor& y,
                                               const RasterTensor& p,
                                               const PatchGrid& g, int id);

/// n distinct patch ids drawn uniformly without replacement from the pinned
/// generator seeded with `seed`; deterministic.
std::vector<int> select_random(const PatchGrid& g, int n, uint64_t seed);

/// Places patch i at its grid coordinates; exact tiling, no blending.
RasterTensor stitch(const std::vector<RasterTensor>& patches,
                    const PatchGrid& g);

/// Adapted forward on every patch with frozen parameters, `workers` OpenMP
/// threads. phi == nullptr runs the backbone alone. Patches are independent
/// pure functions of their inputs, so the result is bit-identical for any
/// worker count. Per-patch failures are collected into one aggregate error
/// naming the failed ids.
std::vector<RasterTensor> infer_all(const RasterTensor& y,
                                    const RasterTensor& p, const PatchGrid& g,
                                    Backbone& bb, CatParams* phi, int workers);

struct PipelineResult {
  RasterTensor fused;
  double adapt_seconds = 0.0;
  double infer_seconds = 0.0;
  double total_seconds = 0.0;
  std::vector<AdaptStep> trace;
  std::vector<int> selected;
  int total_patches = 0;
};

/// partition -> select -> adapt -> infer_all -> stitch. With use_cat false
/// (or epochs == 0) the output equals the stitched backbone-only result.
PipelineResult run_pipeline(const RasterTensor& y, const RasterTensor& p,
                            Backbone& bb, const SensorDescriptor& sensor,
                            const AdaptConfig& cfg, int workers,
                            bool use_cat = true);

} // namespace catfuse
