#pragma once

#include <optional>
#include <vector>

#include "catfuse/resample.hpp"
#include "catfuse/tensor.hpp"

namespace catfuse {

struct QualityReport {
  double d_lambda = 0.0;  // spectral distortion, clamped to [0,1]
  double d_s = 0.0;       // spatial distortion, clamped to [0,1]
  double hqnr = 0.0;      // (1 - d_lambda) * (1 - d_s)
  std::optional<double> sam;    // degrees, reduced-resolution only
  std::optional<double> ergas;  // reduced-resolution only
  int block = 32;               // PAN-scale Q block size used
  std::vector<double> q_per_band;  // audit: per-band Q from d_lambda
  int clamp_events = 0;            // times a distortion left [0,1]
};

/// Universal image quality index over non-overlapping block x block tiles
/// (trailing partial tiles dropped), population moments, per tile
/// Q = 4*cov*ma*mb / ((va+vb)*(ma^2+mb^2)); tiles whose denominator falls
/// below 1e-12 are skipped; the result is the mean over retained tiles.
double q_index(const float* a, const float* b, int h, int w, int block = 32);

/// Spectral distortion: degrade the fusion with the MS MTF kernels and
/// decimate, then 1 - mean per-band Q against the LRMS at block
/// max(32/r, 8).
double d_lambda(const RasterTensor& fused, const RasterTensor& lrms,
                const SensorDescriptor& s,
                std::vector<double>* q_audit = nullptr);

/// Spatial distortion: mean over bands of |Q(fused_b, P, 32) -
/// Q(lrms_b, P_L, max(32/r, 8))| with P_L = decimate(blur_pan(P), r).
double d_s(const RasterTensor& fused, const RasterTensor& lrms,
           const RasterTensor& pan, const SensorDescriptor& s);

/// (1 - d_lambda) * (1 - d_s); inputs must lie in [0,1].
double hqnr(double d_lambda_v, double d_s_v);

/// Mean per-pixel spectral angle in degrees; zero-norm pixels are skipped.
double sam_degrees(const RasterTensor& x, const RasterTensor& gt);

/// 100/r * sqrt(mean_b(RMSE_b^2 / mean(gt_b)^2)); near-zero-mean bands are
/// an error.
double ergas(const RasterTensor& x, const RasterTensor& gt, int r);

/// Full no-reference evaluation; adds SAM/ERGAS when gt is given. Distortion
/// values outside [0,1] are clamped with the event counted.
QualityReport evaluate_quality(const RasterTensor& fused,
                               const RasterTensor& lrms,
                               const RasterTensor& pan,
                               const SensorDescriptor& s,
                               const RasterTensor* gt = nullptr);

} // namespace catfuse
