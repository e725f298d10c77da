#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "catfuse/tensor.hpp"

namespace catfuse {

/// Imaging model of one satellite: band count, resolution ratio, per-band
/// MTF gains at the low-resolution Nyquist frequency, and how its PAN channel
/// relates to the multispectral bands.
struct SensorDescriptor {
  std::string name = "synth_a";
  int ratio = 4;
  std::vector<double> mtf_gain;     // per band, each in (0,1)
  double pan_mtf_gain = 0.17;
  std::vector<double> pan_weights;  // nonnegative, sum to 1
  double radiometric_gamma = 1.0;
  int kernel_size = 41;             // odd, >= 4*ratio+1

  int bands() const { return static_cast<int>(mtf_gain.size()); }

  /// Throws ValidationError on any broken invariant.
  void validate() const;

  /// `bands` bands with gain 0.30 each, uniform pan_weights, gamma 1.
  static SensorDescriptor defaults(int bands, int ratio = 4);
};

/// Sampled isotropic Gaussian, exactly separable: grid = taps ⊗ taps.
struct MtfKernel {
  int size = 0;
  std::vector<double> taps;    // normalized 1-D factor, sum 1
  std::vector<float> taps_f;   // same taps cast for the float fast path
  std::vector<double> grid;    // size x size outer product (oracle/tests)
};

/// Gaussian sigma whose frequency response at f = 1/(2r) equals `gain`.
double mtf_sigma(double gain, int r);

/// Sampled, sum-normalized Gaussian for the given Nyquist gain.
MtfKernel mtf_kernel(double gain, int r, int size = 41);

std::vector<MtfKernel> ms_kernels(const SensorDescriptor& s);
MtfKernel pan_kernel(const SensorDescriptor& s);

/// Per-band 1-D tap sets of the MS kernels (for the differentiable blur op).
std::vector<std::vector<double>> ms_tap_sets(const SensorDescriptor& s);

/// Per-band blur with symmetric (mirror) padding. `kernels` holds either one
/// kernel shared by all bands or one kernel per band.
RasterTensor blur(const RasterTensor& img, const std::vector<MtfKernel>& kernels);
RasterTensor blur_ms(const RasterTensor& img, const SensorDescriptor& s);
RasterTensor blur_pan(const RasterTensor& img, const SensorDescriptor& s);

/// Top-left (offset 0) subsampling by r.
RasterTensor decimate(const RasterTensor& img, int r);

/// Separable bicubic (a = -0.5) zoom by r, zero-phase:
/// decimate(upsample(x, r), r) == x bit-exactly.
RasterTensor upsample(const RasterTensor& img, int r);

/// Matched (ground truth, LRMS, PAN) triple under one sensor model.
struct SceneBundle {
  RasterTensor gt;    // C x H x W
  RasterTensor lrms;  // C x H/r x W/r, = decimate(blur_ms(gt), r)
  RasterTensor pan;   // 1 x H x W, = (sum_b w_b gt_b)^gamma
  SensorDescriptor sensor;
  uint64_t seed = 0;
};

/// Procedural scene: low-frequency gradients + random rectangles +
/// band-correlated smoothed texture, values in [0,1]; deterministic per
/// (seed, sensor, size).
SceneBundle synth_scene(uint64_t seed, const SensorDescriptor& sensor,
                        int height, int width);

/// One protocol step down: gt := lrms, lrms := decimate(blur(lrms)),
/// pan := decimate(blur_pan(pan)). The output's gt sits at its PAN scale,
/// usable as supervised ground truth.
SceneBundle wald_reduce(const SceneBundle& b);

} // namespace catfuse
