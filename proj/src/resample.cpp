#include "catfuse/resample.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "catfuse/kernels.hpp"
#include "catfuse/rng.hpp"

namespace catfuse {

void SensorDescriptor::validate() const {
  if (ratio < 2) throw ValidationError("sensor ratio must be >= 2");
  if (mtf_gain.empty()) throw ValidationError("sensor has no bands");
  if (pan_weights.size() != mtf_gain.size())
    throw ValidationError("pan_weights count must equal band count");
  for (double g : mtf_gain)
    if (!(g > 0.0 && g < 1.0))
      throw ValidationError("mtf_gain must lie in (0,1)");
  if (!(pan_mtf_gain > 0.0 && pan_mtf_gain < 1.0))
    throw ValidationError("pan_mtf_gain must lie in (0,1)");
  double wsum = 0.0;
  for (double w : pan_weights) {
    if (w < 0.0) throw ValidationError("pan_weights must be nonnegative");
    wsum += w;
  }
  if (std::abs(wsum - 1.0) > 1e-6)
    throw ValidationError("pan_weights must sum to 1");
  if (!(radiometric_gamma > 0.0))
    throw ValidationError("radiometric_gamma must be > 0");
  if (kernel_size % 2 == 0 || kernel_size < 4 * ratio + 1)
    throw ValidationError("kernel_size must be odd and >= 4*ratio+1");
}

SensorDescriptor SensorDescriptor::defaults(int bands, int ratio) {
  SensorDescriptor s;
  s.ratio = ratio;
  s.mtf_gain.assign(static_cast<size_t>(bands), 0.30);
  s.pan_weights.assign(static_cast<size_t>(bands), 1.0 / bands);
  return s;
}

double mtf_sigma(double gain, int r) {
  // Continuous Gaussian frequency response exp(-2 pi^2 sigma^2 f^2) set equal
  // to `gain` at the low-resolution Nyquist frequency f = 1/(2r).
  return (r / 3.14159265358979323846) * std::sqrt(-2.0 * std::log(gain));
}

MtfKernel mtf_kernel(double gain, int r, int size) {
  if (!(gain > 0.0 && gain < 1.0))
    throw ValidationError("mtf gain must lie in (0,1)");
  if (size % 2 == 0) throw ValidationError("mtf kernel size must be odd");
  if (size < 4 * r + 1)
    throw ValidationError("mtf kernel size must be >= 4*ratio+1");
  const double sigma = mtf_sigma(gain, r);
  const int c = size / 2;
  MtfKernel k;
  k.size = size;
  k.taps.resize(static_cast<size_t>(size));
  double sum = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - c;
    k.taps[static_cast<size_t>(i)] = std::exp(-(d * d) / (2.0 * sigma * sigma));
    sum += k.taps[static_cast<size_t>(i)];
  }
  for (double& t : k.taps) t /= sum;
  k.taps_f.resize(k.taps.size());
  for (size_t i = 0; i < k.taps.size(); ++i)
    k.taps_f[i] = static_cast<float>(k.taps[i]);
  k.grid.resize(static_cast<size_t>(size) * size);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      k.grid[static_cast<size_t>(y) * size + x] =
          k.taps[static_cast<size_t>(y)] * k.taps[static_cast<size_t>(x)];
  return k;
}

std::vector<MtfKernel> ms_kernels(const SensorDescriptor& s) {
  std::vector<MtfKernel> ks;
  ks.reserve(s.mtf_gain.size());
  for (double g : s.mtf_gain)
    ks.push_back(mtf_kernel(g, s.ratio, s.kernel_size));
  return ks;
}

MtfKernel pan_kernel(const SensorDescriptor& s) {
  return mtf_kernel(s.pan_mtf_gain, s.ratio, s.kernel_size);
}

std::vector<std::vector<double>> ms_tap_sets(const SensorDescriptor& s) {
  std::vector<std::vector<double>> taps;
  for (const MtfKernel& k : ms_kernels(s)) taps.push_back(k.taps);
  return taps;
}

RasterTensor blur(const RasterTensor& img,
                  const std::vector<MtfKernel>& kernels) {
  if (kernels.empty()) throw ValidationError("blur: no kernels given");
  if (kernels.size() != 1 &&
      kernels.size() != static_cast<size_t>(img.channels))
    throw ValidationError("blur: kernel count must be 1 or the band count");
  for (const MtfKernel& k : kernels)
    if (k.size > 2 * img.height || k.size > 2 * img.width)
      throw ValidationError("blur: kernel larger than 2x image extent");
  RasterTensor out(img.channels, img.height, img.width);
  for (int b = 0; b < img.channels; ++b) {
    const MtfKernel& k = kernels[kernels.size() == 1 ? 0 : static_cast<size_t>(b)];
    kernels::blur_plane_fast(img.band(b), img.height, img.width,
                             k.taps_f.data(), k.size,
                             out.data.data() + out.plane() * b);
  }
  return out;
}

RasterTensor blur_ms(const RasterTensor& img, const SensorDescriptor& s) {
  return blur(img, ms_kernels(s));
}

RasterTensor blur_pan(const RasterTensor& img, const SensorDescriptor& s) {
  return blur(img, {pan_kernel(s)});
}

RasterTensor decimate(const RasterTensor& img, int r) {
  if (r < 1) throw ValidationError("decimate: ratio must be >= 1");
  if (img.height % r != 0 || img.width % r != 0) {
    std::ostringstream m;
    m << "decimate: " << img.height << "x" << img.width
      << " not divisible by " << r << "; pad or crop upstream";
    throw ValidationError(m.str());
  }
  RasterTensor out(img.channels, img.height / r, img.width / r);
  for (int b = 0; b < img.channels; ++b)
    kernels::decimate_plane(img.band(b), img.height, img.width, r,
                            out.data.data() + out.plane() * b);
  return out;
}

RasterTensor upsample(const RasterTensor& img, int r) {
  if (r < 2) throw ValidationError("upsample: ratio must be >= 2");
  RasterTensor out(img.channels, img.height * r, img.width * r);
  for (int b = 0; b < img.channels; ++b)
    kernels::upsample_plane_fast(img.band(b), img.height, img.width, r,
                                 out.data.data() + out.plane() * b);
  return out;
}

namespace {

/// Adds white noise smoothed by a small Gaussian, scaled to `amp`.
void add_smooth_texture(std::vector<double>& field, int h, int w, double amp,
                        Rng& rng) {
  std::vector<double> noise(static_cast<size_t>(h) * w);
  for (double& v : noise) v = rng.uniform(-1.0, 1.0);
  const MtfKernel k = mtf_kernel(0.10, 2, 9);
  std::vector<double> smooth(noise.size());
  kernels::blur_plane_ref(noise.data(), h, w, k.taps.data(), k.size,
                          smooth.data());
  for (size_t i = 0; i < field.size(); ++i) field[i] += amp * smooth[i];
}

} // namespace

SceneBundle synth_scene(uint64_t seed, const SensorDescriptor& sensor,
                        int height, int width) {
  sensor.validate();
  const int r = sensor.ratio;
  if (height % r != 0 || width % r != 0)
    throw ValidationError("synth_scene: size must be divisible by the ratio");
  if (height < 8 || width < 8)
    throw ValidationError("synth_scene: size must be at least 8");
  const int C = sensor.bands();
  const size_t plane = static_cast<size_t>(height) * width;

  Rng root(seed);
  Rng rg = root.split(1);  // gradients
  Rng rr = root.split(2);  // rectangles
  Rng rt = root.split(3);  // shared texture
  Rng rb = root.split(4);  // band mixing + band texture

  // Shared structure: one plane every band correlates with.
  std::vector<double> shared(plane);
  {
    const double gx = rg.uniform(-0.6, 0.6);
    const double gy = rg.uniform(-0.6, 0.6);
    const double g0 = rg.uniform(0.2, 0.8);
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x)
        shared[static_cast<size_t>(y) * width + x] =
            g0 + gx * (static_cast<double>(x) / (width - 1)) +
            gy * (static_cast<double>(y) / (height - 1));

    const int nrect = 8 + static_cast<int>(rr.next_below(9));
    for (int i = 0; i < nrect; ++i) {
      const int y0 = static_cast<int>(rr.next_below(static_cast<uint64_t>(height)));
      const int x0 = static_cast<int>(rr.next_below(static_cast<uint64_t>(width)));
      const int rh = height / 16 + 1 +
                     static_cast<int>(rr.next_below(
                         static_cast<uint64_t>(std::max(1, height / 4))));
      const int rw = width / 16 + 1 +
                     static_cast<int>(rr.next_below(
                         static_cast<uint64_t>(std::max(1, width / 4))));
      const double v = rr.uniform(-0.4, 0.4);
      for (int y = y0; y < std::min(height, y0 + rh); ++y)
        for (int x = x0; x < std::min(width, x0 + rw); ++x)
          shared[static_cast<size_t>(y) * width + x] += v;
    }

    add_smooth_texture(shared, height, width, rt.uniform(0.15, 0.30), rt);
  }

  // Bands: scaled shared structure + offset + band-specific texture.
  std::vector<std::vector<double>> bands(static_cast<size_t>(C));
  for (int b = 0; b < C; ++b) {
    const double sb = rb.uniform(0.75, 1.0);
    const double ob = rb.uniform(-0.08, 0.08);
    const double ab = rb.uniform(0.05, 0.12);
    std::vector<double>& band = bands[static_cast<size_t>(b)];
    band.resize(plane);
    for (size_t i = 0; i < plane; ++i) band[i] = sb * shared[i] + ob;
    add_smooth_texture(band, height, width, ab, rb);
  }

  // Joint affine map into [0.02, 0.98] (keeps band means away from zero and
  // preserves inter-band correlation).
  double lo = bands[0][0], hi = bands[0][0];
  for (const auto& band : bands)
    for (double v : band) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  const double span = hi - lo < 1e-12 ? 1.0 : hi - lo;

  SceneBundle out;
  out.sensor = sensor;
  out.seed = seed;
  out.gt = RasterTensor(C, height, width);
  for (int b = 0; b < C; ++b) {
    float* dst = out.gt.data.data() + out.gt.plane() * b;
    const std::vector<double>& band = bands[static_cast<size_t>(b)];
    for (size_t i = 0; i < plane; ++i)
      dst[i] = static_cast<float>(0.02 + 0.96 * (band[i] - lo) / span);
  }

  out.pan = RasterTensor(1, height, width);
  for (size_t i = 0; i < plane; ++i) {
    double acc = 0.0;
    for (int b = 0; b < C; ++b)
      acc += sensor.pan_weights[static_cast<size_t>(b)] *
             static_cast<double>(out.gt.data[out.gt.plane() * b + i]);
    out.pan.data[i] =
        static_cast<float>(std::pow(acc, sensor.radiometric_gamma));
  }

  out.lrms = decimate(blur_ms(out.gt, sensor), r);
  return out;
}

SceneBundle wald_reduce(const SceneBundle& b) {
  const int r = b.sensor.ratio;
  const int h = b.lrms.height, w = b.lrms.width;
  if (h % r != 0 || w % r != 0)
    throw ValidationError("wald_reduce: lrms size not divisible by the ratio");
  if (h / r < 2 * r || w / r < 2 * r)
    throw ValidationError("wald_reduce: scene too small to reduce");
  SceneBundle out;
  out.sensor = b.sensor;
  out.seed = b.seed;
  out.gt = b.lrms;
  out.lrms = decimate(blur_ms(b.lrms, b.sensor), r);
  out.pan = decimate(blur_pan(b.pan, b.sensor), r);
  return out;
}

} // namespace catfuse
