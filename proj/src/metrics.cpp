#include "catfuse/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace catfuse {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_ms_shapes(const RasterTensor& fused, const RasterTensor& lrms,
                     int r) {
  if (fused.channels != lrms.channels)
    throw ValidationError("quality: fused and LRMS band counts differ (" +
                          std::to_string(fused.channels) + " vs " +
                          std::to_string(lrms.channels) + ")");
  if (fused.height != lrms.height * r || fused.width != lrms.width * r)
    throw ValidationError(
        "quality: fused size must be ratio x LRMS size, got " +
        fused.shape_str() + " vs " + lrms.shape_str() + " at ratio " +
        std::to_string(r));
}

int ms_block(int r) { return std::max(32 / r, 8); }

} // namespace

double q_index(const float* a, const float* b, int h, int w, int block) {
  if (block < 1)
    throw ValidationError("q_index: block must be >= 1, got " +
                          std::to_string(block));
  if (h < block || w < block)
    throw ValidationError("q_index: image sides (" + std::to_string(h) + "x" +
                          std::to_string(w) + ") must be >= block (" +
                          std::to_string(block) + ")");
  const int tr = h / block;  // trailing partial tiles are dropped
  const int tc = w / block;
  const double n = double(block) * double(block);
  double acc = 0.0;
  long kept = 0;
  for (int ty = 0; ty < tr; ++ty) {
    for (int tx = 0; tx < tc; ++tx) {
      double sa = 0.0, sb = 0.0, saa = 0.0, sbb = 0.0, sab = 0.0;
      for (int y = 0; y < block; ++y) {
        const float* pa = a + size_t(ty * block + y) * w + size_t(tx) * block;
        const float* pb = b + size_t(ty * block + y) * w + size_t(tx) * block;
        for (int x = 0; x < block; ++x) {
          const double va = pa[x], vb = pb[x];
          sa += va;
          sb += vb;
          saa += va * va;
          sbb += vb * vb;
          sab += va * vb;
        }
      }
      const double ma = sa / n, mb = sb / n;
      const double va = saa / n - ma * ma;
      const double vb = sbb / n - mb * mb;
      const double cov = sab / n - ma * mb;
      const double den = (va + vb) * (ma * ma + mb * mb);
      if (den < 1e-12) continue;  // constant or near-constant tile
      acc += 4.0 * cov * ma * mb / den;
      ++kept;
    }
  }
  if (kept == 0)
    throw ValidationError("q_index: degenerate input (all tiles skipped)");
  return acc / double(kept);
}

double d_lambda(const RasterTensor& fused, const RasterTensor& lrms,
                const SensorDescriptor& s, std::vector<double>* q_audit) {
  s.validate();
  check_ms_shapes(fused, lrms, s.ratio);
  if (fused.channels != s.bands())
    throw ValidationError("d_lambda: image bands (" +
                          std::to_string(fused.channels) +
                          ") must match sensor bands (" +
                          std::to_string(s.bands()) + ")");
  const RasterTensor degraded = decimate(blur_ms(fused, s), s.ratio);
  const int block = ms_block(s.ratio);
  if (q_audit) q_audit->clear();
  double acc = 0.0;
  for (int b = 0; b < fused.channels; ++b) {
    const double q = q_index(degraded.band(b), lrms.band(b), degraded.height,
                             degraded.width, block);
    if (q_audit) q_audit->push_back(q);
    acc += q;
  }
  return 1.0 - acc / double(fused.channels);
}

double d_s(const RasterTensor& fused, const RasterTensor& lrms,
           const RasterTensor& pan, const SensorDescriptor& s) {
  s.validate();
  check_ms_shapes(fused, lrms, s.ratio);
  if (pan.channels != 1)
    throw ValidationError("d_s: PAN must have exactly 1 band, got " +
                          std::to_string(pan.channels));
  if (fused.height != pan.height || fused.width != pan.width)
    throw ValidationError("d_s: fused image must match PAN size, got " +
                          fused.shape_str() + " vs " + pan.shape_str());
  if (fused.channels != s.bands())
    throw ValidationError("d_s: image bands (" +
                          std::to_string(fused.channels) +
                          ") must match sensor bands (" +
                          std::to_string(s.bands()) + ")");
  const RasterTensor pan_lo = decimate(blur_pan(pan, s), s.ratio);
  const int lo_block = ms_block(s.ratio);
  double acc = 0.0;
  for (int b = 0; b < fused.channels; ++b) {
    const double q_hi =
        q_index(fused.band(b), pan.band(0), fused.height, fused.width, 32);
    const double q_lo = q_index(lrms.band(b), pan_lo.band(0), lrms.height,
                                lrms.width, lo_block);
    acc += std::abs(q_hi - q_lo);
  }
  return acc / double(fused.channels);
}

double hqnr(double d_lambda_v, double d_s_v) {
  if (!(d_lambda_v >= 0.0 && d_lambda_v <= 1.0))
    throw ValidationError("hqnr: d_lambda must lie in [0,1], got " +
                          std::to_string(d_lambda_v));
  if (!(d_s_v >= 0.0 && d_s_v <= 1.0))
    throw ValidationError("hqnr: d_s must lie in [0,1], got " +
                          std::to_string(d_s_v));
  return (1.0 - d_lambda_v) * (1.0 - d_s_v);
}

double sam_degrees(const RasterTensor& x, const RasterTensor& gt) {
  if (!x.same_shape(gt))
    throw ValidationError("sam: shape mismatch, " + x.shape_str() + " vs " +
                          gt.shape_str());
  const int c = x.channels;
  const size_t plane = size_t(x.height) * size_t(x.width);
  double acc = 0.0;
  long kept = 0;
  for (size_t i = 0; i < plane; ++i) {
    double dot = 0.0, nx = 0.0, ng = 0.0;
    for (int b = 0; b < c; ++b) {
      const double xv = x.data[size_t(b) * plane + i];
      const double gv = gt.data[size_t(b) * plane + i];
      dot += xv * gv;
      nx += xv * xv;
      ng += gv * gv;
    }
    if (nx == 0.0 || ng == 0.0) continue;  // zero-norm spectrum
    const double cosv =
        std::clamp(dot / (std::sqrt(nx) * std::sqrt(ng)), -1.0, 1.0);
    acc += std::acos(cosv);
    ++kept;
  }
  if (kept == 0)
    throw ValidationError("sam: all pixels have zero-norm spectra");
  return acc / double(kept) * (180.0 / kPi);
}

double ergas(const RasterTensor& x, const RasterTensor& gt, int r) {
  if (!x.same_shape(gt))
    throw ValidationError("ergas: shape mismatch, " + x.shape_str() + " vs " +
                          gt.shape_str());
  if (r < 1)
    throw ValidationError("ergas: ratio must be >= 1, got " +
                          std::to_string(r));
  const size_t plane = size_t(x.height) * size_t(x.width);
  double acc = 0.0;
  for (int b = 0; b < x.channels; ++b) {
    const float* px = x.band(b);
    const float* pg = gt.band(b);
    double se = 0.0, sg = 0.0;
    for (size_t i = 0; i < plane; ++i) {
      const double d = double(px[i]) - double(pg[i]);
      se += d * d;
      sg += pg[i];
    }
    const double mean_g = sg / double(plane);
    if (std::abs(mean_g) < 1e-12)
      throw ValidationError("ergas: band " + std::to_string(b) +
                            " of the reference has near-zero mean");
    acc += (se / double(plane)) / (mean_g * mean_g);
  }
  return 100.0 / double(r) * std::sqrt(acc / double(x.channels));
}

QualityReport evaluate_quality(const RasterTensor& fused,
                               const RasterTensor& lrms,
                               const RasterTensor& pan,
                               const SensorDescriptor& s,
                               const RasterTensor* gt) {
  QualityReport rep;
  rep.block = 32;
  double dl = d_lambda(fused, lrms, s, &rep.q_per_band);
  double ds = d_s(fused, lrms, pan, s);
  if (dl < 0.0 || dl > 1.0) {
    dl = std::clamp(dl, 0.0, 1.0);
    ++rep.clamp_events;
  }
  if (ds < 0.0 || ds > 1.0) {
    ds = std::clamp(ds, 0.0, 1.0);
    ++rep.clamp_events;
  }
  rep.d_lambda = dl;
  rep.d_s = ds;
  rep.hqnr = hqnr(dl, ds);
  if (gt) {
    rep.sam = sam_degrees(fused, *gt);
    rep.ergas = ergas(fused, *gt, s.ratio);
  }
  return rep;
}

} // namespace catfuse
