#include "catfuse/kernels.hpp"

#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace catfuse::kernels {

namespace {

/// Copies a c x h x w stack into a zero-padded c x (h+2p) x (w+2p) scratch.
void pad_zero(const float* in, int c, int h, int w, int p, float* out) {
  const int hp = h + 2 * p, wp = w + 2 * p;
  std::memset(out, 0, sizeof(float) * static_cast<size_t>(c) * hp * wp);
  for (int ci = 0; ci < c; ++ci)
    for (int y = 0; y < h; ++y)
      std::memcpy(out + (static_cast<size_t>(ci) * hp + y + p) * wp + p,
                  in + (static_cast<size_t>(ci) * h + y) * w,
                  sizeof(float) * static_cast<size_t>(w));
}

/// out[0..n) += a * src[0..n); the hot loop of every convolution here.
inline void axpy(float a, const float* __restrict src, float* __restrict out,
                 int n) {
  for (int i = 0; i < n; ++i) out[i] += a * src[i];
}

// Accumulations are strictly ordered on purpose: reassociating reductions
// (omp simd, -fassociative-math) make the result depend on the vector width
// of the build, which breaks byte-stable outputs across machines and the
// committed golden fixtures. Parallelism lives at the band/patch level.
inline float dot(const float* __restrict a, const float* __restrict b, int n) {
  float acc = 0.0f;
  for (int i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

} // namespace

void conv2d_fast(const float* in, int c_in, int h, int w, const float* wgt,
                 int c_out, int k, const float* bias, bool same, float* out) {
  const int p = same ? k / 2 : 0;
  int oh, ow;
  conv2d_out_shape(h, w, k, same, oh, ow);
  const int hp = h + 2 * p, wp = w + 2 * p;
  std::vector<float> padded;
  const float* src = in;
  if (p > 0) {
    padded.resize(static_cast<size_t>(c_in) * hp * wp);
    pad_zero(in, c_in, h, w, p, padded.data());
    src = padded.data();
  }
#pragma omp parallel for schedule(static) if (c_out > 1)
  for (int co = 0; co < c_out; ++co) {
    float* op = out + static_cast<size_t>(co) * oh * ow;
    const float b = bias ? bias[co] : 0.0f;
    for (int i = 0; i < oh * ow; ++i) op[i] = b;
    for (int ci = 0; ci < c_in; ++ci) {
      const float* ip = src + static_cast<size_t>(ci) * hp * wp;
      for (int dy = 0; dy < k; ++dy) {
        for (int dx = 0; dx < k; ++dx) {
          const float wv =
              wgt[((static_cast<size_t>(co) * c_in + ci) * k + dy) * k + dx];
          if (wv == 0.0f) continue;
          const float* row = ip + static_cast<size_t>(dy) * wp + dx;
          for (int y = 0; y < oh; ++y)
            axpy(wv, row + static_cast<size_t>(y) * wp,
                 op + static_cast<size_t>(y) * ow, ow);
        }
      }
    }
  }
}

void conv2d_grad_input_fast(const float* gout, int c_out, const float* wgt,
                            int c_in, int h, int w, int k, bool same,
                            float* gin) {
  const int p = same ? k / 2 : 0;
  int oh, ow;
  conv2d_out_shape(h, w, k, same, oh, ow);
  // Grad w.r.t. the input is a full correlation with the kernel flipped in
  // (dy,dx) and transposed in (co,ci); padding q makes every shift in-range.
  const int q = k - 1 - p;
  const int hp = oh + 2 * q, wp = ow + 2 * q;
  std::vector<float> padded(static_cast<size_t>(c_out) * hp * wp);
  pad_zero(gout, c_out, oh, ow, q, padded.data());
#pragma omp parallel for schedule(static) if (c_in > 1)
  for (int ci = 0; ci < c_in; ++ci) {
    float* gp = gin + static_cast<size_t>(ci) * h * w;
    for (int co = 0; co < c_out; ++co) {
      const float* ip = padded.data() + static_cast<size_t>(co) * hp * wp;
      for (int dy = 0; dy < k; ++dy) {
        for (int dx = 0; dx < k; ++dx) {
          const float wv =
              wgt[((static_cast<size_t>(co) * c_in + ci) * k + dy) * k + dx];
          if (wv == 0.0f) continue;
          const float* row =
              ip + static_cast<size_t>(k - 1 - dy) * wp + (k - 1 - dx);
          for (int u = 0; u < h; ++u)
            axpy(wv, row + static_cast<size_t>(u) * wp,
                 gp + static_cast<size_t>(u) * w, w);
        }
      }
    }
  }
}

void conv2d_grad_weights_fast(const float* gout, int c_out, const float* in,
                              int c_in, int h, int w, int k, bool same,
                              float* gwgt, float* gbias) {
  const int p = same ? k / 2 : 0;
  int oh, ow;
  conv2d_out_shape(h, w, k, same, oh, ow);
  const int hp = h + 2 * p, wp = w + 2 * p;
  std::vector<float> padded;
  const float* src = in;
  if (p > 0) {
    padded.resize(static_cast<size_t>(c_in) * hp * wp);
    pad_zero(in, c_in, h, w, p, padded.data());
    src = padded.data();
  }
#pragma omp parallel for schedule(static) if (c_out > 1)
  for (int co = 0; co < c_out; ++co) {
    const float* gp = gout + static_cast<size_t>(co) * oh * ow;
    for (int ci = 0; ci < c_in; ++ci) {
      const float* ip = src + static_cast<size_t>(ci) * hp * wp;
      for (int dy = 0; dy < k; ++dy) {
        for (int dx = 0; dx < k; ++dx) {
          float acc = 0.0f;
          const float* row = ip + static_cast<size_t>(dy) * wp + dx;
          for (int y = 0; y < oh; ++y)
            acc += dot(gp + static_cast<size_t>(y) * ow,
                       row + static_cast<size_t>(y) * wp, ow);
          gwgt[((static_cast<size_t>(co) * c_in + ci) * k + dy) * k + dx] +=
              acc;
        }
      }
    }
    if (gbias) {
      float acc = 0.0f;
      for (int i = 0; i < oh * ow; ++i) acc += gp[i];
      gbias[co] += acc;
    }
  }
}

void blur_plane_fast(const float* in, int h, int w, const float* taps, int kn,
                     float* out) {
  const int c = kn / 2;
  // Row pass with a mirrored scratch row, then column pass over a mirrored
  // row-extended scratch; both are tap-outer axpy loops.
  std::vector<float> tmp(static_cast<size_t>(h) * w);
  {
    std::vector<float> buf(static_cast<size_t>(w) + kn - 1);
    for (int y = 0; y < h; ++y) {
      const float* row = in + static_cast<size_t>(y) * w;
      for (int m = 0; m < w + kn - 1; ++m) buf[m] = row[mirror_index(m - c, w)];
      float* o = tmp.data() + static_cast<size_t>(y) * w;
      std::memset(o, 0, sizeof(float) * static_cast<size_t>(w));
      for (int t = 0; t < kn; ++t) axpy(taps[t], buf.data() + t, o, w);
    }
  }
  std::vector<float> buf(static_cast<size_t>(h + kn - 1) * w);
  for (int m = 0; m < h + kn - 1; ++m)
    std::memcpy(buf.data() + static_cast<size_t>(m) * w,
                tmp.data() + static_cast<size_t>(mirror_index(m - c, h)) * w,
                sizeof(float) * static_cast<size_t>(w));
  std::memset(out, 0, sizeof(float) * static_cast<size_t>(h) * w);
  for (int t = 0; t < kn; ++t)
    for (int y = 0; y < h; ++y)
      axpy(taps[t], buf.data() + static_cast<size_t>(y + t) * w,
           out + static_cast<size_t>(y) * w, w);
}

void blur_plane_adjoint_fast(const float* gout, int h, int w,
                             const float* taps, int kn, float* gin) {
  const int c = kn / 2;
  // Adjoint of the column pass: scatter rows into an extended scratch, then
  // fold mirrored rows back.
  std::vector<float> ext(static_cast<size_t>(h + kn - 1) * w, 0.0f);
  for (int t = 0; t < kn; ++t)
    for (int y = 0; y < h; ++y)
      axpy(taps[t], gout + static_cast<size_t>(y) * w,
           ext.data() + static_cast<size_t>(y + t) * w, w);
  std::vector<float> gtmp(static_cast<size_t>(h) * w, 0.0f);
  for (int m = 0; m < h + kn - 1; ++m)
    axpy(1.0f, ext.data() + static_cast<size_t>(m) * w,
         gtmp.data() + static_cast<size_t>(mirror_index(m - c, h)) * w, w);
  // Adjoint of the row pass.
  std::vector<float> rbuf(static_cast<size_t>(w) + kn - 1);
  for (int y = 0; y < h; ++y) {
    std::memset(rbuf.data(), 0, sizeof(float) * rbuf.size());
    const float* g = gtmp.data() + static_cast<size_t>(y) * w;
    for (int t = 0; t < kn; ++t) axpy(taps[t], g, rbuf.data() + t, w);
    float* o = gin + static_cast<size_t>(y) * w;
    for (int m = 0; m < w + kn - 1; ++m) o[mirror_index(m - c, w)] += rbuf[m];
  }
}

std::vector<std::array<double, 4>> cubic_phase_table(int r) {
  std::vector<std::array<double, 4>> ph(static_cast<size_t>(r));
  ph[0] = {0.0, 1.0, 0.0, 0.0};
  for (int q = 1; q < r; ++q) {
    const double f = static_cast<double>(q) / r;
    ph[q] = {cubic_weight(1.0 + f), cubic_weight(f), cubic_weight(1.0 - f),
             cubic_weight(2.0 - f)};
  }
  return ph;
}

void upsample_plane_fast(const float* in, int h, int w, int r, float* out) {
  const auto phd = cubic_phase_table(r);
  std::vector<std::array<float, 4>> ph(phd.size());
  for (size_t q = 0; q < phd.size(); ++q)
    for (int j = 0; j < 4; ++j) ph[q][j] = static_cast<float>(phd[q][j]);
  const int H = h * r, W = w * r;
  // Vertical pass: each output row is a copy or a 4-row blend.
  std::vector<float> tmp(static_cast<size_t>(H) * w);
  for (int o = 0; o < H; ++o) {
    float* dst = tmp.data() + static_cast<size_t>(o) * w;
    const int q = o % r, i = o / r;
    if (q == 0) {
      std::memcpy(dst, in + static_cast<size_t>(i) * w,
                  sizeof(float) * static_cast<size_t>(w));
      continue;
    }
    std::memset(dst, 0, sizeof(float) * static_cast<size_t>(w));
    for (int j = 0; j < 4; ++j)
      axpy(ph[q][j],
           in + static_cast<size_t>(mirror_index(i + j - 1, h)) * w, dst, w);
  }
  // Horizontal pass over a mirrored row buffer (1 left, 2 right).
  std::vector<float> buf(static_cast<size_t>(w) + 3);
  for (int y = 0; y < H; ++y) {
    const float* srow = tmp.data() + static_cast<size_t>(y) * w;
    for (int m = 0; m < w + 3; ++m) buf[m] = srow[mirror_index(m - 1, w)];
    float* drow = out + static_cast<size_t>(y) * W;
    for (int o = 0; o < W; ++o) {
      const int q = o % r, i = o / r;
      if (q == 0) {
        drow[o] = srow[i];
      } else {
        const auto& wq = ph[q];
        drow[o] = wq[0] * buf[i] + wq[1] * buf[i + 1] + wq[2] * buf[i + 2] +
                  wq[3] * buf[i + 3];
      }
    }
  }
}

double l1_mean(const float* a, const float* b, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d < 0 ? -d : d;
  }
  return acc / static_cast<double>(n);
}

double l1_mean(const double* a, const double* b, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    acc += d < 0 ? -d : d;
  }
  return acc / static_cast<double>(n);
}

} // namespace catfuse::kernels
