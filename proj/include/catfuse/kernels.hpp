#pragma once

#include <array>
#include <cstddef>
#include <vector>

namespace catfuse::kernels {

// Low-level numeric kernels on raw planes. Every routine here writes each
// output element from exactly one place with a fixed inner summation order,
// so results do not depend on thread count. The *_ref templates are the
// serial reference implementations (double accumulation, no tiling); the
// float *_fast overloads in kernels.cpp are the production OpenMP paths.
// bench_kernels compares the two.

/// Symmetric (edge-inclusive) mirror fold: -1 -> 0, -2 -> 1, n -> n-1.
inline int mirror_index(int i, int n) {
  if (n == 1) return 0;
  int m = i % (2 * n);
  if (m < 0) m += 2 * n;
  return m < n ? m : 2 * n - 1 - m;
}

// ---------------------------------------------------------------------------
// 2-D convolution (cross-correlation, stride 1, odd kernel).
// in: c_in x h x w; wgt: c_out x c_in x k x k; bias: c_out or nullptr.
// same=true pads with zeros to keep h x w; same=false is valid convolution
// with output (h-k+1) x (w-k+1).
// ---------------------------------------------------------------------------

inline void conv2d_out_shape(int h, int w, int k, bool same, int& oh, int& ow) {
  oh = same ? h : h - k + 1;
  ow = same ? w : w - k + 1;
}

template <typename T>
void conv2d_ref(const T* in, int c_in, int h, int w, const T* wgt, int c_out,
                int k, const T* bias, bool same, T* out) {
  const int p = same ? k / 2 : 0;
  int oh, ow;
  conv2d_out_shape(h, w, k, same, oh, ow);
  for (int co = 0; co < c_out; ++co) {
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        double acc = bias ? static_cast<double>(bias[co]) : 0.0;
        for (int ci = 0; ci < c_in; ++ci) {
          for (int dy = 0; dy < k; ++dy) {
            const int iy = y + dy - p;
            if (iy < 0 || iy >= h) continue;
            for (int dx = 0; dx < k; ++dx) {
              const int ix = x + dx - p;
              if (ix < 0 || ix >= w) continue;
              acc += static_cast<double>(
                         wgt[((static_cast<size_t>(co) * c_in + ci) * k + dy) *
                                 k +
                             dx]) *
                     static_cast<double>(
                         in[(static_cast<size_t>(ci) * h + iy) * w + ix]);
            }
          }
        }
        out[(static_cast<size_t>(co) * oh + y) * ow + x] = static_cast<T>(acc);
      }
    }
  }
}

/// Accumulates d(loss)/d(in) into gin (caller zeroes on first use).
template <typename T>
void conv2d_grad_input_ref(const T* gout, int c_out, const T* wgt, int c_in,
                           int h, int w, int k, bool same, T* gin) {
  const int p = same ? k / 2 : 0;
  int oh, ow;
  conv2d_out_shape(h, w, k, same, oh, ow);
  for (int ci = 0; ci < c_in; ++ci) {
    for (int u = 0; u < h; ++u) {
      for (int v = 0; v < w; ++v) {
        double acc = 0.0;
        for (int co = 0; co < c_out; ++co) {
          for (int dy = 0; dy < k; ++dy) {
            const int y = u - dy + p;
            if (y < 0 || y >= oh) continue;
            for (int dx = 0; dx < k; ++dx) {
              const int x = v - dx + p;
              if (x < 0 || x >= ow) continue;
              acc += static_cast<double>(
                         wgt[((static_cast<size_t>(co) * c_in + ci) * k + dy) *
                                 k +
                             dx]) *
                     static_cast<double>(
                         gout[(static_cast<size_t>(co) * oh + y) * ow + x]);
            }
          }
        }
        gin[(static_cast<size_t>(ci) * h + u) * w + v] += static_cast<T>(acc);
      }
    }
  }
}

/// Accumulates weight/bias grads. gbias may be nullptr.
template <typename T>
void conv2d_grad_weights_ref(const T* gout, int c_out, const T* in, int c_in,
                             int h, int w, int k, bool same, T* gwgt,
                             T* gbias) {
  const int p = same ? k / 2 : 0;
  int oh, ow;
  conv2d_out_shape(h, w, k, same, oh, ow);
  for (int co = 0; co < c_out; ++co) {
    for (int ci = 0; ci < c_in; ++ci) {
      for (int dy = 0; dy < k; ++dy) {
        for (int dx = 0; dx < k; ++dx) {
          double acc = 0.0;
          for (int y = 0; y < oh; ++y) {
            const int iy = y + dy - p;
            if (iy < 0 || iy >= h) continue;
            for (int x = 0; x < ow; ++x) {
              const int ix = x + dx - p;
              if (ix < 0 || ix >= w) continue;
              acc += static_cast<double>(
                         gout[(static_cast<size_t>(co) * oh + y) * ow + x]) *
                     static_cast<double>(
                         in[(static_cast<size_t>(ci) * h + iy) * w + ix]);
            }
          }
          gwgt[((static_cast<size_t>(co) * c_in + ci) * k + dy) * k + dx] +=
              static_cast<T>(acc);
        }
      }
    }
    if (gbias) {
      double acc = 0.0;
      for (int i = 0; i < oh * ow; ++i)
        acc += static_cast<double>(gout[static_cast<size_t>(co) * oh * ow + i]);
      gbias[co] += static_cast<T>(acc);
    }
  }
}

// Production float paths (OpenMP inside, deterministic for any thread count).
void conv2d_fast(const float* in, int c_in, int h, int w, const float* wgt,
                 int c_out, int k, const float* bias, bool same, float* out);
void conv2d_grad_input_fast(const float* gout, int c_out, const float* wgt,
                            int c_in, int h, int w, int k, bool same,
                            float* gin);
void conv2d_grad_weights_fast(const float* gout, int c_out, const float* in,
                              int c_in, int h, int w, int k, bool same,
                              float* gwgt, float* gbias);

// ---------------------------------------------------------------------------
// Separable blur with symmetric (mirror) padding. taps sum to 1 and are the
// 1-D factor of an isotropic kernel; the full 2-D blur is rows then columns.
// ---------------------------------------------------------------------------

template <typename T>
void blur_pass_rows_ref(const T* in, int h, int w, const double* taps, int kn,
                        T* out) {
  const int c = kn / 2;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = 0; t < kn; ++t)
        acc += taps[t] *
               static_cast<double>(in[static_cast<size_t>(y) * w +
                                      mirror_index(x + t - c, w)]);
      out[static_cast<size_t>(y) * w + x] = static_cast<T>(acc);
    }
  }
}

template <typename T>
void blur_pass_cols_ref(const T* in, int h, int w, const double* taps, int kn,
                        T* out) {
  const int c = kn / 2;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = 0; t < kn; ++t)
        acc += taps[t] *
               static_cast<double>(
                   in[static_cast<size_t>(mirror_index(y + t - c, h)) * w + x]);
      out[static_cast<size_t>(y) * w + x] = static_cast<T>(acc);
    }
  }
}

template <typename T>
void blur_plane_ref(const T* in, int h, int w, const double* taps, int kn,
                    T* out) {
  std::vector<T> tmp(static_cast<size_t>(h) * w);
  blur_pass_rows_ref(in, h, w, taps, kn, tmp.data());
  blur_pass_cols_ref(tmp.data(), h, w, taps, kn, out);
}

/// Adjoint of blur_plane (accumulates into gin).
template <typename T>
void blur_plane_adjoint_ref(const T* gout, int h, int w, const double* taps,
                            int kn, T* gin) {
  const int c = kn / 2;
  // Adjoint of the column pass.
  std::vector<double> gtmp(static_cast<size_t>(h) * w, 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double g = static_cast<double>(gout[static_cast<size_t>(y) * w + x]);
      for (int t = 0; t < kn; ++t)
        gtmp[static_cast<size_t>(mirror_index(y + t - c, h)) * w + x] +=
            taps[t] * g;
    }
  // Adjoint of the row pass.
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double g = gtmp[static_cast<size_t>(y) * w + x];
      if (g == 0.0) continue;
      for (int t = 0; t < kn; ++t)
        gin[static_cast<size_t>(y) * w + mirror_index(x + t - c, w)] +=
            static_cast<T>(taps[t] * g);
    }
}

void blur_plane_fast(const float* in, int h, int w, const float* taps, int kn,
                     float* out);
void blur_plane_adjoint_fast(const float* gout, int h, int w,
                             const float* taps, int kn, float* gin);

// ---------------------------------------------------------------------------
// Decimation (offset 0) and bicubic upsampling (a = -0.5, zero phase:
// out[r*i][r*j] == in[i][j] bit-exactly).
// ---------------------------------------------------------------------------

template <typename T>
void decimate_plane(const T* in, int h, int w, int r, T* out) {
  const int oh = h / r, ow = w / r;
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      out[static_cast<size_t>(y) * ow + x] =
          in[(static_cast<size_t>(y) * r) * w + static_cast<size_t>(x) * r];
}

template <typename T>
void decimate_plane_adjoint(const T* gout, int h, int w, int r, T* gin) {
  const int oh = h / r, ow = w / r;
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x)
      gin[(static_cast<size_t>(y) * r) * w + static_cast<size_t>(x) * r] +=
          gout[static_cast<size_t>(y) * ow + x];
}

/// Keys cubic kernel, a = -0.5.
inline double cubic_weight(double s) {
  s = s < 0 ? -s : s;
  if (s <= 1.0) return (1.5 * s - 2.5) * s * s + 1.0;
  if (s < 2.0) return ((-0.5 * s + 2.5) * s - 4.0) * s + 2.0;
  return 0.0;
}

/// Per-phase 4-tap weights over source offsets {-1, 0, 1, 2}; phase 0 is a
/// pure copy.
std::vector<std::array<double, 4>> cubic_phase_table(int r);

template <typename T>
void upsample_axis_ref(const T* in, int n, int stride_in, int count,
                       int stride_c_in, T* out, int stride_out,
                       int stride_c_out, int r,
                       const std::vector<std::array<double, 4>>& ph) {
  // Interpolates along one axis of length n (r*n outputs) for `count`
  // independent lines.
  for (int l = 0; l < count; ++l) {
    const T* src = in + static_cast<size_t>(l) * stride_c_in;
    T* dst = out + static_cast<size_t>(l) * stride_c_out;
    for (int o = 0; o < n * r; ++o) {
      const int q = o % r, i = o / r;
      if (q == 0) {
        dst[static_cast<size_t>(o) * stride_out] =
            src[static_cast<size_t>(i) * stride_in];
        continue;
      }
      double acc = 0.0;
      for (int j = 0; j < 4; ++j)
        acc += ph[q][j] * static_cast<double>(
                              src[static_cast<size_t>(
                                      mirror_index(i + j - 1, n)) *
                                  stride_in]);
      dst[static_cast<size_t>(o) * stride_out] = static_cast<T>(acc);
    }
  }
}

template <typename T>
void upsample_plane_ref(const T* in, int h, int w, int r, T* out) {
  const auto ph = cubic_phase_table(r);
  // Vertical pass to (h*r) x w, then horizontal to (h*r) x (w*r).
  std::vector<T> tmp(static_cast<size_t>(h) * r * w);
  upsample_axis_ref(in, h, w, w, 1, tmp.data(), w, 1, r, ph);
  upsample_axis_ref(tmp.data(), w, 1, h * r, w, out, 1,
                    static_cast<size_t>(w) * r, r, ph);
}

template <typename T>
void upsample_plane_adjoint_ref(const T* gout, int h, int w, int r, T* gin) {
  const auto ph = cubic_phase_table(r);
  const int H = h * r, W = w * r;
  // Adjoint of the horizontal pass: (H x W) -> (H x w).
  std::vector<double> gtmp(static_cast<size_t>(H) * w, 0.0);
  for (int y = 0; y < H; ++y) {
    for (int o = 0; o < W; ++o) {
      const double g = static_cast<double>(gout[static_cast<size_t>(y) * W + o]);
      if (g == 0.0) continue;
      const int q = o % r, i = o / r;
      if (q == 0) {
        gtmp[static_cast<size_t>(y) * w + i] += g;
      } else {
        for (int j = 0; j < 4; ++j)
          gtmp[static_cast<size_t>(y) * w + mirror_index(i + j - 1, w)] +=
              ph[q][j] * g;
      }
    }
  }
  // Adjoint of the vertical pass: (H x w) -> (h x w).
  for (int o = 0; o < H; ++o) {
    const int q = o % r, i = o / r;
    for (int x = 0; x < w; ++x) {
      const double g = gtmp[static_cast<size_t>(o) * w + x];
      if (g == 0.0) continue;
      if (q == 0) {
        gin[static_cast<size_t>(i) * w + x] += static_cast<T>(g);
      } else {
        for (int j = 0; j < 4; ++j)
          gin[static_cast<size_t>(mirror_index(i + j - 1, h)) * w + x] +=
              static_cast<T>(ph[q][j] * g);
      }
    }
  }
}

void upsample_plane_fast(const float* in, int h, int w, int r, float* out);

// ---------------------------------------------------------------------------
// Reductions.
// ---------------------------------------------------------------------------

/// Mean absolute difference, double accumulation.
double l1_mean(const float* a, const float* b, size_t n);
double l1_mean(const double* a, const double* b, size_t n);

} // namespace catfuse::kernels
