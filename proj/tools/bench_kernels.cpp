// Times the OpenMP kernels against their serial reference implementations,
// then measures full-pipeline worker scaling on a synthetic scene.

#include <chrono>
#include <cstdio>
#include <functional>
#include <vector>

#include "catfuse/backbone.hpp"
#include "catfuse/kernels.hpp"
#include "catfuse/pipeline.hpp"
#include "catfuse/resample.hpp"
#include "catfuse/rng.hpp"

using namespace catfuse;

namespace {

double best_of(int runs, const std::function<void()>& f) {
  double best = 1e300;
  for (int i = 0; i < runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double>(t1 - t0).count());
  }
  return best;
}

void row(const char* name, double ref_s, double fast_s) {
  std::printf("%-28s %10.4f ms %10.4f ms %8.2fx\n", name, ref_s * 1e3,
              fast_s * 1e3, ref_s / fast_s);
}

std::vector<float> randu(Rng& rng, size_t n) {
  std::vector<float> v(n);
  for (auto& x : v) x = float(rng.next_double());
  return v;
}

} // namespace

int main() {
  Rng rng(7);

  std::printf("%-28s %13s %13s %9s\n", "kernel", "serial ref", "openmp",
              "speedup");

  {  // conv2d: 32 -> 32 channels, 64x64, 3x3, same padding
    const int c = 32, h = 64, w = 64, k = 3;
    const auto x = randu(rng, size_t(c) * h * w);
    const auto wt = randu(rng, size_t(c) * c * k * k);
    const auto b = randu(rng, c);
    std::vector<float> out(size_t(c) * h * w);
    const double tr = best_of(3, [&] {
      kernels::conv2d_ref<float>(x.data(), c, h, w, wt.data(), c, k, b.data(),
                                 true, out.data());
    });
    const double tf = best_of(3, [&] {
      kernels::conv2d_fast(x.data(), c, h, w, wt.data(), c, k, b.data(), true,
                           out.data());
    });
    row("conv2d 32x64x64 k3", tr, tf);
  }

  {  // conv2d gradients, same geometry
    const int c = 32, h = 64, w = 64, k = 3;
    const auto x = randu(rng, size_t(c) * h * w);
    const auto wt = randu(rng, size_t(c) * c * k * k);
    const auto g = randu(rng, size_t(c) * h * w);
    std::vector<float> gx(size_t(c) * h * w), gw(wt.size()), gb(c);
    const double tr = best_of(3, [&] {
      std::fill(gx.begin(), gx.end(), 0.0f);
      kernels::conv2d_grad_input_ref<float>(g.data(), c, wt.data(), c, h, w,
                                            k, true, gx.data());
    });
    const double tf = best_of(3, [&] {
      std::fill(gx.begin(), gx.end(), 0.0f);
      kernels::conv2d_grad_input_fast(g.data(), c, wt.data(), c, h, w, k,
                                      true, gx.data());
    });
    row("conv2d grad-input", tr, tf);
    const double wr = best_of(3, [&] {
      std::fill(gw.begin(), gw.end(), 0.0f);
      std::fill(gb.begin(), gb.end(), 0.0f);
      kernels::conv2d_grad_weights_ref<float>(g.data(), c, x.data(), c, h, w,
                                              k, true, gw.data(), gb.data());
    });
    const double wf = best_of(3, [&] {
      std::fill(gw.begin(), gw.end(), 0.0f);
      std::fill(gb.begin(), gb.end(), 0.0f);
      kernels::conv2d_grad_weights_fast(g.data(), c, x.data(), c, h, w, k,
                                        true, gw.data(), gb.data());
    });
    row("conv2d grad-weights", wr, wf);
  }

  {  // separable blur, 41-tap, 256x256
    const int h = 256, w = 256;
    const MtfKernel kern = mtf_kernel(0.30, 4, 41);
    const auto x = randu(rng, size_t(h) * w);
    std::vector<float> out(size_t(h) * w);
    const double tr = best_of(3, [&] {
      kernels::blur_plane_ref<float>(x.data(), h, w, kern.taps.data(),
                                     int(kern.taps.size()), out.data());
    });
    const double tf = best_of(3, [&] {
      kernels::blur_plane_fast(x.data(), h, w, kern.taps_f.data(),
                               int(kern.taps_f.size()), out.data());
    });
    row("blur 256x256 k41", tr, tf);
  }

  {  // bicubic upsample x4, 64x64 -> 256x256
    const int h = 64, w = 64, r = 4;
    const auto x = randu(rng, size_t(h) * w);
    std::vector<float> out(size_t(h) * w * r * r);
    const double tr = best_of(3, [&] {
      kernels::upsample_plane_ref<float>(x.data(), h, w, r, out.data());
    });
    const double tf = best_of(3, [&] {
      kernels::upsample_plane_fast(x.data(), h, w, r, out.data());
    });
    row("upsample x4 64->256", tr, tf);
  }

  // Pipeline worker scaling: backbone-only inference over all patches.
  std::printf("\npipeline inference scaling (256x256 PAN, patch 64)\n");
  const SensorDescriptor sensor = SensorDescriptor::defaults(4, 4);
  const SceneBundle scene = synth_scene(11, sensor, 256, 256);
  BackboneConfig bcfg;
  Rng brng(3);
  Backbone bb = Backbone::init(bcfg, brng, false);
  const PatchGrid grid = partition(scene.lrms, scene.pan, 64);
  for (int workers : {1, 2, 4, 8}) {
    const double t = best_of(2, [&] {
      (void)infer_all(scene.lrms, scene.pan, grid, bb, nullptr, workers);
    });
    std::printf("  workers %d: %8.1f ms\n", workers, t * 1e3);
  }
  return 0;
}
