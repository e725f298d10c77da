#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "catfuse/pipeline.hpp"

using namespace catfuse;

namespace {

template <typename E, typename F>
std::string error_message(F&& f) {
  try {
    f();
  } catch (const E& e) {
    return e.what();
  }
  return "";
}

SensorDescriptor small_sensor() {
  SensorDescriptor s = SensorDescriptor::defaults(3, 2);
  s.kernel_size = 9;
  return s;
}

BackboneConfig small_backbone() {
  BackboneConfig cfg;
  cfg.latent = 8;
  cfg.blocks = 1;
  cfg.kernel = 3;
  cfg.bands = 3;
  cfg.ratio = 2;
  return cfg;
}

RasterTensor random_raster(Rng& rng, int c, int h, int w) {
  RasterTensor t(c, h, w);
  for (auto& v : t.data) v = float(rng.next_double());
  return t;
}

bool same_bytes(const RasterTensor& a, const RasterTensor& b) {
  if (!a.same_shape(b)) return false;
  for (size_t i = 0; i < a.data.size(); ++i)
    if (a.data[i] != b.data[i]) return false;
  return true;
}

} // namespace

TEST_CASE("partitioning a 512x512 scene into 64-pixel patches yields 64") {
  Rng rng(1);
  const RasterTensor y = random_raster(rng, 3, 128, 128);
  const RasterTensor p = random_raster(rng, 1, 512, 512);
  const PatchGrid g = partition(y, p, 64);
  CHECK(g.rows == 8);
  CHECK(g.cols == 8);
  CHECK(g.count() == 64);
  CHECK(g.ratio == 4);
  CHECK(g.patch_h == 64);
  CHECK(g.coords(0) == std::pair<int, int>{0, 0});
  CHECK(g.coords(9) == std::pair<int, int>{1, 1});
  CHECK(g.coords(63) == std::pair<int, int>{7, 7});
  CHECK_THROWS_AS(g.coords(64), ValidationError);
  CHECK_THROWS_AS(g.coords(-1), ValidationError);
}

TEST_CASE("grid arithmetic covers large scenes without materializing them") {
  PatchGrid g;
  g.patch_h = g.patch_w = 100;
  g.rows = g.cols = 40;
  g.ratio = 4;
  CHECK(g.count() == 1600);
  CHECK(g.coords(1599) == std::pair<int, int>{39, 39});
}

TEST_CASE("partition validation rejects malformed geometry") {
  Rng rng(2);
  const RasterTensor y = random_raster(rng, 3, 16, 16);
  CHECK(error_message<ValidationError>([&] {
          partition(y, random_raster(rng, 2, 32, 32), 16);
        }).find("1 band") != std::string::npos);
  CHECK(error_message<ValidationError>([&] {
          partition(y, random_raster(rng, 1, 33, 32), 16);
        }).find("integer multiple") != std::string::npos);
  CHECK(error_message<ValidationError>([&] {
          partition(y, random_raster(rng, 1, 32, 64), 16);
        }).find("same integer") != std::string::npos);
  CHECK(error_message<ValidationError>([&] {
          partition(y, random_raster(rng, 1, 32, 32), 15);
        }).find("multiple of the scale") != std::string::npos);
  CHECK(error_message<ValidationError>([&] {
          partition(y, random_raster(rng, 1, 32, 32), 12);
        }).find("pad or crop") != std::string::npos);
}

TEST_CASE("stitching the patches reassembles the source exactly") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int r = (trial % 2 == 0) ? 2 : 4;
    const int rows = 1 + int(rng.next_below(4));
    const int cols = 1 + int(rng.next_below(4));
    const int k = 1 + int(rng.next_below(3));
    const int patch = r * k * 2;
    const int c = 1 + int(rng.next_below(4));
    const int ph = rows * patch, pw = cols * patch;
    const RasterTensor y = random_raster(rng, c, ph / r, pw / r);
    const RasterTensor p = random_raster(rng, 1, ph, pw);
    const PatchGrid g = partition(y, p, patch);
    REQUIRE(g.rows == rows);
    REQUIRE(g.cols == cols);

    std::vector<RasterTensor> pan_patches, lrms_patches;
    for (int id = 0; id < g.count(); ++id) {
      auto [yp, pp] = patch_at(y, p, g, id);
      lrms_patches.push_back(std::move(yp));
      pan_patches.push_back(std::move(pp));
    }
    CHECK(same_bytes(stitch(pan_patches, g), p));
    PatchGrid lg = g;
    lg.patch_h = g.patch_h / r;
    lg.patch_w = g.patch_w / r;
    CHECK(same_bytes(stitch(lrms_patches, lg), y));
  }
}

TEST_CASE("patch extraction reads the expected source window") {
  RasterTensor y(1, 8, 8);
  RasterTensor p(1, 16, 16);
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) y.data[size_t(i) * 8 + j] = float(i * 100 + j);
  for (int i = 0; i < 16; ++i)
    for (int j = 0; j < 16; ++j)
      p.data[size_t(i) * 16 + j] = float(i * 1000 + j);
  const PatchGrid g = partition(y, p, 8);  // 2x2 grid, ratio 2
  const auto [yp, pp] = patch_at(y, p, g, 3);  // row 1, col 1
  CHECK(yp.height == 4);
  CHECK(pp.height == 8);
  CHECK(pp.data[0] == 8000.0f + 8.0f);   // PAN (8, 8)
  CHECK(yp.data[0] == 400.0f + 4.0f);    // LRMS (4, 4)
  CHECK(pp.data[size_t(7) * 8 + 7] == 15000.0f + 15.0f);
}

TEST_CASE("random selection is pinned, distinct, and validated") {
  PatchGrid g;
  g.patch_h = g.patch_w = 64;
  g.rows = g.cols = 8;
  g.ratio = 4;
  const std::vector<int> picked = select_random(g, 8, 0);
  CHECK(picked == std::vector<int>{47, 37, 35, 31, 11, 8, 53, 30});

  const std::vector<int> all = select_random(g, 64, 0);
  std::set<int> seen(all.begin(), all.end());
  CHECK(seen.size() == 64);
  CHECK(*seen.begin() == 0);
  CHECK(*seen.rbegin() == 63);

  CHECK(select_random(g, 8, 0) == picked);
  CHECK(select_random(g, 8, 1) != picked);
  CHECK_THROWS_AS(select_random(g, 0, 0), ValidationError);
  CHECK(error_message<ValidationError>([&] {
          select_random(g, 65, 0);
        }).find("[1, 64]") != std::string::npos);
}

TEST_CASE("stitch validates the patch list against the grid") {
  Rng rng(4);
  const RasterTensor y = random_raster(rng, 2, 8, 8);
  const RasterTensor p = random_raster(rng, 1, 16, 16);
  const PatchGrid g = partition(y, p, 8);
  std::vector<RasterTensor> patches;
  for (int id = 0; id < g.count(); ++id)
    patches.push_back(patch_at(y, p, g, id).second);
  patches.pop_back();
  CHECK(error_message<ValidationError>([&] {
          stitch(patches, g);
        }).find("expected 4 patches") != std::string::npos);
  patches.push_back(RasterTensor(1, 4, 8));
  CHECK(error_message<ValidationError>([&] {
          stitch(patches, g);
        }).find("patch 3") != std::string::npos);
}

TEST_CASE("patch inference is bit-identical for any worker count") {
  const SensorDescriptor s = small_sensor();
  const BackboneConfig bcfg = small_backbone();
  Rng brng(11);
  Backbone bb = Backbone::init(bcfg, brng, false);
  Rng crng(12);
  CatParams phi = CatParams::init(bcfg.latent, crng);
  const SceneBundle sc = synth_scene(13, s, 32, 32);
  const PatchGrid g = partition(sc.lrms, sc.pan, 16);
  REQUIRE(g.count() == 4);

  const auto base = infer_all(sc.lrms, sc.pan, g, bb, &phi, 1);
  for (int workers : {2, 4, 8}) {
    const auto got = infer_all(sc.lrms, sc.pan, g, bb, &phi, workers);
    REQUIRE(got.size() == base.size());
    for (size_t i = 0; i < base.size(); ++i)
      CHECK(same_bytes(got[i], base[i]));
  }

  // A fresh adapter is the identity, so running without one matches.
  const auto plain = infer_all(sc.lrms, sc.pan, g, bb, nullptr, 2);
  for (size_t i = 0; i < base.size(); ++i)
    CHECK(same_bytes(plain[i], base[i]));

  CHECK_THROWS_AS(infer_all(sc.lrms, sc.pan, g, bb, &phi, 0),
                  ValidationError);
}

TEST_CASE("per-patch failures are aggregated into one error") {
  const SensorDescriptor s = small_sensor();
  const BackboneConfig bcfg = small_backbone();
  Rng brng(14);
  Backbone bb = Backbone::init(bcfg, brng, false);
  Rng crng(15);
  CatParams wrong = CatParams::init(16, crng);  // latent mismatch: 16 vs 8
  const SceneBundle sc = synth_scene(16, s, 32, 32);
  const PatchGrid g = partition(sc.lrms, sc.pan, 16);
  const std::string msg = error_message<ValidationError>(
      [&] { infer_all(sc.lrms, sc.pan, g, bb, &wrong, 2); });
  CHECK(msg.find("4 patch(es) failed") != std::string::npos);
  CHECK(msg.find("patch 0") != std::string::npos);
  CHECK(msg.find("latent channel count") != std::string::npos);
}

TEST_CASE("the full pipeline reports geometry, trace, and timings") {
  const SensorDescriptor s = small_sensor();
  const BackboneConfig bcfg = small_backbone();
  Rng brng(17);
  Backbone bb = Backbone::init(bcfg, brng, false);
  const SceneBundle sc = synth_scene(18, s, 32, 32);
  AdaptConfig cfg;
  cfg.patch_size = 16;
  cfg.n_patches = 2;
  cfg.epochs = 2;
  cfg.seed = 3;
  const PipelineResult res = run_pipeline(sc.lrms, sc.pan, bb, s, cfg, 1);
  CHECK(res.fused.channels == 3);
  CHECK(res.fused.height == 32);
  CHECK(res.fused.width == 32);
  CHECK(res.total_patches == 4);
  CHECK(res.selected.size() == 2);
  CHECK(res.trace.size() == size_t(2 * 2));
  CHECK(res.adapt_seconds >= 0.0);
  CHECK(res.infer_seconds >= 0.0);
  CHECK(res.total_seconds >= res.adapt_seconds + res.infer_seconds - 1e-9);
  for (float v : res.fused.data) CHECK(std::isfinite(v));
}

TEST_CASE("skipping adaptation matches running it for zero epochs") {
  const SensorDescriptor s = small_sensor();
  const BackboneConfig bcfg = small_backbone();
  Rng brng(19);
  Backbone bb = Backbone::init(bcfg, brng, false);
  const SceneBundle sc = synth_scene(20, s, 32, 32);
  AdaptConfig cfg;
  cfg.patch_size = 16;
  cfg.n_patches = 2;
  cfg.epochs = 0;
  const PipelineResult with_identity =
      run_pipeline(sc.lrms, sc.pan, bb, s, cfg, 1, /*use_cat=*/true);
  const PipelineResult without =
      run_pipeline(sc.lrms, sc.pan, bb, s, cfg, 1, /*use_cat=*/false);
  CHECK(same_bytes(with_identity.fused, without.fused));
  CHECK(without.selected.empty());
  CHECK(without.trace.empty());
}

TEST_CASE("pipeline failures carry their stage label") {
  const SensorDescriptor s = small_sensor();
  const BackboneConfig bcfg = small_backbone();
  Rng brng(21);
  Backbone bb = Backbone::init(bcfg, brng, false);
  const SceneBundle sc = synth_scene(22, s, 32, 32);
  AdaptConfig cfg;
  cfg.patch_size = 12;  // 32 % 12 != 0
  CHECK(error_message<ValidationError>([&] {
          run_pipeline(sc.lrms, sc.pan, bb, s, cfg, 1);
        }).find("partition stage:") != std::string::npos);

  cfg.patch_size = 16;
  cfg.n_patches = 100;  // only 4 available
  CHECK(error_message<ValidationError>([&] {
          run_pipeline(sc.lrms, sc.pan, bb, s, cfg, 1);
        }).find("select stage:") != std::string::npos);

  // Sensor/scene scale disagreement is caught before any heavy work.
  SensorDescriptor wrong = s;
  wrong.ratio = 4;
  cfg.n_patches = 2;
  CHECK(error_message<ValidationError>([&] {
          run_pipeline(sc.lrms, sc.pan, bb, wrong, cfg, 1);
        }).find("sensor ratio") != std::string::npos);
}
