// Prints the pinned random streams and writes the golden tensors the unit
// tests compare against. Run manually from the repo root:
//   ./build/make_fixtures tests/fixtures
// The printed values are hard-coded in the tests; the tensors land in the
// fixture directory the tests read via CATFUSE_FIXTURE_DIR.

#include <cstdio>
#include <string>

#include "catfuse/autodiff.hpp"
#include "catfuse/backbone.hpp"
#include "catfuse/pipeline.hpp"
#include "catfuse/resample.hpp"
#include "catfuse/rng.hpp"
#include "catfuse/tensor_io.hpp"

using namespace catfuse;

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : "tests/fixtures";

  {
    Rng r(0);
    std::printf("rng(0) u64:\n");
    for (int i = 0; i < 8; ++i)
      std::printf("  0x%016llxULL,\n",
                  static_cast<unsigned long long>(r.next_u64()));
  }
  {
    Rng r(0);
    std::printf("rng(0) doubles:\n");
    for (int i = 0; i < 8; ++i) std::printf("  %.17g,\n", r.next_double());
  }
  {
    Rng root(0);
    Rng child = root.split(1);
    std::printf("rng(0).split(1) u64[0]: 0x%016llxULL\n",
                static_cast<unsigned long long>(child.next_u64()));
    Rng root2(0);
    Rng child2 = root2.split(2);
    std::printf("rng(0).split(2) u64[0]: 0x%016llxULL\n",
                static_cast<unsigned long long>(child2.next_u64()));
  }
  {
    PatchGrid g;
    g.patch_h = g.patch_w = 64;
    g.rows = g.cols = 8;
    g.ratio = 4;
    const auto sel = select_random(g, 8, 0);
    std::printf("select_random(n=8, N=64, seed=0): ");
    for (int id : sel) std::printf("%d, ", id);
    std::printf("\n");
  }
  {
    // Small deterministic backbone forward; pins both the latent features
    // and the fused output.
    SensorDescriptor s = SensorDescriptor::defaults(3, 2);
    s.kernel_size = 9;
    const SceneBundle scene = synth_scene(9, s, 16, 16);
    BackboneConfig bcfg;
    bcfg.latent = 8;
    bcfg.blocks = 1;
    bcfg.kernel = 3;
    bcfg.bands = 3;
    bcfg.ratio = 2;
    Rng rng(5);
    Backbone bb = Backbone::init(bcfg, rng, false);
    diff::Tape tape;
    const auto fwd =
        backbone_forward(tape, bb.params, bcfg,
                         diff::from_raster<float>(scene.lrms),
                         diff::from_raster<float>(scene.pan));
    const RasterTensor z = diff::to_raster(fwd.z->val);
    const RasterTensor xhat = diff::to_raster(fwd.xhat->val);
    io::tensor_write(z, dir + "/golden_z.catt");
    io::tensor_write(xhat, dir + "/golden_xhat.catt");
    double zsum = 0.0, xsum = 0.0;
    for (float v : z.data) zsum += v;
    for (float v : xhat.data) xsum += v;
    std::printf("golden_z %s sum %.17g\n", z.shape_str().c_str(), zsum);
    std::printf("golden_xhat %s sum %.17g\n", xhat.shape_str().c_str(), xsum);
    io::tensor_write(scene.lrms, dir + "/golden_lrms.catt");
    io::tensor_write(scene.pan, dir + "/golden_pan.catt");
  }
  std::printf("fixtures written to %s\n", dir.c_str());
  return 0;
}
