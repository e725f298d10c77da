#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "catfuse/autodiff.hpp"
#include "catfuse/rng.hpp"
#include "catfuse/tensor_io.hpp"

using namespace catfuse;
namespace fs = std::filesystem;

using DTape = diff::TapeT<double>;
using DNode = diff::NodeT<double>;
using DArray = diff::ArrayT<double>;
using DStore = diff::ParamStoreT<double>;

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

DArray random_array(Rng& rng, std::vector<int> shape, double lo, double hi) {
  DArray a(std::move(shape));
  for (auto& v : a.v) v = lo + (hi - lo) * rng.next_double();
  return a;
}

/// Checks the analytic gradient of a scalar-valued graph against central
/// finite differences taken over every element of one designated input.
template <typename Build>
void check_param_gradient(const std::vector<int>& shape, uint64_t seed,
                          double lo, double hi, Build build,
                          double h = 1e-5, double tol = 1e-6) {
  Rng rng(seed);
  const DArray x = random_array(rng, shape, lo, hi);
  DStore store;
  diff::ParamT<double>* p = store.add("x", shape, true);
  p->value = x.v;
  DTape tape;
  DNode* loss = build(tape, tape.param(*p));
  REQUIRE(loss->val.size() == 1);
  store.zero_grads();
  tape.backward(loss);

  auto eval = [&](const std::vector<double>& vals) {
    DArray xa(shape);
    xa.v = vals;
    DTape t2;
    return build(t2, t2.input(xa))->val.v[0];
  };
  for (size_t i = 0; i < x.v.size(); ++i) {
    auto plus = x.v;
    plus[i] += h;
    auto minus = x.v;
    minus[i] -= h;
    const double numeric = (eval(plus) - eval(minus)) / (2.0 * h);
    const double analytic = p->grad[i];
    const double scale =
        std::max({1.0, std::abs(numeric), std::abs(analytic)});
    CHECK(std::abs(numeric - analytic) <= tol * scale);
  }
}

fs::path temp_file(const std::string& name) {
  return fs::temp_directory_path() / ("catfuse_diff_" + name);
}

} // namespace

TEST_CASE("array and raster views round-trip") {
  RasterTensor t(2, 3, 4);
  for (size_t i = 0; i < t.data.size(); ++i) t.data[i] = float(i) * 0.25f;
  const auto a = diff::from_raster<float>(t);
  REQUIRE(a.shape == std::vector<int>{2, 3, 4});
  const RasterTensor back = diff::to_raster(a);
  for (size_t i = 0; i < t.data.size(); ++i) CHECK(back.data[i] == t.data[i]);
}

TEST_CASE("convolution forward matches the 18-term hand sum") {
  // Two 3x3 input channels of ones, all-ones 3x3 weights, valid padding:
  // each output element accumulates 18 products plus the bias.
  DTape tape;
  DArray x({2, 3, 3}, 1.0);
  DArray w({1, 2, 3, 3}, 1.0);
  DArray b({1}, 0.25);
  DNode* out = tape.conv2d(tape.input(x), tape.input(w), tape.input(b), false);
  REQUIRE(out->val.shape == std::vector<int>{1, 1, 1});
  CHECK(out->val.v[0] == doctest::Approx(18.25).epsilon(1e-14));
}

TEST_CASE("convolution input gradient passes finite differences") {
  Rng rng(1);
  const DArray w = random_array(rng, {3, 2, 3, 3}, -1.0, 1.0);
  const DArray b = random_array(rng, {3}, -0.5, 0.5);
  const DArray g = random_array(rng, {3, 6, 6}, -1.0, 1.0);
  check_param_gradient({2, 6, 6}, 2, -1.0, 1.0, [&](DTape& t, DNode* x) {
    return t.inner(t.conv2d(x, t.input(w), t.input(b), true), t.input(g));
  });
}

TEST_CASE("convolution weight and bias gradients pass finite differences") {
  Rng rng(3);
  const DArray x = random_array(rng, {2, 6, 6}, -1.0, 1.0);
  const DArray b = random_array(rng, {3}, -0.5, 0.5);
  const DArray g = random_array(rng, {3, 6, 6}, -1.0, 1.0);
  check_param_gradient({3, 2, 3, 3}, 4, -1.0, 1.0, [&](DTape& t, DNode* w) {
    return t.inner(t.conv2d(t.input(x), w, t.input(b), true), t.input(g));
  });
  const DArray w = random_array(rng, {3, 2, 3, 3}, -1.0, 1.0);
  check_param_gradient({3}, 5, -0.5, 0.5, [&](DTape& t, DNode* bias) {
    return t.inner(t.conv2d(t.input(x), t.input(w), bias, true), t.input(g));
  });
}

TEST_CASE("rectifier gradient passes finite differences away from zero") {
  Rng rng(6);
  const DArray g = random_array(rng, {1, 4, 4}, -1.0, 1.0);
  check_param_gradient({1, 4, 4}, 7, 0.1, 1.0, [&](DTape& t, DNode* x) {
    return t.inner(t.relu(x), t.input(g));
  });
  check_param_gradient({1, 4, 4}, 8, -1.0, -0.1, [&](DTape& t, DNode* x) {
    return t.inner(t.relu(x), t.input(g));
  });
}

TEST_CASE("elementwise arithmetic gradients pass finite differences") {
  Rng rng(9);
  const DArray other = random_array(rng, {2, 3, 3}, 0.5, 1.5);
  const DArray g = random_array(rng, {2, 3, 3}, -1.0, 1.0);
  check_param_gradient({2, 3, 3}, 10, -1.0, 1.0, [&](DTape& t, DNode* x) {
    return t.inner(t.add(x, t.input(other)), t.input(g));
  });
  check_param_gradient({2, 3, 3}, 11, -1.0, 1.0, [&](DTape& t, DNode* x) {
    return t.inner(t.sub(x, t.input(other)), t.input(g));
  });
  check_param_gradient({2, 3, 3}, 12, -1.0, 1.0, [&](DTape& t, DNode* x) {
    return t.inner(t.mul(x, t.input(other)), t.input(g));
  });
  // Numerator and denominator sides of the division.
  check_param_gradient({2, 3, 3}, 13, -1.0, 1.0, [&](DTape& t, DNode* x) {
    return t.inner(t.div(x, t.input(other)), t.input(g));
  });
  const DArray numer = random_array(rng, {2, 3, 3}, -1.0, 1.0);
  check_param_gradient({2, 3, 3}, 14, 0.5, 1.5, [&](DTape& t, DNode* x) {
    return t.inner(t.div(t.input(numer), x), t.input(g));
  });
  check_param_gradient({2, 3, 3}, 15, -1.0, 1.0, [&](DTape& t, DNode* x) {
    return t.inner(t.add_scalar(t.scale(x, -0.75), 0.3), t.input(g));
  });
}

TEST_CASE("blur, decimate, and upsample gradients pass finite differences") {
  Rng rng(16);
  const std::vector<std::vector<double>> taps = {{0.25, 0.5, 0.25}};
  const DArray g_same = random_array(rng, {2, 6, 6}, -1.0, 1.0);
  check_param_gradient({2, 6, 6}, 17, -1.0, 1.0, [&](DTape& t, DNode* x) {
    return t.inner(t.blur(x, taps), t.input(g_same));
  });
  // Per-band kernels exercise the multi-kernel path.
  const std::vector<std::vector<double>> taps2 = {{0.25, 0.5, 0.25},
                                                  {0.1, 0.8, 0.1}};
  check_param_gradient({2, 6, 6}, 18, -1.0, 1.0, [&](DTape& t, DNode* x) {
    return t.inner(t.blur(x, taps2), t.input(g_same));
  });
  const DArray g_dec = random_array(rng, {2, 3, 3}, -1.0, 1.0);
  check_param_gradient({2, 6, 6}, 19, -1.0, 1.0, [&](DTape& t, DNode* x) {
    return t.inner(t.decimate(x, 2), t.input(g_dec));
  });
  const DArray g_up = random_array(rng, {1, 8, 8}, -1.0, 1.0);
  check_param_gradient({1, 4, 4}, 20, -1.0, 1.0, [&](DTape& t, DNode* x) {
    return t.inner(t.upsample(x, 2), t.input(g_up));
  });
}

TEST_CASE("mean absolute loss value and gradients match the closed form") {
  DTape tape;
  DArray a({1, 1, 2});
  a.v = {0.0, 1.0};
  DArray b({1, 1, 2});
  b.v = {1.0, 3.0};
  DStore store;
  auto* pa = store.add("a", {1, 1, 2}, true);
  pa->value = a.v;
  DNode* loss = tape.l1(tape.param(*pa), tape.input(b));
  CHECK(loss->val.v[0] == doctest::Approx(1.5).epsilon(1e-15));
  store.zero_grads();
  tape.backward(loss);
  // d/da mean|a-b| = sign(a-b)/n; both elements sit below b.
  CHECK(pa->grad[0] == doctest::Approx(-0.5).epsilon(1e-15));
  CHECK(pa->grad[1] == doctest::Approx(-0.5).epsilon(1e-15));
}

TEST_CASE("mean absolute loss gradient passes finite differences") {
  Rng rng(21);
  const DArray target = random_array(rng, {2, 4, 4}, 0.6, 1.0);
  check_param_gradient({2, 4, 4}, 22, 0.0, 0.4, [&](DTape& t, DNode* x) {
    return t.l1(x, t.input(target));
  });
}

TEST_CASE("weighted sums combine scalars with their weights") {
  DTape tape;
  DArray a({1}, 2.0), b({1}, 3.0);
  DStore store;
  auto* pa = store.add("a", {1}, true);
  pa->value = a.v;
  auto* pb = store.add("b", {1}, true);
  pb->value = b.v;
  DNode* total =
      tape.weighted_sum({tape.param(*pa), tape.param(*pb)}, {0.5, 2.0});
  CHECK(total->val.v[0] == doctest::Approx(7.0).epsilon(1e-15));
  store.zero_grads();
  tape.backward(total);
  CHECK(pa->grad[0] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(pb->grad[0] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("fan-out accumulates gradients additively") {
  DTape tape;
  DArray x({1, 1, 2});
  x.v = {0.5, -0.25};
  DStore store;
  auto* p = store.add("x", {1, 1, 2}, true);
  p->value = x.v;
  DNode* xn = tape.param(*p);
  DArray ones({1, 1, 2}, 1.0);
  DNode* loss = tape.inner(tape.add(xn, xn), tape.input(ones));
  store.zero_grads();
  tape.backward(loss);
  CHECK(p->grad[0] == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(p->grad[1] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("frozen parameters pass gradients through but receive none") {
  diff::ParamStore store;  // float engine: the production path
  auto* w = store.add("w", {1, 1, 3, 3}, false);
  for (auto& v : w->value) v = 0.1f;
  auto* x = store.add("x", {1, 4, 4}, true);
  for (size_t i = 0; i < x->value.size(); ++i) x->value[i] = float(i) * 0.1f;
  auto* b = store.add("b", {1}, false);

  diff::Tape tape;
  diff::Array g({1, 4, 4}, 1.0f);
  diff::Node* out = tape.conv2d(tape.param(*x), tape.param(*w),
                                tape.param(*b), true);
  diff::Node* loss = tape.inner(out, tape.input(g));
  store.zero_grads();
  tape.backward(loss);
  for (float gv : w->grad) CHECK(gv == 0.0f);
  for (float gv : b->grad) CHECK(gv == 0.0f);
  bool any = false;
  for (float gv : x->grad)
    if (gv != 0.0f) any = true;
  CHECK(any);
}

TEST_CASE("backward runs are deterministic") {
  auto run = [](std::vector<float>& grads) {
    diff::ParamStore store;
    auto* w = store.add("w", {2, 2, 3, 3}, true);
    Rng rng(33);
    for (auto& v : w->value) v = float(rng.next_double() - 0.5);
    diff::Array x({2, 5, 5});
    for (auto& v : x.v) v = float(rng.next_double());
    auto* b = store.add("b", {2}, true);
    diff::Tape tape;
    diff::Array g({2, 5, 5}, 1.0f);
    diff::Node* loss = tape.inner(
        tape.relu(tape.conv2d(tape.input(x), tape.param(*w), tape.param(*b),
                              true)),
        tape.input(g));
    store.zero_grads();
    tape.backward(loss);
    grads = w->grad;
  };
  std::vector<float> g1, g2;
  run(g1);
  run(g2);
  REQUIRE(g1.size() == g2.size());
  for (size_t i = 0; i < g1.size(); ++i) CHECK(g1[i] == g2[i]);
}

TEST_CASE("optimizer first step moves weights by nearly the learning rate") {
  DStore store;
  auto* p = store.add("w", {4}, true);
  p->value = {0.5, -0.25, 1.0, 0.0};
  p->grad = {0.3, -0.8, 0.001, 0.0};
  const std::vector<double> before = p->value;
  diff::AdamConfig cfg;
  cfg.lr = 1e-3;
  cfg.weight_decay = 0.0;
  diff::AdamT<double> opt(cfg);
  opt.step(store);
  for (size_t i = 0; i < 3; ++i) {
    const double delta = std::abs(p->value[i] - before[i]);
    CHECK(delta <= cfg.lr * (1.0 + 1e-12));
    CHECK(delta >= cfg.lr * 0.99);
    // Sign: the step opposes the gradient.
    CHECK((p->value[i] - before[i]) * p->grad[i] < 0.0);
  }
  CHECK(p->value[3] == before[3]);  // zero gradient, zero weight decay
}

TEST_CASE("optimizer two-step trajectory matches the hand-rolled recurrence") {
  DStore store;
  auto* p = store.add("w", {1}, true);
  p->value = {0.5};
  diff::AdamConfig cfg;
  cfg.lr = 0.01;
  cfg.weight_decay = 0.1;
  diff::AdamT<double> opt(cfg);

  // Independent scalar implementation of the same update rule.
  double w = 0.5, m = 0.0, v = 0.0;
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const double grads[2] = {0.3, -0.2};
  for (int t = 1; t <= 2; ++t) {
    const double g = grads[t - 1];
    w -= cfg.lr * cfg.weight_decay * w;  // decoupled decay first
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    const double mhat = m / (1.0 - std::pow(b1, t));
    const double vhat = v / (1.0 - std::pow(b2, t));
    w -= cfg.lr * mhat / (std::sqrt(vhat) + eps);

    p->grad = {g};
    opt.step(store);
    CHECK(p->value[0] == doctest::Approx(w).epsilon(1e-14));
  }
}

TEST_CASE("weight decay alone shrinks weights geometrically") {
  DStore store;
  auto* p = store.add("w", {1}, true);
  p->value = {2.0};
  p->grad = {0.0};
  diff::AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.weight_decay = 0.5;
  diff::AdamT<double> opt(cfg);
  opt.step(store);
  CHECK(p->value[0] == doctest::Approx(2.0 * 0.95).epsilon(1e-14));
  opt.step(store);
  CHECK(p->value[0] == doctest::Approx(2.0 * 0.95 * 0.95).epsilon(1e-14));
}

TEST_CASE("optimizer skips non-trainable parameters") {
  DStore store;
  auto* frozen = store.add("frozen", {2}, false);
  frozen->value = {1.0, -1.0};
  frozen->grad = {5.0, 5.0};
  diff::AdamConfig cfg;
  cfg.lr = 0.1;
  diff::AdamT<double> opt(cfg);
  opt.step(store);
  CHECK(frozen->value[0] == 1.0);
  CHECK(frozen->value[1] == -1.0);
}

TEST_CASE("parameter stores reject duplicate names") {
  DStore store;
  store.add("a", {1}, true);
  CHECK_THROWS_AS(store.add("a", {2}, true), ValidationError);
}

TEST_CASE("weight files round-trip bit-exactly and order-independently") {
  const auto path = temp_file("roundtrip.catw");
  diff::ParamStore a;
  Rng rng(44);
  auto* w1 = a.add("net/conv1/w", {2, 2, 3, 3}, true);
  for (auto& v : w1->value) v = float(rng.next_double() - 0.5);
  auto* b1 = a.add("net/conv1/b", {2}, true);
  for (auto& v : b1->value) v = float(rng.next_double());
  diff::save_params(a, path.string());

  diff::ParamStore b;
  // Reversed creation order; the file is sorted by name, so loading works
  // and re-saving reproduces the same bytes.
  b.add("net/conv1/b", {2}, true);
  b.add("net/conv1/w", {2, 2, 3, 3}, true);
  diff::load_params(b, path.string());
  for (size_t i = 0; i < w1->value.size(); ++i)
    CHECK(b.find("net/conv1/w")->value[i] == w1->value[i]);
  for (size_t i = 0; i < b1->value.size(); ++i)
    CHECK(b.find("net/conv1/b")->value[i] == b1->value[i]);

  const auto path2 = temp_file("roundtrip2.catw");
  diff::save_params(b, path2.string());
  const auto bytes1 = io::read_file_bytes(path.string());
  const auto bytes2 = io::read_file_bytes(path2.string());
  REQUIRE(bytes1.size() == bytes2.size());
  for (size_t i = 0; i < bytes1.size(); ++i) CHECK(bytes1[i] == bytes2[i]);
  fs::remove(path);
  fs::remove(path2);
}

TEST_CASE("weight loading errors name the offending tensor") {
  const auto path = temp_file("mismatch.catw");
  diff::ParamStore a;
  a.add("net/w", {1, 1, 3, 3}, true);
  diff::save_params(a, path.string());

  diff::ParamStore wrong_shape;
  wrong_shape.add("net/w", {1, 1, 5, 5}, true);
  CHECK(error_message<ValidationError>([&] {
          diff::load_params(wrong_shape, path.string());
        }).find("net/w") != std::string::npos);

  diff::ParamStore unknown;
  unknown.add("net/other", {1, 1, 3, 3}, true);
  const std::string msg = error_message<ValidationError>(
      [&] { diff::load_params(unknown, path.string()); });
  CHECK(msg.find("net/") != std::string::npos);
  fs::remove(path);
}

TEST_CASE("weight files reject non-finite values on save") {
  const auto path = temp_file("nan.catw");
  diff::ParamStore a;
  auto* w = a.add("net/w", {2}, true);
  w->value[1] = std::nanf("");
  fs::remove(path);
  CHECK_THROWS_AS(diff::save_params(a, path.string()), ValidationError);
  CHECK(!fs::exists(path));
}

TEST_CASE("float graph agrees with the double graph on shared inputs") {
  Rng rng(55);
  diff::Array xf({2, 6, 6});
  DArray xd({2, 6, 6});
  for (size_t i = 0; i < xf.v.size(); ++i) {
    const double v = rng.next_double();
    xf.v[i] = float(v);
    xd.v[i] = double(float(v));
  }
  diff::Array wf({2, 2, 3, 3});
  DArray wd({2, 2, 3, 3});
  for (size_t i = 0; i < wf.v.size(); ++i) {
    const double v = rng.next_double() - 0.5;
    wf.v[i] = float(v);
    wd.v[i] = double(float(v));
  }
  diff::Array bf({2});
  DArray bd({2});

  diff::Tape tf;
  diff::Node* of = tf.relu(
      tf.conv2d(tf.input(xf), tf.input(wf), tf.input(bf), true));
  DTape td;
  DNode* od = td.relu(
      td.conv2d(td.input(xd), td.input(wd), td.input(bd), true));
  REQUIRE(of->val.size() == od->val.size());
  for (size_t i = 0; i < of->val.size(); ++i)
    CHECK(double(of->val.v[i]) ==
          doctest::Approx(od->val.v[i]).epsilon(1e-4));
}
