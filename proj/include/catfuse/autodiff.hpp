#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <type_traits>
#include <vector>

#include "catfuse/kernels.hpp"
#include "catfuse/tensor.hpp"

namespace catfuse::diff {

// Reverse-mode differentiation over the closed op set this model needs:
// conv2d, relu, elementwise add/sub/mul/div, scalar scale/shift, fixed-kernel
// blur, decimate, upsample, inner product, and mean-L1. Templated on the
// scalar so the float production engine and the double oracle engine used by
// the finite-difference tests run the same code; float ops dispatch to the
// OpenMP kernels, every other scalar to the serial reference kernels.

template <typename T>
struct ArrayT {
  std::vector<int> shape;  // rank <= 4
  std::vector<T> v;

  ArrayT() = default;
  explicit ArrayT(std::vector<int> s, T fill = T(0)) : shape(std::move(s)) {
    v.assign(count(shape), fill);
  }
  size_t size() const { return v.size(); }

  static size_t count(const std::vector<int>& s) {
    size_t n = 1;
    for (int d : s) {
      if (d <= 0) throw ValidationError("array dims must be positive");
      n *= static_cast<size_t>(d);
    }
    return s.empty() ? 0 : n;
  }
};

template <typename T>
ArrayT<T> from_raster(const RasterTensor& t) {
  ArrayT<T> a({t.channels, t.height, t.width});
  for (size_t i = 0; i < a.v.size(); ++i) a.v[i] = static_cast<T>(t.data[i]);
  return a;
}

template <typename T>
RasterTensor to_raster(const ArrayT<T>& a) {
  if (a.shape.size() != 3)
    throw ValidationError("to_raster: rank-3 array required");
  RasterTensor t(a.shape[0], a.shape[1], a.shape[2]);
  for (size_t i = 0; i < a.v.size(); ++i)
    t.data[i] = static_cast<float>(a.v[i]);
  return t;
}

// ---------------------------------------------------------------------------
// Parameters and optimizer.
// ---------------------------------------------------------------------------

template <typename T>
struct ParamT {
  std::string name;
  std::vector<int> shape;
  std::vector<T> value;
  std::vector<T> grad;
  bool trainable = true;
  // Adam moments, kept in double regardless of T.
  std::vector<double> m, vmom;
};

template <typename T>
class ParamStoreT {
 public:
  ParamT<T>* add(const std::string& name, std::vector<int> shape,
                 bool trainable) {
    if (find(name)) throw ValidationError("duplicate parameter name: " + name);
    auto p = std::make_unique<ParamT<T>>();
    p->name = name;
    p->shape = std::move(shape);
    p->value.assign(ArrayT<T>::count(p->shape), T(0));
    p->grad.assign(p->value.size(), T(0));
    p->trainable = trainable;
    items_.push_back(std::move(p));
    return items_.back().get();
  }

  ParamT<T>* find(const std::string& name) {
    for (auto& p : items_)
      if (p->name == name) return p.get();
    return nullptr;
  }
  const ParamT<T>* find(const std::string& name) const {
    for (auto& p : items_)
      if (p->name == name) return p.get();
    return nullptr;
  }

  void zero_grads() {
    for (auto& p : items_) std::fill(p->grad.begin(), p->grad.end(), T(0));
  }

  std::vector<ParamT<T>*> all() {
    std::vector<ParamT<T>*> out;
    for (auto& p : items_) out.push_back(p.get());
    return out;
  }
  std::vector<const ParamT<T>*> all() const {
    std::vector<const ParamT<T>*> out;
    for (auto& p : items_) out.push_back(p.get());
    return out;
  }

 private:
  std::vector<std::unique_ptr<ParamT<T>>> items_;
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// Decoupled weight decay (param -= lr*wd*param) followed by the
/// bias-corrected Adam update; all per-element arithmetic in double.
template <typename T>
class AdamT {
 public:
  explicit AdamT(AdamConfig cfg) : cfg_(cfg) {}

  void step(ParamStoreT<T>& store) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (ParamT<T>* p : store.all()) {
      if (!p->trainable) continue;
      if (p->m.size() != p->value.size()) {
        p->m.assign(p->value.size(), 0.0);
        p->vmom.assign(p->value.size(), 0.0);
      }
      for (size_t i = 0; i < p->value.size(); ++i) {
        double w = static_cast<double>(p->value[i]);
        const double g = static_cast<double>(p->grad[i]);
        w -= cfg_.lr * cfg_.weight_decay * w;
        p->m[i] = cfg_.beta1 * p->m[i] + (1.0 - cfg_.beta1) * g;
        p->vmom[i] = cfg_.beta2 * p->vmom[i] + (1.0 - cfg_.beta2) * g * g;
        const double mhat = p->m[i] / bc1;
        const double vhat = p->vmom[i] / bc2;
        w -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        p->value[i] = static_cast<T>(w);
      }
    }
  }

  int64_t steps() const { return t_; }

 private:
  AdamConfig cfg_;
  int64_t t_ = 0;
};

// ---------------------------------------------------------------------------
// Tape.
// ---------------------------------------------------------------------------

template <typename T>
struct NodeT {
  ArrayT<T> val;
  ArrayT<T> grad;  // same shape, zero until backward
  bool needs = false;
};

template <typename T>
class TapeT {
 public:
  /// Leaf holding a constant (or, with needs=true, an input whose gradient
  /// the caller wants to read off node->grad after backward).
  NodeT<T>* input(ArrayT<T> v, bool needs = false) {
    NodeT<T>* n = make(std::move(v));
    n->needs = needs;
    return n;
  }

  /// Leaf bound to a parameter: copies the value in, accumulates the
  /// gradient back into p.grad during backward when trainable.
  NodeT<T>* param(ParamT<T>& p) {
    ArrayT<T> v;
    v.shape = p.shape;
    v.v = p.value;
    NodeT<T>* n = make(std::move(v));
    n->needs = p.trainable;
    if (p.trainable) {
      ParamT<T>* pp = &p;
      ops_.push_back([n, pp] {
        for (size_t i = 0; i < pp->grad.size(); ++i)
          pp->grad[i] += n->grad.v[i];
      });
    }
    return n;
  }

  /// Cross-correlation, stride 1. x: {C,H,W}; w: {Co,C,k,k}; b: {Co} or null.
  NodeT<T>* conv2d(NodeT<T>* x, NodeT<T>* w, NodeT<T>* b, bool same) {
    if (x->val.shape.size() != 3 || w->val.shape.size() != 4)
      throw ValidationError("conv2d: x must be rank 3 and w rank 4");
    const int c_in = x->val.shape[0], h = x->val.shape[1], wd = x->val.shape[2];
    const int c_out = w->val.shape[0], k = w->val.shape[2];
    if (w->val.shape[1] != c_in)
      throw ValidationError("conv2d: weight input channels != input channels");
    if (w->val.shape[3] != k || k % 2 == 0)
      throw ValidationError("conv2d: kernel must be square with odd size");
    if (b && (b->val.shape.size() != 1 || b->val.shape[0] != c_out))
      throw ValidationError("conv2d: bias shape must be {out channels}");
    if (!same && (h < k || wd < k))
      throw ValidationError("conv2d: input smaller than valid kernel window");
    int oh, ow;
    kernels::conv2d_out_shape(h, wd, k, same, oh, ow);
    NodeT<T>* out = make(ArrayT<T>({c_out, oh, ow}));
    const T* bias = b ? b->val.v.data() : nullptr;
    if constexpr (std::is_same_v<T, float>) {
      kernels::conv2d_fast(x->val.v.data(), c_in, h, wd, w->val.v.data(),
                           c_out, k, bias, same, out->val.v.data());
    } else {
      kernels::conv2d_ref(x->val.v.data(), c_in, h, wd, w->val.v.data(), c_out,
                          k, bias, same, out->val.v.data());
    }
    out->needs = x->needs || w->needs || (b && b->needs);
    if (out->needs) {
      ops_.push_back([x, w, b, out, c_in, h, wd, c_out, k, same] {
        if (x->needs) {
          if constexpr (std::is_same_v<T, float>) {
            kernels::conv2d_grad_input_fast(out->grad.v.data(), c_out,
                                            w->val.v.data(), c_in, h, wd, k,
                                            same, x->grad.v.data());
          } else {
            kernels::conv2d_grad_input_ref(out->grad.v.data(), c_out,
                                           w->val.v.data(), c_in, h, wd, k,
                                           same, x->grad.v.data());
          }
        }
        if (w->needs || (b && b->needs)) {
          T* gw = w->needs ? w->grad.v.data() : nullptr;
          T* gb = (b && b->needs) ? b->grad.v.data() : nullptr;
          if (gw) {
            if constexpr (std::is_same_v<T, float>) {
              kernels::conv2d_grad_weights_fast(out->grad.v.data(), c_out,
                                                x->val.v.data(), c_in, h, wd,
                                                k, same, gw, gb);
            } else {
              kernels::conv2d_grad_weights_ref(out->grad.v.data(), c_out,
                                               x->val.v.data(), c_in, h, wd, k,
                                               same, gw, gb);
            }
          } else if (gb) {
            int oh2, ow2;
            kernels::conv2d_out_shape(h, wd, k, same, oh2, ow2);
            for (int co = 0; co < c_out; ++co) {
              double acc = 0.0;
              const T* g =
                  out->grad.v.data() + static_cast<size_t>(co) * oh2 * ow2;
              for (int i = 0; i < oh2 * ow2; ++i)
                acc += static_cast<double>(g[i]);
              gb[co] += static_cast<T>(acc);
            }
          }
        }
      });
    }
    return out;
  }

  /// max(x, 0); the subgradient at exactly 0 is 0.
  NodeT<T>* relu(NodeT<T>* x) {
    NodeT<T>* out = make(ArrayT<T>(x->val.shape));
    for (size_t i = 0; i < x->val.size(); ++i)
      out->val.v[i] = x->val.v[i] > T(0) ? x->val.v[i] : T(0);
    out->needs = x->needs;
    if (out->needs)
      ops_.push_back([x, out] {
        for (size_t i = 0; i < x->val.size(); ++i)
          if (x->val.v[i] > T(0)) x->grad.v[i] += out->grad.v[i];
      });
    return out;
  }

  NodeT<T>* add(NodeT<T>* a, NodeT<T>* b) {
    check_same(a, b, "add");
    NodeT<T>* out = make(ArrayT<T>(a->val.shape));
    for (size_t i = 0; i < out->val.size(); ++i)
      out->val.v[i] = a->val.v[i] + b->val.v[i];
    return bind2(out, a, b,
                 [](size_t i, NodeT<T>* a2, NodeT<T>* b2, NodeT<T>* o) {
                   if (a2->needs) a2->grad.v[i] += o->grad.v[i];
                   if (b2->needs) b2->grad.v[i] += o->grad.v[i];
                 });
  }

  NodeT<T>* sub(NodeT<T>* a, NodeT<T>* b) {
    check_same(a, b, "sub");
    NodeT<T>* out = make(ArrayT<T>(a->val.shape));
    for (size_t i = 0; i < out->val.size(); ++i)
      out->val.v[i] = a->val.v[i] - b->val.v[i];
    return bind2(out, a, b,
                 [](size_t i, NodeT<T>* a2, NodeT<T>* b2, NodeT<T>* o) {
                   if (a2->needs) a2->grad.v[i] += o->grad.v[i];
                   if (b2->needs) b2->grad.v[i] -= o->grad.v[i];
                 });
  }

  NodeT<T>* mul(NodeT<T>* a, NodeT<T>* b) {
    check_same(a, b, "mul");
    NodeT<T>* out = make(ArrayT<T>(a->val.shape));
    for (size_t i = 0; i < out->val.size(); ++i)
      out->val.v[i] = a->val.v[i] * b->val.v[i];
    return bind2(out, a, b,
                 [](size_t i, NodeT<T>* a2, NodeT<T>* b2, NodeT<T>* o) {
                   if (a2->needs) a2->grad.v[i] += o->grad.v[i] * b2->val.v[i];
                   if (b2->needs) b2->grad.v[i] += o->grad.v[i] * a2->val.v[i];
                 });
  }

  /// a / b; the caller keeps b away from zero (losses add eps upstream).
  NodeT<T>* div(NodeT<T>* a, NodeT<T>* b) {
    check_same(a, b, "div");
    NodeT<T>* out = make(ArrayT<T>(a->val.shape));
    for (size_t i = 0; i < out->val.size(); ++i)
      out->val.v[i] = a->val.v[i] / b->val.v[i];
    return bind2(out, a, b,
                 [](size_t i, NodeT<T>* a2, NodeT<T>* b2, NodeT<T>* o) {
                   const T bv = b2->val.v[i];
                   if (a2->needs) a2->grad.v[i] += o->grad.v[i] / bv;
                   if (b2->needs)
                     b2->grad.v[i] -=
                         o->grad.v[i] * a2->val.v[i] / (bv * bv);
                 });
  }

  NodeT<T>* scale(NodeT<T>* x, double c) {
    NodeT<T>* out = make(ArrayT<T>(x->val.shape));
    const T cc = static_cast<T>(c);
    for (size_t i = 0; i < out->val.size(); ++i)
      out->val.v[i] = cc * x->val.v[i];
    out->needs = x->needs;
    if (out->needs)
      ops_.push_back([x, out, cc] {
        for (size_t i = 0; i < x->val.size(); ++i)
          x->grad.v[i] += cc * out->grad.v[i];
      });
    return out;
  }

  NodeT<T>* add_scalar(NodeT<T>* x, double c) {
    NodeT<T>* out = make(ArrayT<T>(x->val.shape));
    const T cc = static_cast<T>(c);
    for (size_t i = 0; i < out->val.size(); ++i)
      out->val.v[i] = x->val.v[i] + cc;
    out->needs = x->needs;
    if (out->needs)
      ops_.push_back([x, out] {
        for (size_t i = 0; i < x->val.size(); ++i)
          x->grad.v[i] += out->grad.v[i];
      });
    return out;
  }

  /// Separable mirror-padded blur; taps holds one tap set shared by all
  /// bands or one per band.
  NodeT<T>* blur(NodeT<T>* x, const std::vector<std::vector<double>>& taps) {
    if (x->val.shape.size() != 3)
      throw ValidationError("blur: rank-3 input required");
    const int c = x->val.shape[0], h = x->val.shape[1], w = x->val.shape[2];
    if (taps.empty() ||
        (taps.size() != 1 && taps.size() != static_cast<size_t>(c)))
      throw ValidationError("blur: tap count must be 1 or the band count");
    for (const auto& t : taps) {
      if (t.size() % 2 == 0) throw ValidationError("blur: taps must be odd");
      if (static_cast<int>(t.size()) > 2 * h ||
          static_cast<int>(t.size()) > 2 * w)
        throw ValidationError("blur: kernel larger than 2x image extent");
    }
    NodeT<T>* out = make(ArrayT<T>(x->val.shape));
    auto tap_sets = std::make_shared<std::vector<std::vector<T>>>();
    for (const auto& t : taps) {
      std::vector<T> ct(t.size());
      for (size_t i = 0; i < t.size(); ++i) ct[i] = static_cast<T>(t[i]);
      tap_sets->push_back(std::move(ct));
    }
    auto tap_d = std::make_shared<std::vector<std::vector<double>>>(taps);
    const size_t plane = static_cast<size_t>(h) * w;
    for (int b = 0; b < c; ++b) {
      const auto& ts = (*tap_sets)[tap_sets->size() == 1 ? 0 : b];
      const auto& td = (*tap_d)[tap_d->size() == 1 ? 0 : b];
      if constexpr (std::is_same_v<T, float>) {
        kernels::blur_plane_fast(x->val.v.data() + plane * b, h, w, ts.data(),
                                 static_cast<int>(ts.size()),
                                 out->val.v.data() + plane * b);
      } else {
        kernels::blur_plane_ref(x->val.v.data() + plane * b, h, w, td.data(),
                                static_cast<int>(td.size()),
                                out->val.v.data() + plane * b);
      }
    }
    out->needs = x->needs;
    if (out->needs)
      ops_.push_back([x, out, tap_sets, tap_d, c, h, w, plane] {
        for (int b = 0; b < c; ++b) {
          const auto& ts = (*tap_sets)[tap_sets->size() == 1 ? 0 : b];
          const auto& td = (*tap_d)[tap_d->size() == 1 ? 0 : b];
          if constexpr (std::is_same_v<T, float>) {
            kernels::blur_plane_adjoint_fast(out->grad.v.data() + plane * b, h,
                                             w, ts.data(),
                                             static_cast<int>(ts.size()),
                                             x->grad.v.data() + plane * b);
          } else {
            kernels::blur_plane_adjoint_ref(out->grad.v.data() + plane * b, h,
                                            w, td.data(),
                                            static_cast<int>(td.size()),
                                            x->grad.v.data() + plane * b);
          }
        }
      });
    return out;
  }

  NodeT<T>* decimate(NodeT<T>* x, int r) {
    if (x->val.shape.size() != 3)
      throw ValidationError("decimate: rank-3 input required");
    const int c = x->val.shape[0], h = x->val.shape[1], w = x->val.shape[2];
    if (h % r != 0 || w % r != 0)
      throw ValidationError("decimate: size not divisible by the ratio");
    NodeT<T>* out = make(ArrayT<T>({c, h / r, w / r}));
    const size_t plane = static_cast<size_t>(h) * w;
    const size_t oplane = plane / (static_cast<size_t>(r) * r);
    for (int b = 0; b < c; ++b)
      kernels::decimate_plane(x->val.v.data() + plane * b, h, w, r,
                              out->val.v.data() + oplane * b);
    out->needs = x->needs;
    if (out->needs)
      ops_.push_back([x, out, c, h, w, r, plane, oplane] {
        for (int b = 0; b < c; ++b)
          kernels::decimate_plane_adjoint(out->grad.v.data() + oplane * b, h,
                                          w, r, x->grad.v.data() + plane * b);
      });
    return out;
  }

  NodeT<T>* upsample(NodeT<T>* x, int r) {
    if (x->val.shape.size() != 3)
      throw ValidationError("upsample: rank-3 input required");
    if (r < 2) throw ValidationError("upsample: ratio must be >= 2");
    const int c = x->val.shape[0], h = x->val.shape[1], w = x->val.shape[2];
    NodeT<T>* out = make(ArrayT<T>({c, h * r, w * r}));
    const size_t plane = static_cast<size_t>(h) * w;
    const size_t oplane = plane * static_cast<size_t>(r) * r;
    for (int b = 0; b < c; ++b) {
      if constexpr (std::is_same_v<T, float>) {
        kernels::upsample_plane_fast(x->val.v.data() + plane * b, h, w, r,
                                     out->val.v.data() + oplane * b);
      } else {
        kernels::upsample_plane_ref(x->val.v.data() + plane * b, h, w, r,
                                    out->val.v.data() + oplane * b);
      }
    }
    out->needs = x->needs;
    if (out->needs)
      ops_.push_back([x, out, c, h, w, r, plane, oplane] {
        for (int b = 0; b < c; ++b)
          kernels::upsample_plane_adjoint_ref(out->grad.v.data() + oplane * b,
                                              h, w, r,
                                              x->grad.v.data() + plane * b);
      });
    return out;
  }

  /// Mean absolute difference -> scalar node (shape {1}).
  NodeT<T>* l1(NodeT<T>* a, NodeT<T>* b) {
    check_same(a, b, "l1");
    NodeT<T>* out = make(ArrayT<T>({1}));
    if constexpr (std::is_same_v<T, float> || std::is_same_v<T, double>) {
      out->val.v[0] = static_cast<T>(
          kernels::l1_mean(a->val.v.data(), b->val.v.data(), a->val.size()));
    }
    out->needs = a->needs || b->needs;
    if (out->needs)
      ops_.push_back([a, b, out] {
        const size_t n = a->val.size();
        const T g = out->grad.v[0] / static_cast<T>(n);
        for (size_t i = 0; i < n; ++i) {
          const T d = a->val.v[i] - b->val.v[i];
          const T s = d > T(0) ? g : (d < T(0) ? -g : T(0));
          if (a->needs) a->grad.v[i] += s;
          if (b->needs) b->grad.v[i] -= s;
        }
      });
    return out;
  }

  /// sum(a * b) -> scalar node; linear readout used by the gradient tests.
  NodeT<T>* inner(NodeT<T>* a, NodeT<T>* b) {
    check_same(a, b, "inner");
    NodeT<T>* out = make(ArrayT<T>({1}));
    double acc = 0.0;
    for (size_t i = 0; i < a->val.size(); ++i)
      acc += static_cast<double>(a->val.v[i]) *
             static_cast<double>(b->val.v[i]);
    out->val.v[0] = static_cast<T>(acc);
    out->needs = a->needs || b->needs;
    if (out->needs)
      ops_.push_back([a, b, out] {
        const T g = out->grad.v[0];
        for (size_t i = 0; i < a->val.size(); ++i) {
          if (a->needs) a->grad.v[i] += g * b->val.v[i];
          if (b->needs) b->grad.v[i] += g * a->val.v[i];
        }
      });
    return out;
  }

  /// Weighted sum of scalar nodes -> scalar node.
  NodeT<T>* weighted_sum(const std::vector<NodeT<T>*>& xs,
                         const std::vector<double>& ws) {
    if (xs.size() != ws.size() || xs.empty())
      throw ValidationError("weighted_sum: need matching non-empty lists");
    for (NodeT<T>* x : xs)
      if (x->val.size() != 1)
        throw ValidationError("weighted_sum: scalar nodes required");
    NodeT<T>* out = make(ArrayT<T>({1}));
    double acc = 0.0;
    for (size_t i = 0; i < xs.size(); ++i)
      acc += ws[i] * static_cast<double>(xs[i]->val.v[0]);
    out->val.v[0] = static_cast<T>(acc);
    for (NodeT<T>* x : xs) out->needs = out->needs || x->needs;
    if (out->needs) {
      auto xs2 = xs;
      auto ws2 = ws;
      ops_.push_back([xs2, ws2, out] {
        for (size_t i = 0; i < xs2.size(); ++i)
          if (xs2[i]->needs)
            xs2[i]->grad.v[0] += static_cast<T>(ws2[i]) * out->grad.v[0];
      });
    }
    return out;
  }

  /// Seeds d(loss)/d(loss) = 1 and runs the chain rule in exact reverse
  /// execution order. Call once per tape.
  void backward(NodeT<T>* loss) {
    if (loss->val.size() != 1)
      throw ValidationError("backward: target must be a scalar node");
    if (!loss->needs)
      throw ValidationError(
          "backward: target does not depend on any tracked input");
    loss->grad.v[0] = T(1);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
  }

  void clear() {
    ops_.clear();
    nodes_.clear();
  }

 private:
  NodeT<T>* make(ArrayT<T> v) {
    auto n = std::make_unique<NodeT<T>>();
    n->grad = ArrayT<T>(v.shape);
    n->val = std::move(v);
    nodes_.push_back(std::move(n));
    return nodes_.back().get();
  }

  static void check_same(NodeT<T>* a, NodeT<T>* b, const char* what) {
    if (a->val.shape != b->val.shape)
      throw ValidationError(std::string(what) + ": shape mismatch");
  }

  template <typename F>
  NodeT<T>* bind2(NodeT<T>* out, NodeT<T>* a, NodeT<T>* b, F f) {
    out->needs = a->needs || b->needs;
    if (out->needs)
      ops_.push_back([a, b, out, f] {
        for (size_t i = 0; i < out->grad.size(); ++i) f(i, a, b, out);
      });
    return out;
  }

  std::vector<std::unique_ptr<NodeT<T>>> nodes_;
  std::vector<std::function<void()>> ops_;
};

using Array = ArrayT<float>;
using Param = ParamT<float>;
using ParamStore = ParamStoreT<float>;
using Adam = AdamT<float>;
using Node = NodeT<float>;
using Tape = TapeT<float>;

// Named-tensor weight file: u32 count, then per tensor (u16 name length,
// UTF-8 name, TensorContainer body), sorted by name.
void save_params(const ParamStore& store, const std::string& path);
void load_params(ParamStore& store, const std::string& path);

} // namespace catfuse::diff
