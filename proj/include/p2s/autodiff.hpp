#pragma once

// Reverse-mode differentiation over dense (C, H, W) tensors, restricted to the
// operators the denoising network needs. Nodes live on a Tape in creation
// order, which is a topological order; backward walks it in reverse.

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "p2s/conv.hpp"
#include "p2s/error.hpp"
#include "p2s/tensor.hpp"

namespace p2s {

class Tape;

/// Handle to a node on a tape.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  std::size_t id() const noexcept { return id_; }
  const Tensor& value() const;
  const Tensor& grad() const;
  const Shape& shape() const { return value().shape(); }
  bool requires_grad() const;
  double item() const;

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// ValueNode: forward value, accumulated gradient, and the rule that pushes the
/// gradient to its parents.
struct ValueNode {
  Tensor value;
  Tensor grad;
  bool requires_grad = false;
  std::function<void(Tape&, std::size_t)> backward_rule;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Leaf without gradient tracking.
  Var constant(Tensor value) { return push(std::move(value), false, {}); }
  /// Leaf whose gradient is collected by backward.
  Var parameter(Tensor value) { return push(std::move(value), true, {}); }

  Var push(Tensor value, bool requires_grad, std::function<void(Tape&, std::size_t)> rule) {
    nodes_.push_back({std::move(value), Tensor{}, requires_grad, std::move(rule)});
    return Var(this, nodes_.size() - 1);
  }

  ValueNode& node(std::size_t id) { return nodes_[id]; }
  const ValueNode& node(std::size_t id) const { return nodes_[id]; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Adds `delta` into the gradient of node `id`, allocating on first use.
  void accumulate(std::size_t id, const Tensor& delta) {
    auto& n = nodes_[id];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = delta;
      return;
    }
    for (std::size_t i = 0; i < delta.size(); ++i) n.grad[i] += delta[i];
  }

  Tensor& grad_buffer(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.size() == 0) n.grad = Tensor(n.value.shape());
    return n.grad;
  }

  /// Fills every requires-grad node with d(loss)/d(node). A second call without
  /// zero_grad() raises Errc::stale_gradient.
  void backward(const Var& loss) {
    require(&loss.tape() == this, Errc::invalid_argument, "loss belongs to another tape");
    require(loss.value().size() == 1, Errc::shape_mismatch, "backward needs a scalar loss");
    require(!backward_done_, Errc::stale_gradient, "backward called twice without zero_grad()");
    backward_done_ = true;
    auto& root = nodes_[loss.id()];
    if (!root.requires_grad) return;
    grad_buffer(loss.id())[0] += 1.0;
    for (std::size_t id = loss.id() + 1; id-- > 0;) {
      auto& n = nodes_[id];
      if (!n.requires_grad || !n.backward_rule || n.grad.size() == 0) continue;
      n.backward_rule(*this, id);
    }
  }

  void zero_grad() {
    for (auto& n : nodes_) n.grad = Tensor{};
    backward_done_ = false;
  }

  /// When enabled, every non-smooth op folds its branch pattern into kink_signature().
  /// Two evaluations with equal signatures lie on the same smooth piece.
  void set_track_kinks(bool on) { track_kinks_ = on; }
  bool tracking_kinks() const noexcept { return track_kinks_; }
  void mix_kink(std::uint64_t branch) {
    kink_hash_ ^= branch + 0x9E3779B97F4A7C15ull + (kink_hash_ << 6) + (kink_hash_ >> 2);
  }
  std::uint64_t kink_signature() const noexcept { return kink_hash_; }

 private:
  std::vector<ValueNode> nodes_;
  bool backward_done_ = false;
  bool track_kinks_ = false;
  std::uint64_t kink_hash_ = 0;
};

inline const Tensor& Var::value() const { return tape_->node(id_).value; }
inline const Tensor& Var::grad() const { return tape_->node(id_).grad; }
inline bool Var::requires_grad() const { return tape_->node(id_).requires_grad; }
inline double Var::item() const {
  require(value().size() == 1, Errc::shape_mismatch, "item() on non-scalar");
  return value()[0];
}

namespace detail {

inline Tape& common_tape(const Var& a, const Var& b) {
  require(&a.tape() == &b.tape(), Errc::invalid_argument, "operands live on different tapes");
  return a.tape();
}

inline void same_shape(const Var& a, const Var& b, const char* op) {
  require(a.shape() == b.shape(), Errc::shape_mismatch,
          std::string(op) + ": " + to_string(a.shape()) + " vs " + to_string(b.shape()));
}

template <class F>
Var unary(const Var& x, Tensor out, F&& local_grad) {
  Tape& t = x.tape();
  const std::size_t xi = x.id();
  return t.push(std::move(out), x.requires_grad(), [xi, g = std::forward<F>(local_grad)](Tape& tp, std::size_t self) {
    const Tensor& up = tp.node(self).grad;
    if (!tp.node(xi).requires_grad) return;
    Tensor& dx = tp.grad_buffer(xi);
    g(tp, up, dx);
  });
}

}  // namespace detail

/// New constant node holding the same values; gradients never flow through it.
inline Var detach(const Var& x) { return x.tape().constant(x.value()); }

inline Var add(const Var& a, const Var& b) {
  Tape& t = detail::common_tape(a, b);
  detail::same_shape(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  const std::size_t ai = a.id(), bi = b.id();
  return t.push(std::move(out), a.requires_grad() || b.requires_grad(), [ai, bi](Tape& tp, std::size_t self) {
    const Tensor up = tp.node(self).grad;
    tp.accumulate(ai, up);
    tp.accumulate(bi, up);
  });
}

inline Var sub(const Var& a, const Var& b) {
  Tape& t = detail::common_tape(a, b);
  detail::same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  const std::size_t ai = a.id(), bi = b.id();
  return t.push(std::move(out), a.requires_grad() || b.requires_grad(), [ai, bi](Tape& tp, std::size_t self) {
    Tensor up = tp.node(self).grad;
    tp.accumulate(ai, up);
    for (std::size_t i = 0; i < up.size(); ++i) up[i] = -up[i];
    tp.accumulate(bi, up);
  });
}

inline Var mul(const Var& a, const Var& b) {
  Tape& t = detail::common_tape(a, b);
  detail::same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const std::size_t ai = a.id(), bi = b.id();
  return t.push(std::move(out), a.requires_grad() || b.requires_grad(), [ai, bi](Tape& tp, std::size_t self) {
    const Tensor& up = tp.node(self).grad;
    if (tp.node(ai).requires_grad) {
      Tensor d = tp.node(bi).value;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= up[i];
      tp.accumulate(ai, d);
    }
    if (tp.node(bi).requires_grad) {
      Tensor d = tp.node(ai).value;
      for (std::size_t i = 0; i < d.size(); ++i) d[i] *= up[i];
      tp.accumulate(bi, d);
    }
  });
}

inline Var scale(const Var& x, double c) {
  Tensor out = x.value();
  for (auto& v : out.values()) v *= c;
  return detail::unary(x, std::move(out), [c](Tape&, const Tensor& up, Tensor& dx) {
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += c * up[i];
  });
}

inline Var exp(const Var& x) {
  Tensor out = x.value();
  for (auto& v : out.values()) v = std::exp(v);
  const std::size_t xi = x.id();
  Tape& t = x.tape();
  return t.push(std::move(out), x.requires_grad(), [xi](Tape& tp, std::size_t self) {
    const auto& n = tp.node(self);
    Tensor d = n.value;
    for (std::size_t i = 0; i < d.size(); ++i) d[i] *= n.grad[i];
    tp.accumulate(xi, d);
  });
}

/// |x| with subgradient sign(x), taken as 0 at x = 0.
inline Var abs(const Var& x) {
  Tape& t = x.tape();
  Tensor out = x.value();
  for (auto& v : out.values()) v = std::fabs(v);
  if (t.tracking_kinks())
    for (double v : x.value().values()) t.mix_kink(v > 0 ? 1 : (v < 0 ? 2 : 3));
  return detail::unary(x, std::move(out), [xi = x.id()](Tape& tp, const Tensor& up, Tensor& dx) {
    const Tensor& xv = tp.node(xi).value;
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += (xv[i] > 0 ? 1.0 : (xv[i] < 0 ? -1.0 : 0.0)) * up[i];
  });
}

/// Mean over all elements, producing a (1,1,1) scalar.
inline Var mean(const Var& x) {
  double acc = 0.0;
  for (double v : x.value().values()) acc += v;
  const double n = static_cast<double>(x.value().size());
  Tensor out({1, 1, 1}, acc / n);
  return detail::unary(x, std::move(out), [n](Tape&, const Tensor& up, Tensor& dx) {
    const double g = up[0] / n;
    for (auto& v : dx.values()) v += g;
  });
}

/// Per-channel soft threshold: sign(x) max(|x| - eps_c, 0). `thresholds` has shape (C,1,1).
/// Inside the dead zone (|x| <= eps) both derivatives are zero.
inline Var soft_threshold(const Var& x, const Var& thresholds) {
  Tape& t = detail::common_tape(x, thresholds);
  const Shape s = x.shape();
  require(thresholds.value().size() == s.channels, Errc::shape_mismatch,
          "soft_threshold: need one threshold per channel");
  for (double e : thresholds.value().values())
    require(e >= 0.0, Errc::invalid_argument, "soft_threshold: negative threshold " + std::to_string(e));
  Tensor out(s);
  const std::size_t plane = s.plane();
  for (std::size_t c = 0; c < s.channels; ++c) {
    const double eps = thresholds.value()[c];
    const double* in = x.value().channel(c);
    double* o = out.channel(c);
    for (std::size_t i = 0; i < plane; ++i) {
      const double a = std::fabs(in[i]) - eps;
      o[i] = a > 0.0 ? std::copysign(a, in[i]) : 0.0;
    }
  }
  if (t.tracking_kinks())
    for (std::size_t c = 0; c < s.channels; ++c) {
      const double eps = thresholds.value()[c];
      const double* in = x.value().channel(c);
      for (std::size_t i = 0; i < plane; ++i) t.mix_kink(in[i] > eps ? 1 : (in[i] < -eps ? 2 : 3));
    }
  const std::size_t xi = x.id(), ti = thresholds.id();
  return t.push(std::move(out), x.requires_grad() || thresholds.requires_grad(),
                [xi, ti, plane](Tape& tp, std::size_t self) {
                  const Tensor& up = tp.node(self).grad;
                  const Tensor& xv = tp.node(xi).value;
                  const Tensor& ev = tp.node(ti).value;
                  const std::size_t channels = ev.size();
                  if (tp.node(xi).requires_grad) {
                    Tensor& dx = tp.grad_buffer(xi);
                    for (std::size_t c = 0; c < channels; ++c)
                      for (std::size_t i = c * plane; i < (c + 1) * plane; ++i)
                        if (std::fabs(xv[i]) > ev[c]) dx[i] += up[i];
                  }
                  if (tp.node(ti).requires_grad) {
                    Tensor& de = tp.grad_buffer(ti);
                    for (std::size_t c = 0; c < channels; ++c) {
                      double acc = 0.0;
                      for (std::size_t i = c * plane; i < (c + 1) * plane; ++i) {
                        if (xv[i] > ev[c]) acc -= up[i];
                        else if (xv[i] < -ev[c]) acc += up[i];
                      }
                      de[c] += acc;
                    }
                  }
                });
}

/// Weights node holds g.numel() values in [out][in][k][k] order.
inline Var conv2d(const Var& x, const Var& weights, const ConvGeometry& g) {
  Tape& t = detail::common_tape(x, weights);
  Tensor out = conv2d(x.value(), weights.value().span(), g);
  const std::size_t xi = x.id(), wi = weights.id();
  return t.push(std::move(out), x.requires_grad() || weights.requires_grad(), [xi, wi, g](Tape& tp, std::size_t self) {
    const Tensor& up = tp.node(self).grad;
    if (tp.node(xi).requires_grad) tp.accumulate(xi, conv2d_transpose(up, tp.node(wi).value.span(), g));
    if (tp.node(wi).requires_grad) conv2d_weight_grad(tp.node(xi).value, up, g, tp.grad_buffer(wi).span());
  });
}

/// Adjoint of conv2d with the same weights: maps g.out_channels -> g.in_channels.
inline Var conv2d_transpose(const Var& x, const Var& weights, const ConvGeometry& g) {
  Tape& t = detail::common_tape(x, weights);
  Tensor out = conv2d_transpose(x.value(), weights.value().span(), g);
  const std::size_t xi = x.id(), wi = weights.id();
  return t.push(std::move(out), x.requires_grad() || weights.requires_grad(), [xi, wi, g](Tape& tp, std::size_t self) {
    const Tensor& up = tp.node(self).grad;
    if (tp.node(xi).requires_grad) tp.accumulate(xi, conv2d(up, tp.node(wi).value.span(), g));
    // y = K^T x  =>  dL/dw[o][i] = sum up[i](r+u-p, c+v-p) * x[o](r, c)
    if (tp.node(wi).requires_grad) conv2d_weight_grad(up, tp.node(xi).value, g, tp.grad_buffer(wi).span());
  });
}

}  // namespace p2s
