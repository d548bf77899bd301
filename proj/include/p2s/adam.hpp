#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "p2s/error.hpp"

namespace p2s {

struct AdamHyper {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// A trainable array and its gradient. `nonnegative` parameters are clamped at 0 after each step.
struct ParamRef {
  std::string name;
  std::span<double> values;
  std::span<const double> grad;
  bool nonnegative = false;
};

struct AdamState {
  AdamHyper hyper;
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;
};

/// Adam with bias correction. All gradients are validated before any parameter changes.
inline void adam_step(std::span<const ParamRef> params, AdamState& state) {
  for (const auto& p : params) {
    require(p.values.size() == p.grad.size(), Errc::shape_mismatch, "gradient size mismatch for " + p.name);
    for (std::size_t i = 0; i < p.grad.size(); ++i)
      if (!std::isfinite(p.grad[i]))
        fail(Errc::numerical_error, "non-finite gradient in parameter '" + p.name + "' at index " + std::to_string(i));
  }
  if (state.first_moment.empty()) {
    for (const auto& p : params) {
      state.first_moment.emplace_back(p.values.size(), 0.0);
      state.second_moment.emplace_back(p.values.size(), 0.0);
    }
  }
  require(state.first_moment.size() == params.size(), Errc::shape_mismatch, "optimizer state / parameter count mismatch");
  ++state.step;
  const auto& h = state.hyper;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(h.beta1, t);
  const double correction2 = 1.0 - std::pow(h.beta2, t);
  for (std::size_t k = 0; k < params.size(); ++k) {
    const auto& p = params[k];
    auto& m = state.first_moment[k];
    auto& v = state.second_moment[k];
    require(m.size() == p.values.size(), Errc::shape_mismatch, "optimizer state shape mismatch for " + p.name);
    for (std::size_t i = 0; i < p.values.size(); ++i) {
      const double g = p.grad[i];
      m[i] = h.beta1 * m[i] + (1.0 - h.beta1) * g;
      v[i] = h.beta2 * v[i] + (1.0 - h.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p.values[i] -= h.learning_rate * m_hat / (std::sqrt(v_hat) + h.epsilon);
      if (p.nonnegative && p.values[i] < 0.0) p.values[i] = 0.0;
    }
  }
}

}  // namespace p2s
