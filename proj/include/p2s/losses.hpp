#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "p2s/autodiff.hpp"
#include "p2s/error.hpp"
#include "p2s/neighbor.hpp"
#include "p2s/network.hpp"
#include "p2s/tensor.hpp"

namespace p2s {

/// exp() of anything above this overflows a double.
inline constexpr double kMaxPoissonActivation = 700.0;

/// Poisson negative log-likelihood in log-rate form, mean over pixels of exp(f) - y * f.
/// Pointwise minimizer: f = ln(y).
inline Var loss_poisson(const Var& pred, const Tensor& target) {
  require(pred.shape() == target.shape(), Errc::shape_mismatch,
          "loss_poisson: " + to_string(pred.shape()) + " vs " + to_string(target.shape()));
  const auto& v = pred.value().values();
  const double peak = *std::max_element(v.begin(), v.end());
  if (peak > kMaxPoissonActivation)
    fail(Errc::numerical_error, "loss_poisson: activation " + std::to_string(peak) + " would overflow exp");
  Tape& t = pred.tape();
  const Var y = t.constant(target);
  return mean(sub(exp(pred), mul(y, pred)));
}

/// Mean absolute difference. The subgradient at a zero difference is 0.
inline Var loss_l1(const Var& pred, const Tensor& target) {
  require(pred.shape() == target.shape(), Errc::shape_mismatch,
          "loss_l1: " + to_string(pred.shape()) + " vs " + to_string(target.shape()));
  return mean(abs(sub(pred, pred.tape().constant(target))));
}

/// Neighbor regularizer, mean over half-resolution pixels of
///   ( f(g1(Y)) - g2(Y) - (g1(f(Y)) - g2(f(Y))) )^2
/// `pred` is f(g1(Y)); `full_output` is f(Y) at full resolution and enters as a constant.
inline Var neighbor_regularizer(const Var& pred, const Tensor& g2_noisy, const Tensor& full_output,
                                const SelectionMap& sel) {
  const Shape fs = full_output.shape();
  Tensor full = full_output;
  if (fs.height % 2 || fs.width % 2) full = Tensor::from_image(crop_to_even(full_output.to_image()));
  const Tensor g1_full = apply_selection(sel, full, 0);
  const Tensor g2_full = apply_selection(sel, full, 1);
  require(pred.shape() == g1_full.shape() && g2_noisy.shape() == g1_full.shape(), Errc::dimension_mismatch,
          "loss_neighbor: selection map does not match prediction size");
  Tensor offset = g1_full;
  for (std::size_t i = 0; i < offset.size(); ++i) offset[i] -= g2_full[i];
  Tape& t = pred.tape();
  const Var diff = sub(sub(pred, t.constant(g2_noisy)), t.constant(std::move(offset)));
  return mean(mul(diff, diff));
}

/// Convenience form running both passes of the network. The full-image pass is
/// gradient-detached; only f(g1(Y)) carries gradient.
inline Var loss_neighbor(const P2SNetwork& net, const NetVars& vars, const ImageGrid& noisy,
                         const SubsamplePair& pair) {
  Tape& t = vars.encoder.tape();
  const Var input = t.constant(Tensor::from_image(pair.g1));
  Var pred = forward(net, vars, input).output;
  if (net.config.exp_output) pred = exp(pred);
  const Tensor full = to_intensity(net, forward_inference(net, Tensor::from_image(noisy)).output);
  return neighbor_regularizer(pred, Tensor::from_image(pair.g2), full, pair.selection);
}

}  // namespace p2s
