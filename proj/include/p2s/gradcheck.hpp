#pragma once

// Central finite-difference checks of reverse-mode gradients.
//
// For every checked coordinate the loss is re-evaluated at x +- h on fresh
// tapes with kink tracking on. If either evaluation takes a different branch of
// a non-smooth op (soft threshold, abs) than the base point, the coordinate
// sits in a kink neighborhood and is excluded rather than compared.
//
// Relative error: |analytic - numeric| / max(|analytic|, |numeric|, floor).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "p2s/autodiff.hpp"
#include "p2s/losses.hpp"
#include "p2s/neighbor.hpp"
#include "p2s/network.hpp"
#include "p2s/noise.hpp"
#include "p2s/phantom.hpp"
#include "p2s/rng.hpp"
#include "p2s/trainer.hpp"

namespace p2s {

struct GradCheckOptions {
  double step = 1e-6;
  double tolerance = 1e-5;
  double floor = 1e-6;
  std::size_t max_samples = 0;  // 0: check every coordinate
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  std::string name;
  std::size_t checked = 0;
  std::size_t excluded = 0;
  double max_rel_error = 0.0;
  bool passed = false;
};

inline double relative_error(double analytic, double numeric, double floor) {
  return std::fabs(analytic - numeric) / std::max({std::fabs(analytic), std::fabs(numeric), floor});
}

/// Builds a scalar loss from leaves bound to the given inputs.
using LossBuilder = std::function<Var(Tape&, const std::vector<Var>&)>;

inline GradCheckResult check_gradients(const std::string& name, const std::vector<Tensor>& inputs,
                                       const LossBuilder& build, const GradCheckOptions& opt) {
  struct Eval {
    double value;
    std::uint64_t signature;
  };
  auto evaluate = [&](const std::vector<Tensor>& xs) {
    Tape tape;
    tape.set_track_kinks(true);
    std::vector<Var> leaves;
    for (const auto& x : xs) leaves.push_back(tape.constant(x));
    const Var loss = build(tape, leaves);
    return Eval{loss.item(), tape.kink_signature()};
  };

  Tape tape;
  tape.set_track_kinks(true);
  std::vector<Var> leaves;
  for (const auto& x : inputs) leaves.push_back(tape.parameter(x));
  const Var loss = build(tape, leaves);
  const std::uint64_t base_signature = tape.kink_signature();
  tape.backward(loss);

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t k = 0; k < inputs.size(); ++k)
    for (std::size_t i = 0; i < inputs[k].size(); ++i) coords.emplace_back(k, i);
  if (opt.max_samples && coords.size() > opt.max_samples) {
    Xoshiro256 rng(opt.seed);
    for (std::size_t i = 0; i < opt.max_samples; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.uniform() * static_cast<double>(coords.size() - i));
      std::swap(coords[i], coords[j]);
    }
    coords.resize(opt.max_samples);
  }

  GradCheckResult result{name};
  std::vector<Tensor> probe = inputs;
  for (const auto& [k, i] : coords) {
    const double x0 = inputs[k][i];
    probe[k][i] = x0 + opt.step;
    const Eval plus = evaluate(probe);
    probe[k][i] = x0 - opt.step;
    const Eval minus = evaluate(probe);
    probe[k][i] = x0;
    if (plus.signature != base_signature || minus.signature != base_signature) {
      ++result.excluded;
      continue;
    }
    const double numeric = (plus.value - minus.value) / (2.0 * opt.step);
    const Tensor& g = leaves[k].grad();
    const double analytic = g.size() ? g[i] : 0.0;
    result.max_rel_error = std::max(result.max_rel_error, relative_error(analytic, numeric, opt.floor));
    ++result.checked;
  }
  result.passed = result.checked > 0 && result.max_rel_error <= opt.tolerance;
  return result;
}

namespace detail {

inline Tensor random_tensor(Shape s, Xoshiro256& rng, double lo, double hi) {
  Tensor t(s);
  for (auto& v : t.values()) v = lo + (hi - lo) * rng.uniform();
  return t;
}

}  // namespace detail

/// Operator-level checks: every differentiable primitive on random inputs.
inline std::vector<GradCheckResult> operator_gradchecks(std::uint64_t seed, const GradCheckOptions& base = {}) {
  Xoshiro256 rng(derive_seed(seed, SeedPurpose::gradcheck, 1));
  std::vector<GradCheckResult> out;
  const ConvGeometry g{3, 2, 3};
  const Tensor weight_probe = detail::random_tensor({1, 1, g.numel()}, rng, -1, 1);
  const Tensor r3 = detail::random_tensor({3, 7, 6}, rng, -1, 1);
  const Tensor r2 = detail::random_tensor({2, 7, 6}, rng, -1, 1);

  out.push_back(check_gradients(
      "conv2d", {detail::random_tensor({2, 7, 6}, rng, -1, 1), detail::random_tensor({6, 3, 3}, rng, -1, 1)},
      [&](Tape& t, const std::vector<Var>& v) {
        const Var y = conv2d(v[0], v[1], g);
        return mean(mul(mul(y, y), t.constant(r3)));
      },
      base));
  out.push_back(check_gradients(
      "conv2d_transpose", {detail::random_tensor({3, 7, 6}, rng, -1, 1), detail::random_tensor({6, 3, 3}, rng, -1, 1)},
      [&](Tape& t, const std::vector<Var>& v) {
        const Var y = conv2d_transpose(v[0], v[1], g);
        return mean(mul(mul(y, y), t.constant(r2)));
      },
      base));
  out.push_back(check_gradients(
      "soft_threshold", {detail::random_tensor({3, 7, 6}, rng, -1, 1), detail::random_tensor({3, 1, 1}, rng, 0.05, 0.4)},
      [&](Tape& t, const std::vector<Var>& v) { return mean(mul(soft_threshold(v[0], v[1]), t.constant(r3))); },
      base));
  out.push_back(check_gradients(
      "exp", {detail::random_tensor({2, 7, 6}, rng, -2, 2)},
      [&](Tape& t, const std::vector<Var>& v) { return mean(mul(exp(v[0]), t.constant(r2))); }, base));
  out.push_back(check_gradients(
      "mul_add_sub_scale", {detail::random_tensor({2, 7, 6}, rng, -1, 1), detail::random_tensor({2, 7, 6}, rng, -1, 1)},
      [&](Tape& t, const std::vector<Var>& v) {
        const Var s = add(mul(v[0], v[1]), scale(sub(v[0], v[1]), 0.7));
        return mean(mul(s, t.constant(r2)));
      },
      base));
  out.push_back(check_gradients(
      "abs", {detail::random_tensor({2, 7, 6}, rng, -1, 1)},
      [&](Tape& t, const std::vector<Var>& v) { return mean(mul(abs(v[0]), t.constant(r2))); }, base));
  (void)weight_probe;
  return out;
}

struct NetworkGradCheckSetup {
  std::size_t image_size = 16;
  std::size_t num_filters = 4;
  int unroll_steps = 3;
  bool exp_output = false;
};

/// Full training-loss gradient with respect to every network parameter
/// (encoder, decoder, thresholds) for one randomized network and neighbor pair.
inline GradCheckResult network_gradcheck(std::uint64_t seed, const NetworkGradCheckSetup& setup,
                                         const GradCheckOptions& opt) {
  Xoshiro256 rng(derive_seed(seed, SeedPurpose::gradcheck, 2));
  const std::size_t n = setup.image_size;
  std::vector<double> px(n * n);
  for (auto& v : px) v = 0.1 + 0.9 * rng.uniform();
  const ImageGrid clean(n, n, std::move(px));
  const ImageGrid noisy = make_noisy(clean, {20.0, rng()});

  NetConfig nc;
  nc.num_filters = setup.num_filters;
  nc.unroll_steps = setup.unroll_steps;
  nc.exp_output = setup.exp_output;
  nc.seed = rng();
  P2SNetwork net = init_network(nc);
  for (auto& w : net.encoder.weights) w *= 1.0 + 0.3 * (2.0 * rng.uniform() - 1.0);
  for (auto& w : net.decoder.weights) w *= 1.0 + 0.3 * (2.0 * rng.uniform() - 1.0);
  for (auto& e : net.encoder.thresholds) e = 0.005 + 0.045 * rng.uniform();

  const SubsamplePair pair = neighbor_downsample(noisy, rng);
  const Tensor full = to_intensity(net, forward_inference(net, Tensor::from_image(noisy)).output);
  TrainConfig tc;

  const auto& eg = net.encoder.geometry;
  const auto& dg = net.decoder.geometry;
  std::vector<Tensor> params = {
      Tensor({eg.out_channels * eg.in_channels, eg.kernel, eg.kernel}, net.encoder.weights),
      Tensor({dg.out_channels * dg.in_channels, dg.kernel, dg.kernel}, net.decoder.weights),
      Tensor({net.num_filters(), 1, 1}, net.encoder.thresholds),
  };
  const std::string name = std::string("network_loss[") + (setup.exp_output ? "exp" : "linear") + ",M=" +
                           std::to_string(setup.num_filters) + ",T=" + std::to_string(setup.unroll_steps) + "]";
  return check_gradients(
      name, params,
      [&](Tape&, const std::vector<Var>& v) {
        const NetVars vars{v[0], v[1], v[2]};
        return assemble_loss(net, vars, pair, full, tc).total;
      },
      opt);
}

/// The suite run by `p2s gradcheck`: operator checks plus four randomized
/// network trials (two linear-output, two exp-output).
inline std::vector<GradCheckResult> full_gradcheck_suite(std::uint64_t seed, const GradCheckOptions& opt = {}) {
  auto results = operator_gradchecks(seed, opt);
  for (int trial = 0; trial < 4; ++trial) {
    NetworkGradCheckSetup setup;
    setup.exp_output = trial % 2 == 1;
    results.push_back(network_gradcheck(derive_seed(seed, SeedPurpose::gradcheck, 10 + trial), setup, opt));
  }
  return results;
}

}  // namespace p2s
