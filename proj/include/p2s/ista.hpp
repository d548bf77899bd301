#pragma once

// Classical (non-learned) convolutional ISTA for
//   min_A  1/2 || Y - D * A ||^2 + lambda_s || A ||_1
// with a fixed decoder bank D (1 x M x k x k). One step is
//   A <- S_{lambda_s * eta}( A + eta * D^T * (Y - D * A) ),   eta = 0.99 / L,
// where L estimates the largest eigenvalue of D^T D by power iteration.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "p2s/conv.hpp"
#include "p2s/error.hpp"
#include "p2s/image.hpp"
#include "p2s/kernel_bank.hpp"
#include "p2s/rng.hpp"
#include "p2s/tensor.hpp"

namespace p2s {

inline constexpr double kIstaStepSafety = 0.99;

struct PowerIterationResult {
  double estimate = 0.0;
  /// Estimate after each iteration; nondecreasing.
  std::vector<double> sequence;
};

/// Largest eigenvalue of D^T D acting on (M, height, width) codes.
inline PowerIterationResult power_iteration_L(const KernelBank& dict, int iters, std::size_t height, std::size_t width,
                                              std::uint64_t seed = 0) {
  require(iters >= 1, Errc::invalid_argument, "power iteration needs at least one iteration");
  require(std::any_of(dict.weights.begin(), dict.weights.end(), [](double w) { return w != 0.0; }),
          Errc::degenerate_input, "power iteration on an all-zero dictionary");
  Xoshiro256 rng(seed);
  Tensor v({dict.geometry.in_channels, height, width});
  for (auto& x : v.values()) x = rng.uniform() - 0.5;
  double norm = std::sqrt(dot(v, v));
  for (auto& x : v.values()) x /= norm;

  PowerIterationResult result;
  for (int it = 0; it < iters; ++it) {
    Tensor w = apply_adjoint(dict, apply(dict, v));
    norm = std::sqrt(dot(w, w));
    require(norm > 0.0 && std::isfinite(norm), Errc::degenerate_input, "power iteration collapsed to zero");
    // For a PSD operator ||A v_k|| is nondecreasing; the running max only absorbs rounding.
    result.estimate = std::max(result.estimate, norm);
    result.sequence.push_back(result.estimate);
    for (auto& x : w.values()) x /= norm;
    v = std::move(w);
  }
  return result;
}

struct IstaProblem {
  ImageGrid image;
  KernelBank dictionary;
  double sparsity_weight = 0.05;
  double step_size = 1.0;
  int max_iters = 200;
  double tol = 1e-6;

  std::size_t num_filters() const { return dictionary.geometry.in_channels; }
  Shape code_shape() const { return {num_filters(), image.height(), image.width()}; }
};

/// Builds a problem whose step is kIstaStepSafety / L with L from power iteration.
inline IstaProblem make_ista_problem(ImageGrid image, KernelBank dictionary, double sparsity_weight, int max_iters,
                                     double tol = 1e-6, int power_iters = 200) {
  require(dictionary.geometry.out_channels == 1, Errc::shape_mismatch, "ISTA dictionary must be a decoder bank");
  require(sparsity_weight >= 0.0, Errc::invalid_argument, "sparsity weight must be >= 0");
  require(max_iters >= 1, Errc::invalid_argument, "max_iters must be >= 1");
  require(tol > 0.0, Errc::invalid_argument, "tol must be > 0");
  const auto L = power_iteration_L(dictionary, power_iters, image.height(), image.width()).estimate;
  IstaProblem p{std::move(image), std::move(dictionary), sparsity_weight, kIstaStepSafety / L, max_iters, tol};
  return p;
}

inline void soft_threshold_inplace(Tensor& t, double eps) {
  for (auto& v : t.values()) {
    const double a = std::fabs(v) - eps;
    v = a > 0.0 ? std::copysign(a, v) : 0.0;
  }
}

inline double l1_norm(const Tensor& t) {
  double acc = 0.0;
  for (double v : t.values()) acc += std::fabs(v);
  return acc;
}

inline double zero_fraction(const Tensor& t) {
  std::size_t zeros = 0;
  for (double v : t.values()) zeros += v == 0.0;
  return static_cast<double>(zeros) / static_cast<double>(t.size());
}

inline Tensor reconstruct(const IstaProblem& prob, const Tensor& code) { return apply(prob.dictionary, code); }

inline Tensor residual(const IstaProblem& prob, const Tensor& code) {
  Tensor r = Tensor::from_image(prob.image);
  const Tensor dA = reconstruct(prob, code);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= dA[i];
  return r;
}

inline double ista_objective(const IstaProblem& prob, const Tensor& code) {
  const Tensor r = residual(prob, code);
  return 0.5 * dot(r, r) + prob.sparsity_weight * l1_norm(code);
}

inline Tensor ista_step(const Tensor& code, const IstaProblem& prob) {
  require(code.shape() == prob.code_shape(), Errc::shape_mismatch,
          "ista_step: code " + to_string(code.shape()) + " vs expected " + to_string(prob.code_shape()));
  const Tensor grad = apply_adjoint(prob.dictionary, residual(prob, code));
  Tensor next = code;
  for (std::size_t i = 0; i < next.size(); ++i) next[i] += prob.step_size * grad[i];
  soft_threshold_inplace(next, prob.sparsity_weight * prob.step_size);
  return next;
}

struct IstaTraceRow {
  int iter = 0;
  double objective = 0.0;
  double residual = 0.0;
  double sparsity = 0.0;
};

struct IstaResult {
  Tensor code;
  ImageGrid reconstruction;
  std::vector<IstaTraceRow> trace;
  bool converged = false;
};

/// Iterates from A = 0 until max |A_t - A_{t-1}| < tol or max_iters steps.
inline IstaResult run_ista(const IstaProblem& prob) {
  IstaResult result;
  Tensor code(prob.code_shape());
  for (int it = 1; it <= prob.max_iters; ++it) {
    Tensor next = ista_step(code, prob);
    const double change = max_abs_diff(next, code);
    code = std::move(next);
    const Tensor r = residual(prob, code);
    const double objective = 0.5 * dot(r, r) + prob.sparsity_weight * l1_norm(code);
    if (!std::isfinite(objective))
      fail(Errc::numerical_error, "ISTA objective became non-finite at iteration " + std::to_string(it) +
                                      " (step size " + std::to_string(prob.step_size) + ")");
    result.trace.push_back({it, objective, std::sqrt(dot(r, r)), zero_fraction(code)});
    if (change < prob.tol) {
      result.converged = true;
      break;
    }
  }
  result.reconstruction = reconstruct(prob, code).to_image();
  result.code = std::move(code);
  return result;
}

inline std::string ista_trace_csv(const std::vector<IstaTraceRow>& trace) {
  std::string out = "iter,objective,residual,sparsity\n";
  char buf[160];
  for (const auto& row : trace) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", row.iter, row.objective, row.residual, row.sparsity);
    out += buf;
  }
  return out;
}

// ---- fixed dictionaries for the baseline ----------------------------------------------

/// Gaussian filters, each normalized to unit l2 norm.
inline KernelBank random_unit_dictionary(std::size_t num_filters, std::size_t kernel, std::uint64_t seed) {
  KernelBank bank = KernelBank::decoder(num_filters, kernel);
  Xoshiro256 rng(seed);
  const std::size_t kk = kernel * kernel;
  for (std::size_t m = 0; m < num_filters; ++m) {
    double* w = bank.weights.data() + m * kk;
    double norm = 0.0;
    for (std::size_t i = 0; i < kk; ++i) {
      w[i] = rng.normal();
      norm += w[i] * w[i];
    }
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < kk; ++i) w[i] /= norm;
  }
  return bank;
}

/// Orthonormal 2-D DCT-II basis filters in order of increasing frequency (u + v, then u).
inline KernelBank dct_dictionary(std::size_t num_filters, std::size_t kernel) {
  require(num_filters <= kernel * kernel, Errc::invalid_argument, "DCT dictionary has at most k*k filters");
  std::vector<std::pair<std::size_t, std::size_t>> freqs;
  for (std::size_t s = 0; s <= 2 * (kernel - 1); ++s)
    for (std::size_t u = 0; u < kernel; ++u)
      if (s >= u && s - u < kernel) freqs.emplace_back(u, s - u);
  KernelBank bank = KernelBank::decoder(num_filters, kernel);
  const double n = static_cast<double>(kernel);
  auto basis = [n](std::size_t f, std::size_t x) {
    const double a = f == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
    return a * std::cos(3.141592653589793 * (2.0 * x + 1.0) * f / (2.0 * n));
  };
  for (std::size_t m = 0; m < num_filters; ++m) {
    const auto [fu, fv] = freqs[m];
    for (std::size_t x = 0; x < kernel; ++x)
      for (std::size_t y = 0; y < kernel; ++y) bank.weight(0, m, x, y) = basis(fu, x) * basis(fv, y);
  }
  return bank;
}

/// Single centered delta filter.
inline KernelBank identity_dictionary(std::size_t kernel) {
  KernelBank bank = KernelBank::decoder(1, kernel);
  bank.weight(0, 0, kernel / 2, kernel / 2) = 1.0;
  return bank;
}

}  // namespace p2s
