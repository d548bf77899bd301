#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "p2s/error.hpp"
#include "p2s/image.hpp"
#include "p2s/rng.hpp"

namespace p2s {

struct NoiseSpec {
  double peak_lambda = 20.0;
  std::uint64_t seed = 0;
};

/// Means below this use Knuth's multiplication method; larger means use PTRS.
inline constexpr double kPoissonSmallMeanLimit = 30.0;

namespace detail {

inline std::uint64_t poisson_knuth(double mean, Xoshiro256& rng) {
  const double limit = std::exp(-mean);
  std::uint64_t k = 0;
  double prod = rng.uniform();
  while (prod > limit) {
    ++k;
    prod *= rng.uniform();
  }
  return k;
}

// Hörmann's transformed rejection with squeeze (PTRS), valid for mean >= 10.
inline std::uint64_t poisson_ptrs(double mean, Xoshiro256& rng) {
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double invalpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  for (;;) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::fabs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::uint64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    const double lhs = std::log(v) + std::log(invalpha) - std::log(a / (us * us) + b);
    const double rhs = -mean + k * loglam - std::lgamma(k + 1.0);
    if (lhs <= rhs) return static_cast<std::uint64_t>(k);
  }
}

}  // namespace detail

/// One Poisson(mean) sample. Deterministic for a given generator state.
inline std::uint64_t poisson_draw(double mean, Xoshiro256& rng) {
  require(std::isfinite(mean) && mean >= 0.0, Errc::invalid_argument,
          "poisson mean must be finite and >= 0, got " + std::to_string(mean));
  if (mean == 0.0) return 0;
  if (mean < kPoissonSmallMeanLimit) return detail::poisson_knuth(mean, rng);
  return detail::poisson_ptrs(mean, rng);
}

/// Peak-count noise: y = z / lambda with z ~ Poisson(lambda * x), pixels drawn in row-major order.
inline ImageGrid make_noisy(const ImageGrid& clean, const NoiseSpec& spec) {
  require(std::isfinite(spec.peak_lambda) && spec.peak_lambda > 0.0, Errc::invalid_argument,
          "peak lambda must be > 0");
  Xoshiro256 rng(spec.seed);
  std::vector<double> out(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const auto z = poisson_draw(spec.peak_lambda * clean.data()[i], rng);
    out[i] = static_cast<double>(z) / spec.peak_lambda;
  }
  return ImageGrid(clean.height(), clean.width(), std::move(out));
}

}  // namespace p2s
