#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "p2s/error.hpp"
#include "p2s/image.hpp"

namespace p2s {

struct MetricReport {
  double psnr_db = 0.0;
  double ssim = 0.0;
};

/// Formats a real for CSV output. Infinite PSNR is written as "inf".
inline std::string format_real(double v, int digits = 6) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

inline std::string metric_csv_header() { return "image_id,lambda,psnr_db,ssim"; }

inline std::string metric_csv_row(const std::string& image_id, double lambda, const MetricReport& m) {
  return image_id + "," + format_real(lambda, 3) + "," + format_real(m.psnr_db) + "," + format_real(m.ssim);
}

inline double mean_squared_error(const ImageGrid& ref, const ImageGrid& test) {
  require(ref.same_shape(test), Errc::dimension_mismatch, "metric inputs differ in size");
  double acc = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    const double d = ref.data()[i] - test.data()[i];
    acc += d * d;
  }
  return acc / static_cast<double>(ref.size());
}

/// 10 log10(peak^2 / MSE). Identical images return +infinity.
inline double psnr(const ImageGrid& ref, const ImageGrid& test, double peak = 1.0) {
  require(peak > 0.0, Errc::invalid_argument, "psnr peak must be positive");
  const double mse = mean_squared_error(ref, test);
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

struct SsimParams {
  static constexpr int window = 11;
  static constexpr double sigma = 1.5;
  static constexpr double k1 = 0.01;
  static constexpr double k2 = 0.03;
  static constexpr double dynamic_range = 1.0;
};

/// Normalized 1-D Gaussian taps; the 2-D window is their outer product.
inline std::array<double, SsimParams::window> ssim_gaussian_taps() {
  std::array<double, SsimParams::window> taps{};
  constexpr int half = SsimParams::window / 2;
  double total = 0.0;
  for (int i = 0; i < SsimParams::window; ++i) {
    const double d = i - half;
    taps[i] = std::exp(-(d * d) / (2.0 * SsimParams::sigma * SsimParams::sigma));
    total += taps[i];
  }
  for (auto& t : taps) t /= total;
  return taps;
}

namespace detail {

// Valid-mode separable Gaussian filter: output is (H - 10) x (W - 10).
inline std::vector<double> gaussian_valid(const std::vector<double>& in, std::size_t h, std::size_t w) {
  constexpr std::size_t n = SsimParams::window;
  const auto taps = ssim_gaussian_taps();
  const std::size_t oh = h - n + 1, ow = w - n + 1;
  std::vector<double> rows(h * ow, 0.0);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (std::size_t t = 0; t < n; ++t) acc += taps[t] * in[r * w + c + t];
      rows[r * ow + c] = acc;
    }
  std::vector<double> out(oh * ow, 0.0);
  for (std::size_t r = 0; r < oh; ++r)
    for (std::size_t c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (std::size_t t = 0; t < n; ++t) acc += taps[t] * rows[(r + t) * ow + c];
      out[r * ow + c] = acc;
    }
  return out;
}

}  // namespace detail

/// Mean SSIM over all valid 11x11 Gaussian-window positions (sigma 1.5, K1 0.01, K2 0.03, range 1).
inline double ssim(const ImageGrid& ref, const ImageGrid& test) {
  require(ref.same_shape(test), Errc::dimension_mismatch, "metric inputs differ in size");
  constexpr std::size_t n = SsimParams::window;
  require(ref.height() >= n && ref.width() >= n, Errc::dimension_mismatch,
          "image smaller than the 11x11 SSIM window");
  const std::size_t h = ref.height(), w = ref.width();
  const auto& x = ref.values();
  const auto& y = test.values();
  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto mu_x = detail::gaussian_valid(x, h, w);
  const auto mu_y = detail::gaussian_valid(y, h, w);
  const auto e_xx = detail::gaussian_valid(xx, h, w);
  const auto e_yy = detail::gaussian_valid(yy, h, w);
  const auto e_xy = detail::gaussian_valid(xy, h, w);
  const double c1 = (SsimParams::k1 * SsimParams::dynamic_range) * (SsimParams::k1 * SsimParams::dynamic_range);
  const double c2 = (SsimParams::k2 * SsimParams::dynamic_range) * (SsimParams::k2 * SsimParams::dynamic_range);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_x.size(); ++i) {
    const double mxx = mu_x[i] * mu_x[i];
    const double myy = mu_y[i] * mu_y[i];
    const double mxy = mu_x[i] * mu_y[i];
    const double var_x = e_xx[i] - mxx;
    const double var_y = e_yy[i] - myy;
    const double cov = e_xy[i] - mxy;
    total += ((2.0 * mxy + c1) * (2.0 * cov + c2)) / ((mxx + myy + c1) * (var_x + var_y + c2));
  }
  return total / static_cast<double>(mu_x.size());
}

inline MetricReport evaluate(const ImageGrid& clean, const ImageGrid& estimate) {
  return {psnr(clean, estimate, 1.0), ssim(clean, estimate)};
}

}  // namespace p2s
