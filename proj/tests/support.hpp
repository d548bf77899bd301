#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "p2s/image.hpp"
#include "p2s/rng.hpp"
#include "p2s/tensor.hpp"

namespace p2s::test {

inline ImageGrid random_image(std::size_t h, std::size_t w, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Xoshiro256 rng(seed);
  std::vector<double> v(h * w);
  for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
  return ImageGrid(h, w, std::move(v));
}

inline Tensor random_tensor(Shape s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Xoshiro256 rng(seed);
  Tensor t(s);
  for (auto& x : t.values()) x = lo + (hi - lo) * rng.uniform();
  return t;
}

/// Fresh per-test scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("p2s_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Direct evaluation: a full 2-D 11x11 Gaussian window at every valid position,
// local statistics as weighted sums, no separable filtering.
inline double naive_ssim(const ImageGrid& x, const ImageGrid& y) {
  const int n = 11, half = 5;
  const double sigma = 1.5;
  double w[11][11], total = 0.0;
  for (int u = 0; u < n; ++u)
    for (int v = 0; v < n; ++v) {
      w[u][v] = std::exp(-((u - half) * (u - half) + (v - half) * (v - half)) / (2 * sigma * sigma));
      total += w[u][v];
    }
  for (auto& row : w)
    for (double& e : row) e /= total;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double acc = 0.0;
  int count = 0;
  for (std::size_t r = 0; r + n <= x.height(); ++r)
    for (std::size_t c = 0; c + n <= x.width(); ++c) {
      double mx = 0, my = 0;
      for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v) {
          mx += w[u][v] * x(r + u, c + v);
          my += w[u][v] * y(r + u, c + v);
        }
      double vx = 0, vy = 0, cxy = 0;
      for (int u = 0; u < n; ++u)
        for (int v = 0; v < n; ++v) {
          const double dx = x(r + u, c + v) - mx, dy = y(r + u, c + v) - my;
          vx += w[u][v] * dx * dx;
          vy += w[u][v] * dy * dy;
          cxy += w[u][v] * dx * dy;
        }
      acc += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++count;
    }
  return acc / count;
}

}  // namespace p2s::test
