#pragma once

#include <cmath>
#include <vector>

#include "p2s/image.hpp"

namespace p2s {

/// Synthetic piecewise-smooth test image: four nested ellipses with intensity
/// levels 0.25 / 0.5 / 0.75 / 1.0 over a dark background, modulated by a gentle
/// vertical shading. `variant` rotates and shifts the ellipses. Normalized to max 1.
inline ImageGrid ellipse_phantom(std::size_t height = 128, std::size_t width = 128, int variant = 0) {
  constexpr double kLevels[4] = {0.25, 0.5, 0.75, 1.0};
  constexpr double kScales[4] = {0.88, 0.66, 0.44, 0.22};
  const double angle = 0.35 + 0.6 * variant;
  const double ca = std::cos(angle), sa = std::sin(angle);
  const double cy = 0.5 * height + 0.03 * height * std::sin(1.7 * variant);
  const double cx = 0.5 * width + 0.03 * width * std::cos(1.3 * variant);
  const double ay = 0.5 * height, ax = 0.42 * width;
  std::vector<double> data(height * width);
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c) {
      const double dy = (r + 0.5) - cy, dx = (c + 0.5) - cx;
      const double u = ca * dx + sa * dy, v = -sa * dx + ca * dy;
      double level = 0.05;
      for (int e = 0; e < 4; ++e) {
        const double qx = u / (kScales[e] * ax), qy = v / (kScales[e] * ay);
        if (qx * qx + qy * qy <= 1.0) level = kLevels[e];
      }
      const double shade = 0.85 + 0.15 * (static_cast<double>(r) / static_cast<double>(height - 1 ? height - 1 : 1));
      data[r * width + c] = level * shade;
    }
  return normalize(ImageGrid(height, width, std::move(data)));
}

}  // namespace p2s
