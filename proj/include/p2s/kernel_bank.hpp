#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "p2s/conv.hpp"
#include "p2s/error.hpp"

namespace p2s {

/// A bank of M square filters plus optional per-filter soft thresholds.
/// Encoders map one image channel to M code channels (geometry M x 1 x k x k);
/// decoders map M code channels back to the image (1 x M x k x k).
struct KernelBank {
  ConvGeometry geometry;
  std::vector<double> weights;
  std::vector<double> thresholds;

  static KernelBank encoder(std::size_t num_filters, std::size_t kernel) {
    return make({num_filters, 1, kernel});
  }
  static KernelBank decoder(std::size_t num_filters, std::size_t kernel) {
    return make({1, num_filters, kernel});
  }

  static KernelBank make(ConvGeometry g) {
    require(g.kernel % 2 == 1, Errc::invalid_argument, "kernel size must be odd");
    require(g.out_channels > 0 && g.in_channels > 0, Errc::invalid_argument, "bank needs at least one filter");
    return {g, std::vector<double>(g.numel(), 0.0), {}};
  }

  std::size_t num_filters() const noexcept {
    return geometry.out_channels == 1 ? geometry.in_channels : geometry.out_channels;
  }
  std::size_t kernel_size() const noexcept { return geometry.kernel; }

  double& weight(std::size_t out, std::size_t in, std::size_t u, std::size_t v) {
    return weights[((out * geometry.in_channels + in) * geometry.kernel + u) * geometry.kernel + v];
  }
  double weight(std::size_t out, std::size_t in, std::size_t u, std::size_t v) const {
    return weights[((out * geometry.in_channels + in) * geometry.kernel + u) * geometry.kernel + v];
  }

  friend bool operator==(const KernelBank&, const KernelBank&) = default;
};

inline Tensor apply(const KernelBank& bank, const Tensor& input) {
  return conv2d(input, bank.weights, bank.geometry);
}

inline Tensor apply_adjoint(const KernelBank& bank, const Tensor& input) {
  return conv2d_transpose(input, bank.weights, bank.geometry);
}

/// The bank whose forward convolution equals `scale` times the adjoint of `bank`:
/// channels swap and every kernel is flipped in both axes.
inline KernelBank scaled_adjoint_bank(const KernelBank& bank, double scale) {
  const auto& g = bank.geometry;
  KernelBank out = KernelBank::make({g.in_channels, g.out_channels, g.kernel});
  const std::size_t k = g.kernel;
  for (std::size_t o = 0; o < g.out_channels; ++o)
    for (std::size_t i = 0; i < g.in_channels; ++i)
      for (std::size_t u = 0; u < k; ++u)
        for (std::size_t v = 0; v < k; ++v) out.weight(i, o, k - 1 - u, k - 1 - v) = scale * bank.weight(o, i, u, v);
  return out;
}

}  // namespace p2s
