#pragma once

// Same-size 2-D cross-correlation with zero padding and its exact adjoint.
//
// Weights are laid out [out][in][k][k]. With p = (k - 1) / 2:
//   conv2d:            y[o](r,c) = sum_i sum_{u,v} x[i](r+u-p, c+v-p) * w[o][i](u,v)
//   conv2d_transpose:  maps [out] channels back to [in] channels, <conv2d(a), b> = <a, conv2d_transpose(b)>
//   conv2d_weight_grad: d<conv2d(x), g>/dw
// Loop order is fixed, so results are bitwise reproducible.

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

#include "p2s/error.hpp"
#include "p2s/tensor.hpp"

namespace p2s {

struct ConvGeometry {
  std::size_t out_channels = 0;
  std::size_t in_channels = 0;
  std::size_t kernel = 0;

  std::size_t numel() const noexcept { return out_channels * in_channels * kernel * kernel; }
  std::size_t pad() const noexcept { return (kernel - 1) / 2; }

  friend bool operator==(const ConvGeometry&, const ConvGeometry&) = default;
};

namespace detail {

inline void check_conv_input(const Shape& s, std::size_t channels, const ConvGeometry& g, const char* op) {
  require(s.channels == channels, Errc::shape_mismatch,
          std::string(op) + ": expected " + std::to_string(channels) + " channels, got " + std::to_string(s.channels));
  require(g.kernel % 2 == 1, Errc::invalid_argument, std::string(op) + ": kernel size must be odd");
  require(s.height >= g.kernel && s.width >= g.kernel, Errc::dimension_mismatch,
          std::string(op) + ": spatial size smaller than kernel");
}

// dst[r][c] += sum_{u,v} w[u][v] * src[r+u-p][c+v-p], zero outside src. Requires h, w >= k.
// Each output row is finished before the next, with taps in (u, v) order.
inline void correlate_accumulate(double* dst, const double* src, std::size_t h, std::size_t w, const double* kern,
                                 std::size_t k) {
  const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);
  const auto K = static_cast<std::ptrdiff_t>(k), p = (K - 1) / 2;
  if (k == 3) {
    for (std::ptrdiff_t r = 0; r < H; ++r) {
      double* out = dst + r * W;
      for (std::ptrdiff_t u = 0; u < 3; ++u) {
        const std::ptrdiff_t sr = r + u - 1;
        if (sr < 0 || sr >= H) continue;
        const double* in = src + sr * W;
        const double w0 = kern[3 * u], w1 = kern[3 * u + 1], w2 = kern[3 * u + 2];
        out[0] += w1 * in[0] + w2 * in[1];
        for (std::ptrdiff_t c = 1; c < W - 1; ++c) out[c] += w0 * in[c - 1] + w1 * in[c] + w2 * in[c + 1];
        out[W - 1] += w0 * in[W - 2] + w1 * in[W - 1];
      }
    }
    return;
  }
  for (std::ptrdiff_t r = 0; r < H; ++r) {
    double* out = dst + r * W;
    for (std::ptrdiff_t u = 0; u < K; ++u) {
      const std::ptrdiff_t sr = r + u - p;
      if (sr < 0 || sr >= H) continue;
      const double* in = src + sr * W;
      for (std::ptrdiff_t v = 0; v < K; ++v) {
        const double wt = kern[u * K + v];
        const std::ptrdiff_t dc = v - p;
        const std::ptrdiff_t c0 = std::max<std::ptrdiff_t>(0, -dc), c1 = std::min(W, W - dc);
        for (std::ptrdiff_t c = c0; c < c1; ++c) out[c] += wt * in[c + dc];
      }
    }
  }
}

// grad[u][v] += sum_{r,c} g[r][c] * src[r+u-p][c+v-p].
inline void correlate_weight_grad(double* grad, const double* g, const double* src, std::size_t h, std::size_t w,
                                  std::size_t k) {
  const auto H = static_cast<std::ptrdiff_t>(h), W = static_cast<std::ptrdiff_t>(w);
  const auto K = static_cast<std::ptrdiff_t>(k), p = (K - 1) / 2;
  if (k == 3) {
    double acc[9] = {};
    for (std::ptrdiff_t u = 0; u < 3; ++u) {
      const std::ptrdiff_t r0 = std::max<std::ptrdiff_t>(0, 1 - u), r1 = std::min(H, H + 1 - u);
      double a0 = 0.0, a1 = 0.0, a2 = 0.0;
      for (std::ptrdiff_t r = r0; r < r1; ++r) {
        const double* gr = g + r * W;
        const double* in = src + (r + u - 1) * W;
        double s0 = 0.0, s1 = gr[0] * in[0], s2 = gr[0] * in[1];
        for (std::ptrdiff_t c = 1; c < W - 1; ++c) {
          s0 += gr[c] * in[c - 1];
          s1 += gr[c] * in[c];
          s2 += gr[c] * in[c + 1];
        }
        s0 += gr[W - 1] * in[W - 2];
        s1 += gr[W - 1] * in[W - 1];
        a0 += s0;
        a1 += s1;
        a2 += s2;
      }
      acc[3 * u] = a0;
      acc[3 * u + 1] = a1;
      acc[3 * u + 2] = a2;
    }
    for (int i = 0; i < 9; ++i) grad[i] += acc[i];
    return;
  }
  for (std::ptrdiff_t u = 0; u < K; ++u)
    for (std::ptrdiff_t v = 0; v < K; ++v) {
      const std::ptrdiff_t dr = u - p, dc = v - p;
      const std::ptrdiff_t r0 = std::max<std::ptrdiff_t>(0, -dr), r1 = std::min(H, H - dr);
      const std::ptrdiff_t c0 = std::max<std::ptrdiff_t>(0, -dc), c1 = std::min(W, W - dc);
      double acc = 0.0;
      for (std::ptrdiff_t r = r0; r < r1; ++r) {
        const double* gr = g + r * W;
        const double* in = src + (r + dr) * W + dc;
        double row = 0.0;
        for (std::ptrdiff_t c = c0; c < c1; ++c) row += gr[c] * in[c];
        acc += row;
      }
      grad[u * K + v] += acc;
    }
}

}  // namespace detail

inline Tensor conv2d(const Tensor& input, std::span<const double> weights, const ConvGeometry& g) {
  detail::check_conv_input(input.shape(), g.in_channels, g, "conv2d");
  require(weights.size() == g.numel(), Errc::shape_mismatch, "conv2d: weight count mismatch");
  const Shape s = input.shape();
  Tensor out({g.out_channels, s.height, s.width});
  const std::size_t kk = g.kernel * g.kernel;
  for (std::size_t o = 0; o < g.out_channels; ++o)
    for (std::size_t i = 0; i < g.in_channels; ++i)
      detail::correlate_accumulate(out.channel(o), input.channel(i), s.height, s.width,
                                   weights.data() + (o * g.in_channels + i) * kk, g.kernel);
  return out;
}

inline Tensor conv2d_transpose(const Tensor& input, std::span<const double> weights, const ConvGeometry& g) {
  detail::check_conv_input(input.shape(), g.out_channels, g, "conv2d_transpose");
  require(weights.size() == g.numel(), Errc::shape_mismatch, "conv2d_transpose: weight count mismatch");
  const Shape s = input.shape();
  Tensor out({g.in_channels, s.height, s.width});
  const std::size_t kk = g.kernel * g.kernel;
  // The adjoint correlates with the kernel flipped in both axes.
  std::vector<double> flipped(kk);
  for (std::size_t i = 0; i < g.in_channels; ++i)
    for (std::size_t o = 0; o < g.out_channels; ++o) {
      const double* w = weights.data() + (o * g.in_channels + i) * kk;
      for (std::size_t t = 0; t < kk; ++t) flipped[t] = w[kk - 1 - t];
      detail::correlate_accumulate(out.channel(i), input.channel(o), s.height, s.width, flipped.data(), g.kernel);
    }
  return out;
}

/// Gradient of <conv2d(input, w), grad_out> with respect to w, accumulated into `grad_w`.
inline void conv2d_weight_grad(const Tensor& input, const Tensor& grad_out, const ConvGeometry& g,
                               std::span<double> grad_w) {
  require(grad_w.size() == g.numel(), Errc::shape_mismatch, "conv2d_weight_grad: weight count mismatch");
  const Shape s = input.shape();
  const std::size_t kk = g.kernel * g.kernel;
  for (std::size_t o = 0; o < g.out_channels; ++o)
    for (std::size_t i = 0; i < g.in_channels; ++i)
      detail::correlate_weight_grad(grad_w.data() + (o * g.in_channels + i) * kk, grad_out.channel(o),
                                    input.channel(i), s.height, s.width, g.kernel);
}

}  // namespace p2s
