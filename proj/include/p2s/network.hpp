#pragma once

// Unrolled convolutional ISTA network. With code A_0 = 0:
//   A_i = S_eps( A_{i-1} + Enc(Y - Dec(A_{i-1})) ),  i = 1..T
//   f(Y) = Dec(A_T)
// Enc is a 1 -> M convolution, Dec is M -> 1, eps holds one threshold per filter.
// No bias terms. In exp-output mode the image estimate is exp(f(Y)) and f is a
// log-intensity.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "p2s/adam.hpp"
#include "p2s/autodiff.hpp"
#include "p2s/checkpoint.hpp"
#include "p2s/error.hpp"
#include "p2s/image.hpp"
#include "p2s/ista.hpp"
#include "p2s/kernel_bank.hpp"
#include "p2s/rng.hpp"
#include "p2s/tensor.hpp"

namespace p2s {

enum class WeightInit {
  /// Decoder: fan-in uniform, unit-l2 filters. Encoder: 0.99/L times the decoder adjoint.
  tied,
  /// Both banks fan-in uniform; the decoder is unit-l2 normalized.
  uniform,
};

inline const char* to_string(WeightInit w) { return w == WeightInit::tied ? "tied" : "uniform"; }

inline WeightInit weight_init_from_string(const std::string& s) {
  if (s == "tied") return WeightInit::tied;
  if (s == "uniform") return WeightInit::uniform;
  fail(Errc::invalid_argument, "unknown weight init scheme '" + s + "' (expected tied|uniform)");
}

struct NetConfig {
  std::size_t num_filters = 64;
  std::size_t kernel_size = 3;
  int unroll_steps = 10;
  double threshold_init = 1e-2;
  WeightInit weight_init = WeightInit::tied;
  std::uint64_t seed = 0;
  bool exp_output = false;
  bool learn_thresholds = true;

  void validate() const {
    require(unroll_steps >= 1, Errc::invalid_argument, "unroll_steps must be >= 1");
    require(num_filters >= 1, Errc::invalid_argument, "num_filters must be >= 1");
    require(kernel_size % 2 == 1, Errc::invalid_argument, "kernel_size must be odd");
    require(threshold_init >= 0.0, Errc::invalid_argument, "threshold_init must be >= 0");
  }

  friend bool operator==(const NetConfig&, const NetConfig&) = default;
};

struct P2SNetwork {
  NetConfig config;
  KernelBank encoder;  // M x 1 x k x k, carries the M thresholds
  KernelBank decoder;  // 1 x M x k x k

  std::size_t num_filters() const { return encoder.geometry.out_channels; }

  friend bool operator==(const P2SNetwork&, const P2SNetwork&) = default;
};

/// Probe size used to estimate L for the tied initialization.
inline constexpr std::size_t kInitProbeSize = 32;

inline P2SNetwork init_network(const NetConfig& cfg) {
  cfg.validate();
  const std::size_t m = cfg.num_filters, k = cfg.kernel_size, kk = k * k;
  P2SNetwork net{cfg, KernelBank::encoder(m, k), KernelBank::decoder(m, k)};
  Xoshiro256 rng(cfg.seed);

  const double dec_bound = 1.0 / std::sqrt(static_cast<double>(m * kk));
  for (auto& w : net.decoder.weights) w = dec_bound * (2.0 * rng.uniform() - 1.0);
  for (std::size_t f = 0; f < m; ++f) {
    double norm = 0.0;
    for (std::size_t i = 0; i < kk; ++i) norm += net.decoder.weights[f * kk + i] * net.decoder.weights[f * kk + i];
    norm = std::sqrt(norm);
    if (norm > 0.0)
      for (std::size_t i = 0; i < kk; ++i) net.decoder.weights[f * kk + i] /= norm;
  }

  if (cfg.weight_init == WeightInit::tied) {
    const double L = power_iteration_L(net.decoder, 100, kInitProbeSize, kInitProbeSize, cfg.seed).estimate;
    net.encoder = scaled_adjoint_bank(net.decoder, kIstaStepSafety / L);
  } else {
    const double enc_bound = 1.0 / std::sqrt(static_cast<double>(kk));
    for (auto& w : net.encoder.weights) w = enc_bound * (2.0 * rng.uniform() - 1.0);
  }
  net.encoder.thresholds.assign(m, cfg.threshold_init);
  return net;
}

/// Network parameters bound as leaves of one tape.
struct NetVars {
  Var encoder;
  Var decoder;
  Var thresholds;
};

inline NetVars bind_parameters(Tape& tape, const P2SNetwork& net) {
  const auto& eg = net.encoder.geometry;
  const auto& dg = net.decoder.geometry;
  NetVars v;
  v.encoder = tape.parameter(Tensor({eg.out_channels * eg.in_channels, eg.kernel, eg.kernel}, net.encoder.weights));
  v.decoder = tape.parameter(Tensor({dg.out_channels * dg.in_channels, dg.kernel, dg.kernel}, net.decoder.weights));
  Tensor eps({net.num_filters(), 1, 1}, net.encoder.thresholds);
  v.thresholds = net.config.learn_thresholds ? tape.parameter(std::move(eps)) : tape.constant(std::move(eps));
  return v;
}

struct ForwardResult {
  Var output;  // Dec(A_T), shape (1, H, W)
  Tensor code; // A_T, shape (M, H, W)
};

namespace detail {

inline void check_network_input(const P2SNetwork& net, const Tensor& input) {
  require(input.shape().channels == 1, Errc::shape_mismatch, "network input must be single-channel");
  require(input.shape().height >= net.config.kernel_size && input.shape().width >= net.config.kernel_size,
          Errc::dimension_mismatch, "image smaller than the kernel size");
}

inline void check_step_finite(const Tensor& code, int step) {
  if (!code.all_finite()) fail(Errc::numerical_error, "non-finite activation in unrolled step " + std::to_string(step));
}

}  // namespace detail

/// Recorded forward pass. A_0 = 0, so step 1 reduces to S(Enc(Y)) exactly.
inline ForwardResult forward(const P2SNetwork& net, const NetVars& vars, const Var& input) {
  detail::check_network_input(net, input.value());
  const auto& eg = net.encoder.geometry;
  const auto& dg = net.decoder.geometry;
  Var code = soft_threshold(conv2d(input, vars.encoder, eg), vars.thresholds);
  detail::check_step_finite(code.value(), 1);
  for (int step = 2; step <= net.config.unroll_steps; ++step) {
    Var resid = sub(input, conv2d(code, vars.decoder, dg));
    code = soft_threshold(add(code, conv2d(resid, vars.encoder, eg)), vars.thresholds);
    detail::check_step_finite(code.value(), step);
  }
  Var out = conv2d(code, vars.decoder, dg);
  return {out, code.value()};
}

struct InferenceResult {
  Tensor output;
  Tensor code;
};

/// Same arithmetic as forward() without recording; results are bitwise equal.
inline InferenceResult forward_inference(const P2SNetwork& net, const Tensor& input,
                                         const std::vector<double>* threshold_override = nullptr) {
  detail::check_network_input(net, input);
  const auto& eps = threshold_override ? *threshold_override : net.encoder.thresholds;
  require(eps.size() == net.num_filters(), Errc::shape_mismatch, "threshold count mismatch");
  const std::size_t plane = input.shape().plane();
  auto shrink = [&](Tensor& t) {
    for (std::size_t c = 0; c < eps.size(); ++c) {
      double* p = t.channel(c);
      for (std::size_t i = 0; i < plane; ++i) {
        const double a = std::fabs(p[i]) - eps[c];
        p[i] = a > 0.0 ? std::copysign(a, p[i]) : 0.0;
      }
    }
  };
  Tensor code = apply(net.encoder, input);
  shrink(code);
  detail::check_step_finite(code, 1);
  for (int step = 2; step <= net.config.unroll_steps; ++step) {
    Tensor resid = input;
    const Tensor dec = apply(net.decoder, code);
    for (std::size_t i = 0; i < resid.size(); ++i) resid[i] -= dec[i];
    const Tensor upd = apply(net.encoder, resid);
    for (std::size_t i = 0; i < code.size(); ++i) code[i] += upd[i];
    shrink(code);
    detail::check_step_finite(code, step);
  }
  Tensor out = apply(net.decoder, code);
  return {std::move(out), std::move(code)};
}

/// Maps raw network output to intensity: identity, or exp in exp-output mode.
inline Tensor to_intensity(const P2SNetwork& net, Tensor raw) {
  if (net.config.exp_output)
    for (auto& v : raw.values()) v = std::exp(v);
  return raw;
}

/// Inference-mode estimate of the clean image, clamped to [0, 1].
inline ImageGrid denoise(const P2SNetwork& net, const ImageGrid& noisy) {
  const auto res = forward_inference(net, Tensor::from_image(noisy));
  return clamp01(to_intensity(net, res.output).to_image());
}

/// Trainable parameters with gradients taken from a tape after backward().
inline std::vector<ParamRef> parameter_refs(P2SNetwork& net, const NetVars& vars) {
  std::vector<ParamRef> refs;
  refs.push_back({"encoder.weights", net.encoder.weights, vars.encoder.grad().span(), false});
  refs.push_back({"decoder.weights", net.decoder.weights, vars.decoder.grad().span(), false});
  if (net.config.learn_thresholds)
    refs.push_back({"encoder.thresholds", net.encoder.thresholds, vars.thresholds.grad().span(), true});
  return refs;
}

inline std::vector<NamedBank> checkpoint_banks(const P2SNetwork& net) {
  return {{"encoder", net.encoder}, {"decoder", net.decoder}};
}

/// Restores weights from checkpoint banks into a network built from `cfg`.
inline P2SNetwork network_from_banks(const NetConfig& cfg, const std::vector<NamedBank>& banks) {
  P2SNetwork net{cfg, {}, {}};
  for (const auto& [name, bank] : banks) {
    if (name == "encoder") net.encoder = bank;
    else if (name == "decoder") net.decoder = bank;
  }
  require(!net.encoder.weights.empty() && !net.decoder.weights.empty(), Errc::corrupt_header,
          "checkpoint lacks encoder or decoder bank");
  require(net.encoder.geometry.kernel == net.decoder.geometry.kernel, Errc::shape_mismatch,
          "encoder and decoder kernel sizes differ");
  require(net.encoder.num_filters() == net.decoder.num_filters(), Errc::shape_mismatch,
          "encoder and decoder filter counts differ");
  net.config.num_filters = net.encoder.num_filters();
  net.config.kernel_size = net.encoder.geometry.kernel;
  return net;
}

}  // namespace p2s
