#pragma once

// Single-image self-supervised training. Each iteration draws a fresh neighbor
// pair (g1, g2) and minimizes
//   L = L_poisson(f(g1 Y), g2 Y) + L_l1(f(g1 Y), g2 Y) + mu_N * L_N
// with Adam. Loss toggles switch individual terms off for ablations.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "p2s/adam.hpp"
#include "p2s/autodiff.hpp"
#include "p2s/checkpoint.hpp"
#include "p2s/error.hpp"
#include "p2s/image.hpp"
#include "p2s/losses.hpp"
#include "p2s/metrics.hpp"
#include "p2s/neighbor.hpp"
#include "p2s/network.hpp"
#include "p2s/rng.hpp"

namespace p2s {

struct LossToggles {
  bool use_poisson = true;
  bool use_l1 = true;
  bool use_neighbor = true;

  friend bool operator==(const LossToggles&, const LossToggles&) = default;
};

/// Named ablations. The neighbor regularizer stays on in all of them.
inline LossToggles loss_toggles_from_string(const std::string& name) {
  if (name == "full") return {true, true, true};
  if (name == "poisson") return {true, false, true};
  if (name == "l1") return {false, true, true};
  fail(Errc::invalid_argument, "unknown loss '" + name + "' (expected full|poisson|l1)");
}

inline std::string to_string(const LossToggles& t) {
  if (t.use_poisson && t.use_l1) return "full";
  if (t.use_poisson) return "poisson";
  if (t.use_l1) return "l1";
  return "neighbor";
}

struct TrainConfig {
  int iterations = 5500;
  double learning_rate = 1e-4;
  double mu_n = 2.0;
  int neighbor_block = 2;
  std::uint64_t seed = 0;
  int eval_every = 100;
  LossToggles toggles;
  std::string checkpoint_path;  // empty: no periodic checkpoints

  void validate() const {
    require(iterations >= 0, Errc::invalid_argument, "iterations must be >= 0");
    require(learning_rate > 0.0, Errc::invalid_argument, "learning_rate must be > 0");
    require(mu_n >= 0.0, Errc::invalid_argument, "mu_N must be >= 0");
    require(neighbor_block == 2, Errc::invalid_argument, "only neighbor_block = 2 is supported");
    require(eval_every >= 1, Errc::invalid_argument, "eval_every must be >= 1");
  }
};

struct LossRow {
  int iter = 0;
  double total = 0.0;
  double poisson = 0.0;
  double l1 = 0.0;
  double neighbor = 0.0;
  std::optional<double> psnr;
};

struct DenoiseReport {
  ImageGrid denoised;
  std::vector<LossRow> loss_trace;
  std::optional<MetricReport> metrics;
  double wall_time = 0.0;
  NetConfig net_config;
  TrainConfig train_config;
  P2SNetwork network;
};

/// Raised when the loss or a gradient turns non-finite. Carries the parameters
/// from before the failing iteration.
class TrainingAborted : public Error {
 public:
  TrainingAborted(int iteration, P2SNetwork last_good, const std::string& why)
      : Error(Errc::training_aborted, "iteration " + std::to_string(iteration) + ": " + why),
        iteration_(iteration),
        last_good_(std::move(last_good)) {}

  int iteration() const noexcept { return iteration_; }
  const P2SNetwork& last_good() const noexcept { return last_good_; }

 private:
  int iteration_;
  P2SNetwork last_good_;
};

struct LossTerms {
  Var total;
  double poisson = 0.0;
  double l1 = 0.0;
  double neighbor = 0.0;
};

/// Assembles the training loss for one pair on `vars`' tape. `full_output` is the
/// detached full-resolution intensity estimate f(Y).
inline LossTerms assemble_loss(const P2SNetwork& net, const NetVars& vars, const SubsamplePair& pair,
                               const Tensor& full_output, const TrainConfig& cfg) {
  Tape& tape = vars.encoder.tape();
  const Var input = tape.constant(Tensor::from_image(pair.g1));
  const Var raw = forward(net, vars, input).output;
  const Var intensity = net.config.exp_output ? exp(raw) : raw;
  const Tensor target = Tensor::from_image(pair.g2);

  LossTerms terms;
  std::optional<Var> total;
  auto accumulate = [&](const Var& term) { total = total ? add(*total, term) : term; };
  if (cfg.toggles.use_poisson) {
    const Var lp = loss_poisson(raw, target);
    terms.poisson = lp.item();
    accumulate(lp);
  }
  if (cfg.toggles.use_l1) {
    const Var l1 = loss_l1(intensity, target);
    terms.l1 = l1.item();
    accumulate(l1);
  }
  if (cfg.toggles.use_neighbor) {
    const Var ln = neighbor_regularizer(intensity, target, full_output, pair.selection);
    terms.neighbor = ln.item();
    accumulate(scale(ln, cfg.mu_n));
  }
  require(total.has_value(), Errc::invalid_argument, "all loss terms are disabled");
  terms.total = *total;
  return terms;
}

inline std::string loss_trace_csv(const std::vector<LossRow>& trace) {
  std::string out = "iter,total,poisson,l1,neighbor,psnr\n";
  char buf[256];
  for (const auto& row : trace) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,", row.iter, row.total, row.poisson, row.l1,
                  row.neighbor);
    out += buf;
    if (row.psnr) {
      std::snprintf(buf, sizeof buf, "%.17g", *row.psnr);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

using TrainObserver = std::function<void(const LossRow&, const P2SNetwork&)>;

inline DenoiseReport train(const ImageGrid& noisy, const std::optional<ImageGrid>& clean, const NetConfig& net_cfg,
                           const TrainConfig& train_cfg, const TrainObserver& observer = {}) {
  net_cfg.validate();
  train_cfg.validate();
  if (clean) require(clean->same_shape(noisy), Errc::dimension_mismatch, "clean and noisy images differ in size");
  require(noisy.height() >= 2 * net_cfg.kernel_size && noisy.width() >= 2 * net_cfg.kernel_size,
          Errc::dimension_mismatch, "image too small for the half-resolution training pass");
  const auto start = std::chrono::steady_clock::now();

  DenoiseReport report;
  report.net_config = net_cfg;
  report.train_config = train_cfg;
  P2SNetwork net = init_network(net_cfg);
  AdamState adam;
  adam.hyper.learning_rate = train_cfg.learning_rate;
  Xoshiro256 pair_rng(derive_seed(train_cfg.seed, SeedPurpose::neighbor_pairs));
  const Tensor noisy_t = Tensor::from_image(noisy);

  for (int it = 1; it <= train_cfg.iterations; ++it) {
    const SubsamplePair pair = neighbor_downsample(noisy, pair_rng);
    Tensor full;
    if (train_cfg.toggles.use_neighbor) full = to_intensity(net, forward_inference(net, noisy_t).output);

    Tape tape;
    const NetVars vars = bind_parameters(tape, net);
    LossTerms terms;
    try {
      terms = assemble_loss(net, vars, pair, full, train_cfg);
    } catch (const Error& e) {
      throw TrainingAborted(it, net, e.what());
    }
    const double total = terms.total.item();
    if (!std::isfinite(total)) throw TrainingAborted(it, net, "non-finite loss");
    tape.backward(terms.total);
    const P2SNetwork before = net;
    try {
      adam_step(parameter_refs(net, vars), adam);
    } catch (const Error& e) {
      throw TrainingAborted(it, before, e.what());
    }

    LossRow row{it, total, terms.poisson, terms.l1, terms.neighbor, std::nullopt};
    const bool eval_point = it % train_cfg.eval_every == 0 || it == train_cfg.iterations;
    if (eval_point && clean) row.psnr = psnr(*clean, denoise(net, noisy));
    if (eval_point && !train_cfg.checkpoint_path.empty())
      save_checkpoint(train_cfg.checkpoint_path, checkpoint_banks(net));
    report.loss_trace.push_back(row);
    if (observer) observer(row, net);
  }

  report.denoised = denoise(net, noisy);
  if (clean) report.metrics = evaluate(*clean, report.denoised);
  report.network = std::move(net);
  report.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace p2s
