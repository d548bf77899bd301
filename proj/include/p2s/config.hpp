#pragma once

// Resolved run configuration. Every tunable lives in one JSON document with the
// sections below; layers are applied in order defaults < manifest < TOML file <
// command-line flags. Unknown keys and type mismatches are rejected so a typo in
// a config file cannot silently fall back to a default.
//
//   seed                 root seed, see seed derivation below
//   [network]            num_filters, kernel_size, unroll_steps, threshold_init,
//                        weight_init (tied|uniform), exp_output, learn_thresholds
//   [train]              iterations, learning_rate, mu_n, neighbor_block,
//                        eval_every, loss (full|poisson|l1), checkpoint
//   [noise]              lambda, input (auto|intensity|counts)
//   [ista]               filters, kernel_size, lambda_s, iters, tol,
//                        dictionary (random|dct|identity)
//   [output]             bit_depth (8|16)
//   [bench]              datasets, lambdas, methods
//
// Seed derivation from the root seed S:
//   noise draws        derive_seed(S, noise, cell)
//   weight init        derive_seed(S, weight_init)
//   neighbor pairs     derive_seed(S, neighbor_pairs)   (inside train)
//   ISTA dictionary    derive_seed(S, ista_dictionary)

#include <cstdint>
#include <string>

#include "json.hpp"
#include "p2s/error.hpp"
#include "p2s/network.hpp"
#include "p2s/rng.hpp"
#include "p2s/trainer.hpp"

namespace p2s {

using Json = nlohmann::json;

inline Json default_config() {
  return Json{
      {"seed", 0},
      {"network",
       {{"num_filters", 64},
        {"kernel_size", 3},
        {"unroll_steps", 10},
        {"threshold_init", 1e-2},
        {"weight_init", "tied"},
        {"exp_output", false},
        {"learn_thresholds", true}}},
      {"train",
       {{"iterations", 5500},
        {"learning_rate", 1e-4},
        {"mu_n", 2.0},
        {"neighbor_block", 2},
        {"eval_every", 100},
        {"loss", "full"},
        {"checkpoint", true}}},
      {"noise", {{"lambda", 20.0}, {"input", "auto"}}},
      {"ista",
       {{"filters", 64}, {"kernel_size", 3}, {"lambda_s", 0.05}, {"iters", 200}, {"tol", 1e-6}, {"dictionary", "random"}}},
      {"output", {{"bit_depth", 16}}},
      {"bench", {{"datasets", {"phantom"}}, {"lambdas", {40.0, 20.0, 10.0}}, {"methods", {"ista", "p2s"}}}},
  };
}

namespace detail {

inline bool compatible(const Json& expected, const Json& given) {
  if (expected.is_boolean()) return given.is_boolean();
  if (expected.is_number_integer()) return given.is_number_integer();
  if (expected.is_number()) return given.is_number();
  if (expected.is_string()) return given.is_string();
  if (expected.is_array()) return given.is_array();
  if (expected.is_object()) return given.is_object();
  return false;
}

inline void overlay_into(Json& base, const Json& layer, const std::string& prefix) {
  require(layer.is_object(), Errc::invalid_argument, "config section '" + prefix + "' must be a table");
  for (const auto& [key, value] : layer.items()) {
    const std::string name = prefix.empty() ? key : prefix + "." + key;
    require(base.contains(key), Errc::invalid_argument, "unknown config key '" + name + "'");
    Json& slot = base[key];
    require(compatible(slot, value), Errc::invalid_argument,
            "config key '" + name + "' expects " + std::string(slot.type_name()) + ", got " + value.type_name());
    if (slot.is_object())
      overlay_into(slot, value, name);
    else if (slot.is_number_float())
      slot = value.get<double>();
    else
      slot = value;
  }
}

}  // namespace detail

/// Applies `layer` on top of `base`; keys must already exist in `base`.
inline void overlay(Json& base, const Json& layer) { detail::overlay_into(base, layer, ""); }

/// Sets one dotted key such as "train.iterations" from a flag.
inline void set_key(Json& config, const std::string& dotted, Json value) {
  Json layer = std::move(value);
  std::string path = dotted;
  for (auto pos = path.rfind('.'); pos != std::string::npos; pos = path.rfind('.')) {
    layer = Json{{path.substr(pos + 1), std::move(layer)}};
    path.resize(pos);
  }
  overlay(config, Json{{path, std::move(layer)}});
}

inline std::uint64_t root_seed(const Json& config) {
  const auto s = config.at("seed").get<long long>();
  require(s >= 0, Errc::invalid_argument, "seed must be >= 0");
  return static_cast<std::uint64_t>(s);
}

namespace detail {

inline int checked_int(const Json& v, const char* name, long long lo) {
  const auto x = v.get<long long>();
  require(x >= lo && x <= 1'000'000'000, Errc::invalid_argument,
          std::string(name) + " out of range: " + std::to_string(x));
  return static_cast<int>(x);
}

}  // namespace detail

inline NetConfig net_config_from(const Json& config) {
  const Json& n = config.at("network");
  NetConfig c;
  c.num_filters = static_cast<std::size_t>(detail::checked_int(n.at("num_filters"), "network.num_filters", 1));
  c.kernel_size = static_cast<std::size_t>(detail::checked_int(n.at("kernel_size"), "network.kernel_size", 1));
  c.unroll_steps = detail::checked_int(n.at("unroll_steps"), "network.unroll_steps", 1);
  c.threshold_init = n.at("threshold_init").get<double>();
  c.weight_init = weight_init_from_string(n.at("weight_init").get<std::string>());
  c.exp_output = n.at("exp_output").get<bool>();
  c.learn_thresholds = n.at("learn_thresholds").get<bool>();
  c.seed = derive_seed(root_seed(config), SeedPurpose::weight_init);
  c.validate();
  return c;
}

/// `checkpoint_path` is left empty; the caller decides where checkpoints go.
inline TrainConfig train_config_from(const Json& config) {
  const Json& t = config.at("train");
  TrainConfig c;
  c.iterations = detail::checked_int(t.at("iterations"), "train.iterations", 0);
  c.learning_rate = t.at("learning_rate").get<double>();
  c.mu_n = t.at("mu_n").get<double>();
  c.neighbor_block = detail::checked_int(t.at("neighbor_block"), "train.neighbor_block", 0);
  c.eval_every = detail::checked_int(t.at("eval_every"), "train.eval_every", 1);
  c.toggles = loss_toggles_from_string(t.at("loss").get<std::string>());
  c.seed = root_seed(config);
  c.validate();
  return c;
}

inline double noise_lambda(const Json& config) {
  const double lambda = config.at("noise").at("lambda").get<double>();
  require(lambda > 0.0 && std::isfinite(lambda), Errc::invalid_argument,
          "noise.lambda must be positive and finite, got " + std::to_string(lambda));
  return lambda;
}

}  // namespace p2s
