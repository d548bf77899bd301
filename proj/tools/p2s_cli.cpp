// p2s: command-line front end.
//
// Exit codes:
//   0  success
//   1  a check failed (gradcheck mismatch, failed benchmark cell)
//   2  usage error or invalid argument
//   3  I/O error: missing, unreadable or malformed input, unwritable output
//   4  training aborted on a non-finite loss or gradient
//   5  other numerical failure

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "p2s/config.hpp"
#include "p2s/gradcheck.hpp"
#include "p2s/image_io.hpp"
#include "p2s/ista.hpp"
#include "p2s/metrics.hpp"
#include "p2s/noise.hpp"
#include "p2s/phantom.hpp"
#include "p2s/runtime.hpp"
#include "p2s/toml.hpp"
#include "p2s/trainer.hpp"

namespace fs = std::filesystem;
using p2s::Json;

namespace {

enum ExitCode { kOk = 0, kCheckFailed = 1, kUsage = 2, kIo = 3, kAborted = 4, kNumerical = 5 };

struct CliError : std::runtime_error {
  CliError(int code, const std::string& what) : std::runtime_error(what), code(code) {}
  int code;
};

int exit_code_for(p2s::Errc e) {
  switch (e) {
    case p2s::Errc::invalid_argument:
    case p2s::Errc::dimension_mismatch:
    case p2s::Errc::shape_mismatch:
      return kUsage;
    case p2s::Errc::io_failure:
    case p2s::Errc::unsupported_format:
    case p2s::Errc::corrupt_header:
      return kIo;
    case p2s::Errc::training_aborted:
      return kAborted;
    default:
      return kNumerical;
  }
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string absolute(const std::string& path) { return fs::absolute(path).lexically_normal().string(); }

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CliError(kIo, "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw CliError(kIo, "malformed JSON in '" + path + "': " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw CliError(kIo, "cannot write '" + path.string() + "'");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw CliError(kIo, "cannot create directory '" + dir.string() + "': " + ec.message());
}

/// Loading failures of any kind (missing file, bad header, short raster) are I/O errors.
template <class F>
auto load_or_io_error(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const p2s::Error& e) {
    throw CliError(kIo, what + ": " + e.what());
  }
}

p2s::ImageGrid load_input(const std::string& path) {
  return load_or_io_error(path, [&] { return p2s::load_image(path); });
}

class Manifest {
 public:
  Manifest(std::string subcommand, const Json& config)
      : doc_{{"tool", "p2s"},
             {"version", p2s::version_string()},
             {"subcommand", std::move(subcommand)},
             {"seed", config.at("seed")},
             {"config", config},
             {"inputs", Json::object()},
             {"outputs", Json::object()},
             {"started_at", utc_timestamp()}} {}

  void input(const std::string& key, const std::string& path) { doc_["inputs"][key] = absolute(path); }
  void output(const std::string& key, const fs::path& path) { doc_["outputs"][key] = absolute(path.string()); }
  void note(const std::string& key, Json value) { doc_[key] = std::move(value); }

  void write(const fs::path& path) {
    doc_["finished_at"] = utc_timestamp();
    write_text(path, doc_.dump(2) + "\n");
  }

 private:
  Json doc_;
};

/// Shared config plumbing: --config file, --manifest, --seed and per-key flags.
struct ConfigFlags {
  std::string config_file;
  std::string manifest_file;
  std::optional<long long> seed;
  std::vector<std::pair<std::string, std::function<void(Json&)>>> setters;

  template <class T>
  void bind(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto value = std::make_shared<std::optional<T>>();
    app->add_option(flag, *value, help + " [" + key + "]");
    setters.emplace_back(key, [value, key](Json& cfg) {
      if (*value) p2s::set_key(cfg, key, Json(**value));
    });
  }

  void bind_switch(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
    auto value = std::make_shared<std::optional<bool>>();
    app->add_flag(flag, *value, help + " [" + key + "]");
    setters.emplace_back(key, [value, key](Json& cfg) {
      if (*value) p2s::set_key(cfg, key, Json(**value));
    });
  }

  void add_common(CLI::App* app, bool with_manifest) {
    app->add_option("--config", config_file, "TOML config file");
    if (with_manifest) app->add_option("--manifest", manifest_file, "re-run from a manifest written by a previous run");
    app->add_option("--seed", seed, "root seed [seed]");
  }

  /// defaults < manifest < config file < flags.
  Json resolve(Json* manifest_doc = nullptr) const {
    Json cfg = p2s::default_config();
    if (!manifest_file.empty()) {
      Json m = read_json(manifest_file);
      if (!m.contains("config")) throw CliError(kIo, "'" + manifest_file + "' has no config section");
      p2s::overlay(cfg, m.at("config"));
      if (manifest_doc) *manifest_doc = std::move(m);
    }
    if (!config_file.empty()) p2s::overlay(cfg, load_or_io_error(config_file, [&] { return p2s::load_toml(config_file); }));
    if (seed) cfg["seed"] = *seed;
    for (const auto& [key, apply] : setters) apply(cfg);
    p2s::root_seed(cfg);
    return cfg;
  }
};

std::string manifest_input(const Json& manifest, const std::string& key) {
  if (manifest.is_object() && manifest.contains("inputs") && manifest["inputs"].contains(key))
    return manifest["inputs"][key].get<std::string>();
  return {};
}

p2s::BitDepth output_depth(const Json& cfg) {
  return p2s::bit_depth_from_int(static_cast<int>(cfg.at("output").at("bit_depth").get<long long>()));
}

// ---------------------------------------------------------------------------

struct PhantomArgs {
  std::string output;
  std::size_t size = 128;
  int variant = 0;
  int bits = 16;
};

int run_phantom(const PhantomArgs& a) {
  const auto img = p2s::ellipse_phantom(a.size, a.size, a.variant);
  load_or_io_error(a.output, [&] {
    p2s::save_image(img, a.output, p2s::bit_depth_from_int(a.bits));
    return 0;
  });
  std::cout << a.output << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct AddNoiseArgs {
  ConfigFlags flags;
  std::string input;
  std::string output;
  std::string format = "counts";
};

int run_add_noise(AddNoiseArgs& a) {
  const Json cfg = a.flags.resolve();
  const double lambda = p2s::noise_lambda(cfg);
  if (a.format != "counts" && a.format != "intensity")
    throw CliError(kUsage, "--format must be counts or intensity");
  Manifest manifest("add-noise", cfg);
  const auto clean = load_input(a.input);
  manifest.input("clean", a.input);
  const auto noisy = p2s::make_noisy(clean, {lambda, p2s::derive_seed(p2s::root_seed(cfg), p2s::SeedPurpose::noise)});
  load_or_io_error(a.output, [&] {
    if (a.format == "counts")
      p2s::save_counts(noisy, lambda, a.output);
    else
      p2s::save_image(p2s::clamp01(noisy), a.output, output_depth(cfg));
    return 0;
  });
  manifest.output("noisy", a.output);
  manifest.note("format", a.format);
  manifest.write(a.output + ".manifest.json");
  const auto m = p2s::evaluate(clean, p2s::clamp01(noisy));
  std::cout << "noisy psnr_db=" << p2s::format_real(m.psnr_db, 3) << " ssim=" << p2s::format_real(m.ssim, 4) << "\n";
  return kOk;
}

/// Reads a noisy image honoring noise.input. For `auto`, a sibling manifest
/// from add-noise decides; the resolved kind is written back into `cfg`.
p2s::ImageGrid load_noisy(const std::string& path, Json& cfg) {
  std::string kind = cfg.at("noise").at("input").get<std::string>();
  if (kind == "auto") {
    kind = "intensity";
    const std::string sidecar = path + ".manifest.json";
    if (fs::exists(sidecar)) {
      const Json m = read_json(sidecar);
      if (m.value("subcommand", "") == "add-noise" && m.value("format", "") == "counts") {
        kind = "counts";
        cfg["noise"]["lambda"] = m.at("config").at("noise").at("lambda").get<double>();
      }
    }
    cfg["noise"]["input"] = kind;
  }
  if (kind == "counts") {
    const double lambda = p2s::noise_lambda(cfg);
    return load_or_io_error(path, [&] { return p2s::load_counts(path, lambda); });
  }
  if (kind != "intensity") throw CliError(kUsage, "noise.input must be auto, intensity or counts");
  return load_input(path);
}

// ---------------------------------------------------------------------------

struct DenoiseArgs {
  ConfigFlags flags;
  std::string noisy;
  std::string clean;
  std::string output_dir;
  bool quiet = false;
};

int run_denoise(DenoiseArgs& a) {
  Json previous;
  Json cfg = a.flags.resolve(&previous);
  if (a.noisy.empty()) a.noisy = manifest_input(previous, "noisy");
  if (a.clean.empty()) a.clean = manifest_input(previous, "clean");
  if (a.noisy.empty()) throw CliError(kUsage, "--noisy is required (or --manifest)");
  if (a.output_dir.empty()) throw CliError(kUsage, "--output-dir is required");

  const auto noisy = load_noisy(a.noisy, cfg);
  std::optional<p2s::ImageGrid> clean;
  if (!a.clean.empty()) clean = load_input(a.clean);
  const p2s::NetConfig net_cfg = p2s::net_config_from(cfg);
  p2s::TrainConfig train_cfg = p2s::train_config_from(cfg);
  const p2s::BitDepth depth = output_depth(cfg);

  const fs::path dir = a.output_dir;
  ensure_dir(dir);
  const fs::path ckpt = dir / "checkpoint.p2s";
  if (cfg.at("train").at("checkpoint").get<bool>()) train_cfg.checkpoint_path = ckpt.string();

  Manifest manifest("denoise", cfg);
  manifest.input("noisy", a.noisy);
  if (clean) manifest.input("clean", a.clean);

  const bool quiet = a.quiet;
  auto observer = [quiet](const p2s::LossRow& row, const p2s::P2SNetwork&) {
    if (quiet || !row.psnr) return;
    std::fprintf(stderr, "iter %d total %.6f poisson %.6f l1 %.6f neighbor %.6f psnr %.3f\n", row.iter, row.total,
                 row.poisson, row.l1, row.neighbor, *row.psnr);
  };

  p2s::DenoiseReport report;
  try {
    report = p2s::train(noisy, clean, net_cfg, train_cfg, observer);
  } catch (const p2s::TrainingAborted& e) {
    const fs::path saved = dir / "abort_checkpoint.p2s";
    const fs::path diag = dir / "abort.txt";
    p2s::save_checkpoint(saved, p2s::checkpoint_banks(e.last_good()));
    write_text(diag, std::string("training aborted\niteration: ") + std::to_string(e.iteration()) + "\nreason: " +
                         e.what() + "\nlast good checkpoint: " + absolute(saved.string()) + "\n");
    std::cerr << "p2s: " << e.what() << "\ndiagnostics: " << absolute(diag.string()) << "\n";
    return kAborted;
  }

  const fs::path image = dir / "denoised.pgm";
  const fs::path loss = dir / "loss.csv";
  p2s::save_image(report.denoised, image, depth);
  write_text(loss, p2s::loss_trace_csv(report.loss_trace));
  p2s::save_checkpoint(ckpt, p2s::checkpoint_banks(report.network));
  manifest.output("denoised", image);
  manifest.output("loss_trace", loss);
  manifest.output("checkpoint", ckpt);
  if (report.metrics) {
    const fs::path metrics = dir / "metrics.csv";
    write_text(metrics, p2s::metric_csv_header() + "\n" +
                            p2s::metric_csv_row(fs::path(a.noisy).stem().string(), p2s::noise_lambda(cfg),
                                                *report.metrics) +
                            "\n");
    manifest.output("metrics", metrics);
    std::cout << "psnr_db=" << p2s::format_real(report.metrics->psnr_db, 3)
              << " ssim=" << p2s::format_real(report.metrics->ssim, 4) << "\n";
  }
  manifest.note("wall_time_s", report.wall_time);
  manifest.write(dir / "manifest.json");
  std::cout << "wrote " << image.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

p2s::KernelBank ista_dictionary(const Json& cfg) {
  const Json& s = cfg.at("ista");
  const auto m = static_cast<std::size_t>(p2s::detail::checked_int(s.at("filters"), "ista.filters", 1));
  const auto k = static_cast<std::size_t>(p2s::detail::checked_int(s.at("kernel_size"), "ista.kernel_size", 1));
  const std::string kind = s.at("dictionary").get<std::string>();
  if (kind == "random") return p2s::random_unit_dictionary(m, k, p2s::derive_seed(p2s::root_seed(cfg), p2s::SeedPurpose::ista_dictionary));
  if (kind == "dct") return p2s::dct_dictionary(m, k);
  if (kind == "identity") return p2s::identity_dictionary(k);
  throw CliError(kUsage, "ista.dictionary must be random, dct or identity");
}

p2s::IstaResult solve_ista(const p2s::ImageGrid& noisy, const Json& cfg) {
  const Json& s = cfg.at("ista");
  const auto prob = p2s::make_ista_problem(noisy, ista_dictionary(cfg), s.at("lambda_s").get<double>(),
                                           p2s::detail::checked_int(s.at("iters"), "ista.iters", 1),
                                           s.at("tol").get<double>());
  return p2s::run_ista(prob);
}

struct IstaArgs {
  ConfigFlags flags;
  std::string noisy;
  std::string clean;
  std::string output_dir;
};

int run_ista_cmd(IstaArgs& a) {
  Json previous;
  Json cfg = a.flags.resolve(&previous);
  if (a.noisy.empty()) a.noisy = manifest_input(previous, "noisy");
  if (a.clean.empty()) a.clean = manifest_input(previous, "clean");
  if (a.noisy.empty()) throw CliError(kUsage, "--noisy is required (or --manifest)");
  if (a.output_dir.empty()) throw CliError(kUsage, "--output-dir is required");
  const auto noisy = load_noisy(a.noisy, cfg);
  std::optional<p2s::ImageGrid> clean;
  if (!a.clean.empty()) clean = load_input(a.clean);

  const fs::path dir = a.output_dir;
  ensure_dir(dir);
  Manifest manifest("ista", cfg);
  manifest.input("noisy", a.noisy);
  if (clean) manifest.input("clean", a.clean);

  const auto result = solve_ista(noisy, cfg);
  const auto estimate = p2s::clamp01(result.reconstruction);
  const fs::path image = dir / "reconstruction.pgm";
  const fs::path trace = dir / "ista_trace.csv";
  p2s::save_image(estimate, image, output_depth(cfg));
  write_text(trace, p2s::ista_trace_csv(result.trace));
  manifest.output("reconstruction", image);
  manifest.output("trace", trace);
  manifest.note("converged", result.converged);
  manifest.note("iterations_run", result.trace.empty() ? 0 : result.trace.back().iter);
  if (clean) {
    const auto m = p2s::evaluate(*clean, estimate);
    const fs::path metrics = dir / "metrics.csv";
    write_text(metrics, p2s::metric_csv_header() + "\n" +
                            p2s::metric_csv_row(fs::path(a.noisy).stem().string(), p2s::noise_lambda(cfg), m) + "\n");
    manifest.output("metrics", metrics);
    std::cout << "psnr_db=" << p2s::format_real(m.psnr_db, 3) << " ssim=" << p2s::format_real(m.ssim, 4) << "\n";
  }
  manifest.write(dir / "manifest.json");
  std::cout << "wrote " << image.string() << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

int run_metrics(const std::string& ref, const std::string& test) {
  const auto r = load_input(ref);
  const auto t = load_input(test);
  if (!r.same_shape(t)) throw CliError(kUsage, "reference and test images differ in size");
  const auto m = p2s::evaluate(r, t);
  std::cout << "psnr_db,ssim\n" << p2s::format_real(m.psnr_db) << "," << p2s::format_real(m.ssim) << "\n";
  return kOk;
}

int run_gradcheck(long long seed) {
  if (seed < 0) throw CliError(kUsage, "--seed must be >= 0");
  const auto results = p2s::full_gradcheck_suite(static_cast<std::uint64_t>(seed));
  bool ok = true;
  std::size_t checked = 0;
  for (const auto& r : results) {
    std::printf("%-4s %-36s checked %4zu excluded %3zu max_rel_err %.3e\n", r.passed ? "ok" : "FAIL", r.name.c_str(),
                r.checked, r.excluded, r.max_rel_error);
    ok = ok && r.passed;
    checked += r.checked;
  }
  std::printf("%s: %zu coordinates checked\n", ok ? "all checks passed" : "gradient check FAILED", checked);
  return ok ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------------------

struct BenchCell {
  std::size_t dataset = 0;
  std::size_t lambda = 0;
  std::size_t method = 0;
  std::optional<p2s::MetricReport> metrics;
  std::string error;
};

p2s::ImageGrid bench_image(const std::string& name) {
  if (name == "phantom") return p2s::ellipse_phantom();
  if (name.rfind("phantom:", 0) == 0) {
    try {
      return p2s::ellipse_phantom(128, 128, std::stoi(name.substr(8)));
    } catch (const std::logic_error&) {
      throw CliError(kUsage, "bad phantom variant in '" + name + "'");
    }
  }
  return load_input(name);
}

std::string dataset_label(const std::string& name) {
  return name.rfind("phantom", 0) == 0 ? name : fs::path(name).stem().string();
}

struct BenchArgs {
  ConfigFlags flags;
  std::string spec;
  std::string output_dir;
};

int run_bench(BenchArgs& a) {
  if (!a.spec.empty()) a.flags.config_file = a.spec;
  Json cfg = a.flags.resolve();
  if (a.output_dir.empty()) throw CliError(kUsage, "--output-dir is required");
  const Json& b = cfg.at("bench");
  const auto datasets = b.at("datasets").get<std::vector<std::string>>();
  const auto lambdas = b.at("lambdas").get<std::vector<double>>();
  const auto methods = b.at("methods").get<std::vector<std::string>>();
  for (const auto& m : methods)
    if (m != "noisy" && m != "ista" && m != "p2s") throw CliError(kUsage, "unknown bench method '" + m + "'");
  for (double l : lambdas)
    if (!(l > 0.0) || !std::isfinite(l)) throw CliError(kUsage, "bench lambdas must be positive");
  const p2s::NetConfig net_cfg = p2s::net_config_from(cfg);
  const p2s::TrainConfig train_cfg = p2s::train_config_from(cfg);
  const std::uint64_t seed = p2s::root_seed(cfg);

  std::vector<p2s::ImageGrid> images;
  for (const auto& d : datasets) images.push_back(bench_image(d));

  std::vector<BenchCell> cells;
  for (std::size_t d = 0; d < datasets.size(); ++d)
    for (std::size_t l = 0; l < lambdas.size(); ++l)
      for (std::size_t m = 0; m < methods.size(); ++m) cells.push_back({d, l, m, std::nullopt, {}});

  auto run_cell = [&](BenchCell& cell) {
    try {
      const auto& clean = images[cell.dataset];
      const std::uint64_t noise_seed = p2s::derive_seed(seed, p2s::SeedPurpose::noise, cell.dataset * lambdas.size() + cell.lambda);
      const auto noisy = p2s::make_noisy(clean, {lambdas[cell.lambda], noise_seed});
      const std::string& method = methods[cell.method];
      p2s::ImageGrid estimate = p2s::clamp01(noisy);
      if (method == "ista") estimate = p2s::clamp01(solve_ista(noisy, cfg).reconstruction);
      if (method == "p2s") estimate = p2s::train(noisy, std::nullopt, net_cfg, train_cfg).denoised;
      cell.metrics = p2s::evaluate(clean, estimate);
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  };

  const unsigned workers = std::min<unsigned>(p2s::worker_threads(), static_cast<unsigned>(cells.size()));
  std::atomic<std::size_t> next{0};
  std::mutex log;
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      run_cell(cells[i]);
      std::lock_guard<std::mutex> lock(log);
      const auto& c = cells[i];
      std::fprintf(stderr, "[%zu/%zu] %s lambda=%g %s: %s\n", i + 1, cells.size(), datasets[c.dataset].c_str(),
                   lambdas[c.lambda], methods[c.method].c_str(),
                   c.metrics ? p2s::format_real(c.metrics->psnr_db, 3).c_str() : ("error: " + c.error).c_str());
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < workers; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  // Cells are stored in (dataset, lambda, method) order whatever finished first.
  std::string csv = "dataset,lambda,method,psnr_db,ssim\n";
  bool failed = false;
  char lam[32];
  for (const auto& c : cells) {
    std::snprintf(lam, sizeof lam, "%g", lambdas[c.lambda]);
    csv += dataset_label(datasets[c.dataset]) + "," + lam + "," + methods[c.method] + ",";
    if (c.metrics) {
      csv += p2s::format_real(c.metrics->psnr_db) + "," + p2s::format_real(c.metrics->ssim) + "\n";
    } else {
      csv += "nan,nan\n";
      failed = true;
    }
  }
  for (std::size_t m = 0; m < methods.size(); ++m) {
    double psnr = 0.0, ssim = 0.0;
    std::size_t n = 0;
    for (const auto& c : cells)
      if (c.method == m && c.metrics) {
        psnr += c.metrics->psnr_db;
        ssim += c.metrics->ssim;
        ++n;
      }
    csv += "Average,-," + methods[m] + "," + (n ? p2s::format_real(psnr / n) : "nan") + "," +
           (n ? p2s::format_real(ssim / n) : "nan") + "\n";
  }

  const fs::path dir = a.output_dir;
  ensure_dir(dir);
  Manifest manifest("bench", cfg);
  if (!a.spec.empty()) manifest.input("spec", a.spec);
  const fs::path out = dir / "bench.csv";
  write_text(out, csv);
  manifest.output("bench", out);
  Json errors = Json::array();
  for (const auto& c : cells)
    if (!c.metrics)
      errors.push_back({{"dataset", datasets[c.dataset]}, {"lambda", lambdas[c.lambda]}, {"method", methods[c.method]},
                        {"error", c.error}});
  manifest.note("failed_cells", errors);
  manifest.write(dir / "manifest.json");
  std::cout << csv;
  return failed ? kCheckFailed : kOk;
}

void bind_network_flags(ConfigFlags& f, CLI::App* app) {
  f.bind<long long>(app, "--filters", "network.num_filters", "number of dictionary filters M");
  f.bind<long long>(app, "--kernel", "network.kernel_size", "filter size k");
  f.bind<long long>(app, "--unroll", "network.unroll_steps", "unrolled ISTA steps T");
  f.bind<double>(app, "--threshold-init", "network.threshold_init", "initial soft threshold");
  f.bind<std::string>(app, "--weight-init", "network.weight_init", "tied|uniform");
  f.bind_switch(app, "--exp-output", "network.exp_output", "image estimate is exp(Dec(A_T))");
  f.bind<long long>(app, "--iterations", "train.iterations", "training iterations");
  f.bind<double>(app, "--lr", "train.learning_rate", "Adam learning rate");
  f.bind<double>(app, "--mu-n", "train.mu_n", "neighbor regularizer weight");
  f.bind<long long>(app, "--eval-every", "train.eval_every", "logging/checkpoint interval");
  f.bind<std::string>(app, "--loss", "train.loss", "full|poisson|l1");
}

}  // namespace

int main(int argc, char** argv) {
  p2s::tune_allocator();
  CLI::App app{"Single-image Poisson denoising with an unrolled sparse-coding network"};
  app.set_version_flag("--version", p2s::version_string());
  app.require_subcommand(1);

  PhantomArgs phantom;
  auto* ph = app.add_subcommand("phantom", "write the synthetic ellipse phantom");
  ph->add_option("--output", phantom.output, "output image (.pgm or .png)")->required();
  ph->add_option("--size", phantom.size, "height and width")->check(CLI::Range(16, 4096));
  ph->add_option("--variant", phantom.variant, "geometry variant");
  ph->add_option("--bit-depth", phantom.bits, "8 or 16");

  AddNoiseArgs noise;
  auto* an = app.add_subcommand("add-noise", "simulate Poisson noise y = Poisson(lambda x) / lambda");
  noise.flags.add_common(an, false);
  an->add_option("--input", noise.input, "clean image")->required();
  an->add_option("--output", noise.output, "noisy image")->required();
  an->add_option("--format", noise.format, "counts (lossless 16-bit photon counts) or intensity (clamped)");
  noise.flags.bind<double>(an, "--lambda", "noise.lambda", "peak photon count");
  noise.flags.bind<long long>(an, "--bit-depth", "output.bit_depth", "8 or 16 for intensity output");

  DenoiseArgs den;
  auto* dn = app.add_subcommand("denoise", "train on the noisy image itself and write the estimate");
  den.flags.add_common(dn, true);
  dn->add_option("--noisy", den.noisy, "noisy image");
  dn->add_option("--clean", den.clean, "clean reference for metrics");
  dn->add_option("--output-dir", den.output_dir, "output directory");
  dn->add_flag("--quiet", den.quiet, "no progress output");
  bind_network_flags(den.flags, dn);
  den.flags.bind<double>(dn, "--lambda", "noise.lambda", "peak count for counts input");
  den.flags.bind<std::string>(dn, "--input-kind", "noise.input", "auto|intensity|counts");
  den.flags.bind<long long>(dn, "--bit-depth", "output.bit_depth", "8 or 16");

  IstaArgs ista;
  auto* is = app.add_subcommand("ista", "classical convolutional ISTA baseline");
  ista.flags.add_common(is, true);
  is->add_option("--noisy", ista.noisy, "noisy image");
  is->add_option("--clean", ista.clean, "clean reference for metrics");
  is->add_option("--output-dir", ista.output_dir, "output directory");
  ista.flags.bind<long long>(is, "--filters", "ista.filters", "dictionary size");
  ista.flags.bind<long long>(is, "--kernel", "ista.kernel_size", "filter size");
  ista.flags.bind<double>(is, "--lambda-s", "ista.lambda_s", "sparsity weight");
  ista.flags.bind<long long>(is, "--iters", "ista.iters", "maximum iterations");
  ista.flags.bind<double>(is, "--tol", "ista.tol", "stop when the code changes less than this");
  ista.flags.bind<std::string>(is, "--dictionary", "ista.dictionary", "random|dct|identity");
  ista.flags.bind<double>(is, "--lambda", "noise.lambda", "peak count for counts input");
  ista.flags.bind<std::string>(is, "--input-kind", "noise.input", "auto|intensity|counts");
  ista.flags.bind<long long>(is, "--bit-depth", "output.bit_depth", "8 or 16");

  std::string ref, test;
  auto* me = app.add_subcommand("metrics", "PSNR (peak 1) and SSIM of a test image against a reference");
  me->add_option("--ref", ref, "reference image")->required();
  me->add_option("--test", test, "test image")->required();

  long long gc_seed = 0;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every gradient");
  gc->add_option("--seed", gc_seed, "seed");

  BenchArgs bench;
  auto* be = app.add_subcommand("bench", "run a dataset x lambda x method table");
  bench.flags.add_common(be, false);
  be->add_option("--spec", bench.spec, "TOML benchmark spec (same schema as --config)");
  be->add_option("--output-dir", bench.output_dir, "output directory");
  bind_network_flags(bench.flags, be);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*ph) return run_phantom(phantom);
    if (*an) return run_add_noise(noise);
    if (*dn) return run_denoise(den);
    if (*is) return run_ista_cmd(ista);
    if (*me) return run_metrics(ref, test);
    if (*gc) return run_gradcheck(gc_seed);
    if (*be) return run_bench(bench);
  } catch (const CliError& e) {
    std::cerr << "p2s: " << e.what() << "\n";
    return e.code;
  } catch (const p2s::Error& e) {
    std::cerr << "p2s: " << p2s::to_string(e.code()) << ": " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "p2s: " << e.what() << "\n";
    return kNumerical;
  }
  return kUsage;
}
