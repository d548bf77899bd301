#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int code = -1;
  std::string out;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

RunResult run(const fs::path& dir, const std::string& args) {
  const fs::path out = dir / "stdout.txt";
  const std::string cmd = std::string(P2S_CLI_PATH) + " " + args + " > '" + out.string() + "' 2> '" +
                          (dir / "stderr.txt").string() + "'";
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out)};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = p2s::test::scratch_dir(::testing::UnitTest::GetInstance()->current_test_info()->name());
    ASSERT_EQ(run(dir, "phantom --size 32 --output " + (dir / "clean.pgm").string()).code, 0);
  }
  std::string path(const std::string& name) const { return (dir / name).string(); }
  fs::path dir;
};

}  // namespace

TEST_F(Cli, AddNoiseIsByteReproducible) {
  const std::string base = "add-noise --input " + path("clean.pgm") + " --lambda 40 --seed 3 --output ";
  ASSERT_EQ(run(dir, base + path("a.pgm")).code, 0);
  ASSERT_EQ(run(dir, base + path("b.pgm")).code, 0);
  EXPECT_EQ(slurp(path("a.pgm")), slurp(path("b.pgm")));
  EXPECT_TRUE(fs::exists(path("a.pgm.manifest.json")));
  ASSERT_EQ(run(dir, "add-noise --input " + path("clean.pgm") + " --lambda 40 --seed 4 --output " + path("c.pgm")).code, 0);
  EXPECT_NE(slurp(path("a.pgm")), slurp(path("c.pgm")));
}

TEST_F(Cli, UsageAndIoExitCodes) {
  EXPECT_EQ(run(dir, "add-noise --input " + path("clean.pgm") + " --lambda 0 --output " + path("n.pgm")).code, 2);
  EXPECT_EQ(run(dir, "add-noise --input " + path("missing.pgm") + " --lambda 20 --output " + path("n.pgm")).code, 3);
  EXPECT_EQ(run(dir, "metrics --ref " + path("clean.pgm") + " --test " + path("missing.pgm")).code, 3);
  EXPECT_EQ(run(dir, "denoise --output-dir " + path("d")).code, 2);
  EXPECT_EQ(run(dir, "no-such-command").code, 2);
}

TEST_F(Cli, MetricsOfIdenticalImages) {
  const auto r = run(dir, "metrics --ref " + path("clean.pgm") + " --test " + path("clean.pgm"));
  ASSERT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "psnr_db,ssim\ninf,1.000000\n");
}

TEST_F(Cli, DenoiseZeroIterationsAndManifestRerun) {
  ASSERT_EQ(run(dir, "add-noise --input " + path("clean.pgm") + " --lambda 20 --output " + path("noisy.pgm")).code, 0);
  const std::string common = " --filters 4 --unroll 2 --quiet";
  ASSERT_EQ(run(dir, "denoise --noisy " + path("noisy.pgm") + " --iterations 0 --output-dir " + path("zero") + common).code, 0);
  EXPECT_TRUE(fs::exists(path("zero/denoised.pgm")));
  EXPECT_EQ(slurp(path("zero/loss.csv")), "iter,total,poisson,l1,neighbor,psnr\n");

  ASSERT_EQ(run(dir, "denoise --noisy " + path("noisy.pgm") + " --clean " + path("clean.pgm") +
                         " --iterations 8 --eval-every 4 --output-dir " + path("first") + common)
                .code,
            0);
  const auto manifest = nlohmann::json::parse(slurp(path("first/manifest.json")));
  EXPECT_EQ(manifest["subcommand"], "denoise");
  EXPECT_EQ(manifest["config"]["train"]["iterations"], 8);
  EXPECT_EQ(manifest["config"]["noise"]["input"], "counts");
  EXPECT_TRUE(fs::exists(path("first/metrics.csv")));
  EXPECT_TRUE(fs::exists(path("first/checkpoint.p2s")));

  ASSERT_EQ(run(dir, "denoise --manifest " + path("first/manifest.json") + " --quiet --output-dir " + path("second")).code, 0);
  EXPECT_EQ(slurp(path("first/denoised.pgm")), slurp(path("second/denoised.pgm")));
  EXPECT_EQ(slurp(path("first/loss.csv")), slurp(path("second/loss.csv")));
  EXPECT_EQ(slurp(path("first/checkpoint.p2s")), slurp(path("second/checkpoint.p2s")));
}

TEST_F(Cli, ConfigFileAndFlagPrecedence) {
  ASSERT_EQ(run(dir, "add-noise --input " + path("clean.pgm") + " --lambda 20 --output " + path("noisy.pgm")).code, 0);
  std::ofstream(path("run.toml")) << "[network]\nnum_filters = 4\nunroll_steps = 2\n[train]\niterations = 3\n";
  ASSERT_EQ(run(dir, "denoise --quiet --noisy " + path("noisy.pgm") + " --config " + path("run.toml") +
                         " --iterations 2 --output-dir " + path("out"))
                .code,
            0);
  const auto m = nlohmann::json::parse(slurp(path("out/manifest.json")));
  EXPECT_EQ(m["config"]["network"]["num_filters"], 4);
  EXPECT_EQ(m["config"]["train"]["iterations"], 2);
  EXPECT_EQ(m["config"]["train"]["learning_rate"], 1e-4);
  std::ofstream(path("bad.toml")) << "[train]\niteratoins = 3\n";
  EXPECT_EQ(run(dir, "denoise --noisy " + path("noisy.pgm") + " --config " + path("bad.toml") + " --output-dir " +
                         path("bad"))
                .code,
            2);
}

TEST_F(Cli, DivergentTrainingAbortsWithDiagnostics) {
  ASSERT_EQ(run(dir, "add-noise --input " + path("clean.pgm") + " --lambda 20 --output " + path("noisy.pgm")).code, 0);
  const auto r = run(dir, "denoise --quiet --noisy " + path("noisy.pgm") +
                              " --filters 4 --unroll 2 --iterations 20 --lr 1e6 --output-dir " + path("abort"));
  EXPECT_EQ(r.code, 4);
  EXPECT_TRUE(fs::exists(path("abort/abort.txt")));
  EXPECT_TRUE(fs::exists(path("abort/abort_checkpoint.p2s")));
  EXPECT_NE(slurp(path("stderr.txt")).find("abort.txt"), std::string::npos);
}

TEST_F(Cli, IstaIdentitySmoke) {
  ASSERT_EQ(run(dir, "add-noise --input " + path("clean.pgm") + " --lambda 20 --output " + path("noisy.pgm")).code, 0);
  ASSERT_EQ(run(dir, "ista --noisy " + path("noisy.pgm") + " --clean " + path("clean.pgm") +
                         " --dictionary identity --filters 1 --lambda-s 0 --iters 5 --output-dir " + path("ista"))
                .code,
            0);
  const std::string trace = slurp(path("ista/ista_trace.csv"));
  EXPECT_EQ(trace.rfind("iter,objective,residual,sparsity\n", 0), 0u);
  EXPECT_TRUE(fs::exists(path("ista/reconstruction.pgm")));
  const auto r = run(dir, "metrics --ref " + path("ista/reconstruction.pgm") + " --test " + path("ista/reconstruction.pgm"));
  EXPECT_EQ(r.code, 0);
}

TEST_F(Cli, GradcheckPasses) {
  const auto r = run(dir, "gradcheck --seed 0");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST_F(Cli, BenchTableLayout) {
  std::ofstream(path("bench.toml")) << "[bench]\ndatasets = [\"phantom:32\"]\nlambdas = [40, 20, 10]\n"
                                       "methods = [\"ista\", \"p2s\"]\n[network]\nnum_filters = 4\nunroll_steps = 2\n"
                                       "[train]\niterations = 3\n[ista]\nfilters = 4\niters = 10\n";
  const auto r = run(dir, "bench --spec " + path("bench.toml") + " --output-dir " + path("bench"));
  ASSERT_EQ(r.code, 0);
  std::istringstream csv(slurp(path("bench/bench.csv")));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "dataset,lambda,method,psnr_db,ssim");
  int cells = 0, averages = 0;
  while (std::getline(csv, line)) (line.rfind("Average,", 0) == 0 ? averages : cells)++;
  EXPECT_EQ(cells, 6);
  EXPECT_EQ(averages, 2);
}
