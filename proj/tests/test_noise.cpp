#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "p2s/noise.hpp"
#include "p2s/phantom.hpp"
#include "support.hpp"

using namespace p2s;

// Reference outputs computed with an independent arbitrary-precision
// implementation of splitmix64 / xoshiro256**.
TEST(Rng, SplitmixReferenceValue) {
  std::uint64_t s = 0;
  EXPECT_EQ(splitmix64(s), 0xe220a8397b1dcdafull);
}

TEST(Rng, XoshiroReferenceSequence) {
  Xoshiro256 a(0);
  EXPECT_EQ(a(), 0x99ec5f36cb75f2b4ull);
  EXPECT_EQ(a(), 0xbf6e1f784956452aull);
  EXPECT_EQ(a(), 0x1a5f849d4933e6e0ull);
  Xoshiro256 b(12345);
  EXPECT_EQ(b(), 0xbe6a36374160d49bull);
  EXPECT_EQ(b(), 0x214aaa0637a688c6ull);
  EXPECT_EQ(b(), 0xf69d16de9954d388ull);
}

TEST(Rng, DerivedSeedsReference) {
  EXPECT_EQ(derive_seed(0, SeedPurpose::noise), 0x46b73e79f0c37c00ull);
  EXPECT_EQ(derive_seed(7, SeedPurpose::neighbor_pairs, 5), 0x30cba465cb95accaull);
}

TEST(Rng, DerivedSeedsAreDistinctAcrossPurposesAndCells) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t root = 0; root < 4; ++root)
    for (auto p : {SeedPurpose::noise, SeedPurpose::weight_init, SeedPurpose::neighbor_pairs,
                   SeedPurpose::ista_dictionary, SeedPurpose::gradcheck, SeedPurpose::phantom})
      for (std::uint64_t i = 0; i < 8; ++i) seen.insert(derive_seed(root, p, i));
  EXPECT_EQ(seen.size(), 4u * 6u * 8u);
}

TEST(Rng, UniformRange) {
  Xoshiro256 r(3);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double o = r.uniform_open();
    ASSERT_GT(o, 0.0);
    ASSERT_LT(o, 1.0);
  }
}

TEST(Poisson, ZeroMeanIsZero) {
  Xoshiro256 r(1);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(poisson_draw(0.0, r), 0u);
}

TEST(Poisson, InvalidMeanRejected) {
  Xoshiro256 r(1);
  EXPECT_THROW(poisson_draw(-1.0, r), Error);
  EXPECT_THROW(poisson_draw(std::nan(""), r), Error);
  EXPECT_THROW(poisson_draw(INFINITY, r), Error);
}

TEST(Poisson, SameSeedSameSequence) {
  Xoshiro256 a(99), b(99);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(poisson_draw(7.3, a), poisson_draw(7.3, b));
}

namespace {

struct Moments {
  double mean, variance;
};

Moments sample_moments(double mean, int n, std::uint64_t seed) {
  Xoshiro256 r(seed);
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double k = static_cast<double>(poisson_draw(mean, r));
    s += k;
    s2 += k * k;
  }
  const double m = s / n;
  return {m, s2 / n - m * m};
}

}  // namespace

TEST(Poisson, MeanFourMoments) {
  const auto m = sample_moments(4.0, 1'000'000, 11);
  EXPECT_NEAR(m.mean, 4.0, 3.0 * 2.0 / 1000.0);
  EXPECT_NEAR(m.variance, 4.0, 0.05 * 4.0);
}

// Both sampling paths, on either side of the switch-over and far above it.
class PoissonMoments : public ::testing::TestWithParam<double> {};

TEST_P(PoissonMoments, MeanAndVarianceMatch) {
  const double mean = GetParam();
  const auto m = sample_moments(mean, 400'000, 5);
  const double se_mean = std::sqrt(mean / 400'000.0);
  EXPECT_NEAR(m.mean, mean, 5.0 * se_mean);
  EXPECT_NEAR(m.variance, mean, 0.02 * mean);
}

INSTANTIATE_TEST_SUITE_P(Means, PoissonMoments, ::testing::Values(0.5, 4.0, 29.5, 30.0, 40.0, 250.0));

TEST(Poisson, LargeMeanProbabilitiesMatchPmf) {
  // Empirical frequencies of the rejection sampler against the exact pmf.
  const double mean = 40.0;
  const int n = 400'000;
  Xoshiro256 r(21);
  std::vector<int> counts(120, 0);
  for (int i = 0; i < n; ++i) {
    const auto k = poisson_draw(mean, r);
    if (k < counts.size()) ++counts[k];
  }
  for (int k = 25; k <= 55; ++k) {
    const double p = std::exp(-mean + k * std::log(mean) - std::lgamma(k + 1.0));
    const double sd = std::sqrt(n * p * (1 - p));
    EXPECT_NEAR(counts[k], n * p, 5.0 * sd) << "k=" << k;
  }
}

TEST(MakeNoisy, ZeroImageStaysZero) {
  for (double lambda : {1.0, 10.0, 40.0}) {
    const auto n = make_noisy(ImageGrid::filled(8, 8, 0.0), {lambda, 3});
    for (double v : n.data()) EXPECT_EQ(v, 0.0);
  }
}

TEST(MakeNoisy, ConstantOneMean) {
  const auto n = make_noisy(ImageGrid::filled(128, 128, 1.0), {40.0, 0});
  double s = 0.0;
  for (double v : n.data()) s += v;
  EXPECT_NEAR(s / n.size(), 1.0, 0.01);
}

TEST(MakeNoisy, ValuesAreCountsOverLambda) {
  const auto n = make_noisy(ellipse_phantom(16, 16), {20.0, 4});
  for (double v : n.data()) EXPECT_EQ(v * 20.0, std::round(v * 20.0));
}

TEST(MakeNoisy, RejectsNonPositiveLambda) {
  EXPECT_THROW(make_noisy(ImageGrid::filled(2, 2, 1.0), {0.0, 0}), Error);
  EXPECT_THROW(make_noisy(ImageGrid::filled(2, 2, 1.0), {-3.0, 0}), Error);
}

TEST(MakeNoisy, Deterministic) {
  const auto clean = ellipse_phantom(32, 32);
  EXPECT_EQ(make_noisy(clean, {20.0, 8}), make_noisy(clean, {20.0, 8}));
  EXPECT_NE(make_noisy(clean, {20.0, 8}), make_noisy(clean, {20.0, 9}));
}

TEST(MakeNoisy, UnbiasedPerPixel) {
  const auto clean = test::random_image(12, 12, 5, 0.05, 1.0);
  const double lambda = 20.0;
  const int reps = 200;
  std::vector<double> acc(clean.size(), 0.0);
  for (int r = 0; r < reps; ++r) {
    const auto n = make_noisy(clean, {lambda, derive_seed(1, SeedPurpose::noise, r)});
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += n.data()[i];
  }
  for (std::size_t i = 0; i < acc.size(); ++i) {
    const double x = clean.data()[i];
    const double sigma = std::sqrt(x / lambda / reps);
    EXPECT_LT(std::fabs(acc[i] / reps - x), 5.0 * sigma) << "pixel " << i;
  }
}
