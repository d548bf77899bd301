#include <gtest/gtest.h>

#include <cmath>

#include "p2s/gradcheck.hpp"
#include "p2s/losses.hpp"
#include "support.hpp"

using namespace p2s;

TEST(PoissonLoss, ZeroPredictionGivesOne) {
  Tape t;
  const Tensor target = test::random_tensor({1, 5, 5}, 1, 0.0, 3.0);
  EXPECT_DOUBLE_EQ(loss_poisson(t.parameter(Tensor({1, 5, 5})), target).item(), 1.0);
}

TEST(PoissonLoss, PointwiseMinimizerIsLogTarget) {
  for (double y : {0.05, 0.4, 1.0, 2.5}) {
    double best = 0.0, best_loss = INFINITY;
    for (int i = -4000; i <= 2000; ++i) {
      const double f = i * 1e-3;
      Tape t;
      const double l = loss_poisson(t.constant(Tensor({1, 1, 1}, f)), Tensor({1, 1, 1}, y)).item();
      if (l < best_loss) best_loss = l, best = f;
    }
    EXPECT_NEAR(best, std::log(y), 1e-3) << "y = " << y;
  }
}

TEST(PoissonLoss, GradientMatchesFiniteDifferences) {
  const Tensor target = test::random_tensor({1, 6, 6}, 2, 0.0, 2.0);
  GradCheckOptions opt;
  opt.tolerance = 1e-6;
  const auto r = check_gradients(
      "poisson", {test::random_tensor({1, 6, 6}, 3)},
      [&](Tape&, const std::vector<Var>& v) { return loss_poisson(v[0], target); }, opt);
  EXPECT_TRUE(r.passed) << r.max_rel_error;
  Tape t;
  const Var p = t.parameter(test::random_tensor({1, 2, 2}, 4));
  t.backward(loss_poisson(p, Tensor({1, 2, 2}, 0.5)));
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(p.grad()[i], (std::exp(p.value()[i]) - 0.5) / 4.0, 1e-15);
}

TEST(PoissonLoss, OverflowAndShapeErrors) {
  Tape t;
  EXPECT_THROW(loss_poisson(t.constant(Tensor({1, 2, 2}, 800.0)), Tensor({1, 2, 2})), Error);
  EXPECT_THROW(loss_poisson(t.constant(Tensor({1, 2, 2})), Tensor({1, 2, 3})), Error);
}

TEST(L1Loss, Examples) {
  Tape t;
  const Tensor y = test::random_tensor({1, 4, 4}, 5);
  EXPECT_EQ(loss_l1(t.constant(y), y).item(), 0.0);
  EXPECT_DOUBLE_EQ(loss_l1(t.constant(Tensor({1, 4, 4})), Tensor({1, 4, 4}, 0.5)).item(), 0.5);
}

TEST(L1Loss, SubgradientAtZeroDifferenceIsZero) {
  Tape t;
  const Var p = t.parameter(Tensor({1, 1, 3}, {0.2, 0.5, 0.9}));
  t.backward(loss_l1(p, Tensor({1, 1, 3}, {0.5, 0.5, 0.5})));
  EXPECT_DOUBLE_EQ(p.grad()[0], -1.0 / 3.0);
  EXPECT_EQ(p.grad()[1], 0.0);
  EXPECT_DOUBLE_EQ(p.grad()[2], 1.0 / 3.0);
}

namespace {

struct RegularizerCase {
  ImageGrid noisy;
  SubsamplePair pair;
};

RegularizerCase regularizer_case(std::size_t h, std::size_t w, std::uint64_t seed) {
  RegularizerCase c{test::random_image(h, w, seed), {}};
  Xoshiro256 rng(seed + 1);
  c.pair = neighbor_downsample(c.noisy, rng);
  return c;
}

}  // namespace

TEST(NeighborRegularizer, IdentityMapGivesZero) {
  const auto c = regularizer_case(16, 16, 6);
  Tape t;
  const Var pred = t.constant(Tensor::from_image(c.pair.g1));
  const double v =
      neighbor_regularizer(pred, Tensor::from_image(c.pair.g2), Tensor::from_image(c.noisy), c.pair.selection).item();
  EXPECT_EQ(v, 0.0);
}

TEST(NeighborRegularizer, ConstantOutputOnConstantImage) {
  const ImageGrid img = ImageGrid::filled(8, 8, 0.3);
  Xoshiro256 rng(7);
  const auto pair = neighbor_downsample(img, rng);
  Tape t;
  const Var pred = t.constant(Tensor({1, 4, 4}, 0.3));
  EXPECT_EQ(neighbor_regularizer(pred, Tensor::from_image(pair.g2), Tensor({1, 8, 8}, 0.3), pair.selection).item(),
            0.0);
}

TEST(NeighborRegularizer, MatchesNaiveLoops) {
  const auto c = regularizer_case(16, 16, 8);
  const Tensor pred_v = test::random_tensor({1, 8, 8}, 9);
  const ImageGrid full = test::random_image(16, 16, 10);
  Tape t;
  const double got = neighbor_regularizer(t.constant(pred_v), Tensor::from_image(c.pair.g2), Tensor::from_image(full),
                                          c.pair.selection)
                         .item();
  double acc = 0.0;
  for (std::size_t br = 0; br < 8; ++br)
    for (std::size_t bc = 0; bc < 8; ++bc) {
      const auto& p = kNeighborPairs[c.pair.selection.choice[br * 8 + bc]];
      const double y2 = c.noisy(2 * br + p[1].row, 2 * bc + p[1].col);
      const double f1 = full(2 * br + p[0].row, 2 * bc + p[0].col);
      const double f2 = full(2 * br + p[1].row, 2 * bc + p[1].col);
      const double d = (pred_v.at(0, br, bc) - y2) - (f1 - f2);
      acc += d * d;
    }
  EXPECT_NEAR(got, acc / 64.0, 1e-10);
}

TEST(NeighborRegularizer, OddFullResolutionIsCropped) {
  const auto c = regularizer_case(9, 11, 11);
  Tape t;
  const Var pred = t.constant(Tensor::from_image(c.pair.g1));
  EXPECT_EQ(
      neighbor_regularizer(pred, Tensor::from_image(c.pair.g2), Tensor::from_image(c.noisy), c.pair.selection).item(),
      0.0);
}

TEST(NeighborRegularizer, SizeMismatchIsAnError) {
  const auto c = regularizer_case(8, 8, 12);
  Tape t;
  EXPECT_THROW(neighbor_regularizer(t.constant(Tensor({1, 3, 4})), Tensor::from_image(c.pair.g2),
                                    Tensor::from_image(c.noisy), c.pair.selection),
               Error);
}
