#include <gtest/gtest.h>

#include <cmath>

#include "p2s/autodiff.hpp"
#include "p2s/gradcheck.hpp"
#include "p2s/kernel_bank.hpp"
#include "p2s/rng.hpp"
#include "support.hpp"

using namespace p2s;

TEST(Conv, OneByOneUnitKernelIsIdentity) {
  const Tensor x = test::random_tensor({1, 5, 6}, 1);
  const ConvGeometry g{1, 1, 1};
  const std::vector<double> w{1.0};
  EXPECT_EQ(conv2d(x, w, g), x);
  EXPECT_EQ(conv2d_transpose(x, w, g), x);
}

TEST(Conv, OnesKernelOnOnesImage) {
  const Tensor x({1, 3, 3}, 1.0);
  const std::vector<double> w(9, 1.0);
  const Tensor y = conv2d(x, w, {1, 1, 3});
  EXPECT_EQ(y.at(0, 1, 1), 9.0);
  EXPECT_EQ(y.at(0, 0, 0), 4.0);
  EXPECT_EQ(y.at(0, 0, 1), 6.0);
  EXPECT_EQ(y.at(0, 2, 2), 4.0);
}

TEST(Conv, MatchesDirectSummation) {
  const ConvGeometry g{3, 2, 5};
  const Tensor x = test::random_tensor({2, 9, 7}, 2);
  const Tensor w = test::random_tensor({1, 1, g.numel()}, 3);
  const Tensor y = conv2d(x, w.span(), g);
  const int p = 2;
  for (std::size_t o = 0; o < 3; ++o)
    for (int r = 0; r < 9; ++r)
      for (int c = 0; c < 7; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < 2; ++i)
          for (int u = 0; u < 5; ++u)
            for (int v = 0; v < 5; ++v) {
              const int rr = r + u - p, cc = c + v - p;
              if (rr < 0 || rr >= 9 || cc < 0 || cc >= 7) continue;
              acc += x.at(i, rr, cc) * w[((o * 2 + i) * 5 + u) * 5 + v];
            }
        EXPECT_NEAR(y.at(o, r, c), acc, 1e-12);
      }
}

TEST(Conv, DeltaInputStampsFlippedKernel) {
  const ConvGeometry g{1, 1, 3};
  const std::vector<double> w{1, 2, 3, 4, 5, 6, 7, 8, 9};
  Tensor delta({1, 5, 5}, 0.0);
  delta.at(0, 2, 2) = 1.0;
  const Tensor f = conv2d(delta, w, g);
  for (int u = 0; u < 3; ++u)
    for (int v = 0; v < 3; ++v) EXPECT_EQ(f.at(0, 1 + u, 1 + v), w[(2 - u) * 3 + (2 - v)]);
  // the adjoint is a true convolution, so it stamps the kernel as stored
  const Tensor t = conv2d_transpose(delta, w, g);
  for (int u = 0; u < 3; ++u)
    for (int v = 0; v < 3; ++v) EXPECT_EQ(t.at(0, 1 + u, 1 + v), w[u * 3 + v]);
}

TEST(Conv, AdjointIdentity) {
  for (std::uint64_t trial = 0; trial < 100; ++trial) {
    const std::size_t k = trial % 2 ? 3 : 5;
    const ConvGeometry g{2 + trial % 3, 1 + trial % 2, k};
    const Tensor a = test::random_tensor({g.in_channels, 8, 8}, 3 * trial);
    const Tensor b = test::random_tensor({g.out_channels, 8, 8}, 3 * trial + 1);
    const Tensor w = test::random_tensor({1, 1, g.numel()}, 3 * trial + 2);
    const double lhs = dot(conv2d(a, w.span(), g), b);
    const double rhs = dot(a, conv2d_transpose(b, w.span(), g));
    EXPECT_NEAR(lhs, rhs, 1e-10);
  }
}

TEST(Conv, ChannelMismatchIsAnError) {
  const std::vector<double> w(18, 1.0);
  EXPECT_THROW(conv2d(Tensor({1, 4, 4}), w, {1, 2, 3}), Error);
  EXPECT_THROW(conv2d_transpose(Tensor({2, 4, 4}), w, {1, 2, 3}), Error);
}

TEST(Conv, SumGradientIsWindowSum) {
  Tape t;
  const ConvGeometry g{1, 1, 3};
  const Tensor xv = test::random_tensor({1, 6, 6}, 4);
  const Var x = t.constant(xv);
  const Var w = t.parameter(test::random_tensor({1, 1, 9}, 5));
  const Var loss = scale(mean(conv2d(x, w, g)), 36.0);
  t.backward(loss);
  for (int u = 0; u < 3; ++u)
    for (int v = 0; v < 3; ++v) {
      double window = 0.0;
      for (int r = 0; r < 6; ++r)
        for (int c = 0; c < 6; ++c) {
          const int rr = r + u - 1, cc = c + v - 1;
          if (rr >= 0 && rr < 6 && cc >= 0 && cc < 6) window += xv.at(0, rr, cc);
        }
      EXPECT_NEAR(w.grad()[u * 3 + v], window, 1e-12);
    }
}

TEST(SoftThreshold, Definition) {
  Tape t;
  const Var x = t.constant(Tensor({1, 1, 3}, {1.2, -1.2, 0.3}));
  const Var e = t.constant(Tensor({1, 1, 1}, {0.5}));
  const auto& y = soft_threshold(x, e).value();
  EXPECT_NEAR(y[0], 0.7, 1e-15);
  EXPECT_NEAR(y[1], -0.7, 1e-15);
  EXPECT_EQ(y[2], 0.0);
}

TEST(SoftThreshold, ZeroThresholdIsIdentity) {
  Tape t;
  const Tensor xv = test::random_tensor({2, 4, 4}, 6);
  const Var y = soft_threshold(t.constant(xv), t.constant(Tensor({2, 1, 1}, 0.0)));
  EXPECT_EQ(y.value(), xv);
}

TEST(SoftThreshold, NegativeThresholdRejected) {
  Tape t;
  EXPECT_THROW(soft_threshold(t.constant(Tensor({1, 2, 2})), t.constant(Tensor({1, 1, 1}, {-0.1}))), Error);
}

TEST(SoftThreshold, GradientAtTheKinkIsZero) {
  Tape t;
  const Var x = t.parameter(Tensor({1, 1, 2}, {0.5, -0.5}));
  const Var e = t.parameter(Tensor({1, 1, 1}, {0.5}));
  t.backward(mean(soft_threshold(x, e)));
  EXPECT_EQ(x.grad()[0], 0.0);
  EXPECT_EQ(x.grad()[1], 0.0);
  EXPECT_EQ(e.grad()[0], 0.0);
}

TEST(SoftThreshold, ThresholdGradientIsMinusSign) {
  Tape t;
  const Var x = t.parameter(Tensor({1, 1, 3}, {2.0, -3.0, 0.1}));
  const Var e = t.parameter(Tensor({1, 1, 1}, {0.5}));
  t.backward(scale(mean(soft_threshold(x, e)), 3.0));
  EXPECT_NEAR(e.grad()[0], -1.0 + 1.0 + 0.0, 1e-15);
  EXPECT_EQ(x.grad()[2], 0.0);
}

TEST(Ops, MeanOfOnes) {
  Tape t;
  const Var x = t.parameter(Tensor({2, 3, 4}, 1.0));
  const Var m = mean(x);
  EXPECT_EQ(m.item(), 1.0);
  t.backward(m);
  for (double g : x.grad().values()) EXPECT_DOUBLE_EQ(g, 1.0 / 24.0);
}

TEST(Ops, MulGradientIsOtherOperand) {
  Tape t;
  const Tensor yv = test::random_tensor({1, 3, 3}, 7);
  const Var x = t.parameter(test::random_tensor({1, 3, 3}, 8));
  const Var y = t.constant(yv);
  t.backward(scale(mean(mul(x, y)), 9.0));
  for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(x.grad()[i], yv[i], 1e-15);
}

TEST(Ops, AbsSubgradientAtZero) {
  Tape t;
  const Var x = t.parameter(Tensor({1, 1, 3}, {-2.0, 0.0, 3.0}));
  t.backward(scale(mean(abs(x)), 3.0));
  EXPECT_EQ(x.grad()[0], -1.0);
  EXPECT_EQ(x.grad()[1], 0.0);
  EXPECT_EQ(x.grad()[2], 1.0);
}

TEST(Ops, ShapeMismatchIsAnError) {
  Tape t;
  EXPECT_THROW(add(t.constant(Tensor({1, 2, 2})), t.constant(Tensor({1, 2, 3}))), Error);
  EXPECT_THROW(mul(t.constant(Tensor({1, 2, 2})), t.constant(Tensor({2, 2, 2}))), Error);
}

TEST(Ops, FiniteDifferenceSuite) {
  for (const auto& r : operator_gradchecks(3)) {
    EXPECT_TRUE(r.passed) << r.name << " max_rel_err " << r.max_rel_error;
    EXPECT_LE(r.max_rel_error, r.name == "exp" ? 1e-6 : 1e-5) << r.name;
  }
}

TEST(Ops, SoftThresholdFiniteDifferencesOutsideKinkBand) {
  // Inputs kept at least 1e-4 away from +-eps so no kink is crossed.
  Xoshiro256 rng(9);
  Tensor x({2, 6, 6});
  const Tensor e({2, 1, 1}, {0.3, 0.1});
  for (std::size_t i = 0; i < x.size(); ++i) {
    double v;
    do v = 2.0 * rng.uniform() - 1.0;
    while (std::fabs(std::fabs(v) - e[i / 36]) < 1e-4);
    x[i] = v;
  }
  const Tensor r = test::random_tensor({2, 6, 6}, 10);
  const auto res = check_gradients(
      "soft_threshold_band", {x, e},
      [&](Tape& t, const std::vector<Var>& v) { return mean(mul(soft_threshold(v[0], v[1]), t.constant(r))); }, {});
  EXPECT_EQ(res.excluded, 0u);
  EXPECT_LE(res.max_rel_error, 1e-6);
}

TEST(Backward, FanOutAccumulates) {
  Tape t;
  const Var x = t.parameter(test::random_tensor({1, 2, 2}, 11));
  t.backward(mean(add(x, x)));
  for (double g : x.grad().values()) EXPECT_DOUBLE_EQ(g, 2.0 / 4.0);
}

TEST(Backward, SecondCallIsStale) {
  Tape t;
  const Var x = t.parameter(Tensor({1, 1, 1}, 2.0));
  const Var l = mean(mul(x, x));
  t.backward(l);
  try {
    t.backward(l);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::stale_gradient);
  }
  t.zero_grad();
  t.backward(l);
  EXPECT_EQ(x.grad()[0], 4.0);
}

TEST(Backward, NonScalarLossRejected) {
  Tape t;
  const Var x = t.parameter(Tensor({1, 2, 2}, 1.0));
  EXPECT_THROW(t.backward(x), Error);
}

TEST(Backward, DetachStopsGradient) {
  Tape t;
  const Var x = t.parameter(test::random_tensor({1, 3, 3}, 12));
  const Var y = mul(x, detach(x));
  t.backward(mean(y));
  for (std::size_t i = 0; i < 9; ++i) EXPECT_NEAR(x.grad()[i], x.value()[i] / 9.0, 1e-15);
}

TEST(Backward, BitwiseRepeatable) {
  auto run = [] {
    Tape t;
    const ConvGeometry g{4, 1, 3};
    const Var x = t.constant(test::random_tensor({1, 10, 10}, 13));
    const Var w = t.parameter(test::random_tensor({1, 1, g.numel()}, 14));
    const Var e = t.parameter(Tensor({4, 1, 1}, 0.05));
    const Var code = soft_threshold(conv2d(x, w, g), e);
    t.backward(mean(exp(conv2d_transpose(code, w, g))));
    return std::make_pair(w.grad(), e.grad());
  };
  EXPECT_EQ(run(), run());
}
