#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "stsreg/error.hpp"
#include "stsreg/losses.hpp"
#include "support/oracles.hpp"

namespace stsreg {
namespace {

double central_difference(const std::function<double(double)>& f, double x, double h = 1e-5) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

TEST(Residual, Examples) {
  EXPECT_DOUBLE_EQ(residual(2.875, 3.0).x, 0.125);
  EXPECT_EQ(residual(2.875, 3.0).sign, -1);

  const Residual same = residual(1.0, 1.0);
  EXPECT_EQ(same.x, 0.0);
  EXPECT_EQ(same.sign, 0);

  const Residual r = residual(0.2, 1.7);
  EXPECT_DOUBLE_EQ(r.x, 1.5);
  EXPECT_EQ(r.sign, -1);
}

TEST(Residual, RejectsNonFinite) {
  EXPECT_THROW(residual(std::nan(""), 1.0), InvalidInput);
  EXPECT_THROW(residual(1.0, INFINITY), InvalidInput);
}

TEST(LossSpec, ConstructionRejectsInvalidHyperparameters) {
  EXPECT_THROW(LossSpec::translated_relu(0.0, 0.25), InvalidInput);
  EXPECT_THROW(LossSpec::translated_relu(-1.0, 0.25), InvalidInput);
  EXPECT_THROW(LossSpec::smooth_k2(2.0, 0.51, 1.0), InvalidInput);
  EXPECT_THROW(LossSpec::smooth_k2(2.0, -0.01, 1.0), InvalidInput);
  EXPECT_THROW(LossSpec::smooth_k2(2.0, 0.1, 0.0), InvalidInput);
  EXPECT_THROW(LossSpec::info_nce(0.0), InvalidInput);
  EXPECT_NO_THROW(LossSpec::smooth_k2(2.0, 0.5, 1.0));  // x0 == d/2 is allowed
  EXPECT_NO_THROW(LossSpec::translated_relu(1.0, 0.25, 0.5));
}

TEST(LossKindNames, RoundTrip) {
  for (auto kind : {LossKind::TranslatedReLU, LossKind::SmoothK2, LossKind::L1, LossKind::MSE,
                    LossKind::CrossEntropy, LossKind::InfoNCE}) {
    EXPECT_EQ(parse_loss_kind(to_string(kind)), kind);
  }
  EXPECT_THROW(parse_loss_kind("huber"), InvalidInput);
}

TEST(TranslatedReLU, Examples) {
  const auto spec = LossSpec::translated_relu(2.0, 0.25);
  EXPECT_EQ(translated_relu(0.25, spec).value, 0.0);
  EXPECT_EQ(translated_relu(0.25, spec).grad, 2.0);  // right-sided derivative at the knot

  const LossValue inside = translated_relu(0.10, spec);
  EXPECT_EQ(inside.value, 0.0);
  EXPECT_EQ(inside.grad, 0.0);

  const LossValue outside = translated_relu(1.0, spec);
  EXPECT_DOUBLE_EQ(outside.value, 1.5);
  EXPECT_EQ(outside.grad, 2.0);
  const double fd = central_difference([&](double x) { return translated_relu(x, spec).value; }, 1.0);
  EXPECT_NEAR(fd, 2.0, 1e-8);
}

TEST(SmoothK2, Examples) {
  const auto spec = LossSpec::smooth_k2(2.0, 0.25);
  EXPECT_EQ(smooth_k2(0.25, spec).value, 0.0);
  EXPECT_EQ(smooth_k2(0.25, spec).grad, 0.0);

  const LossValue v = smooth_k2(0.75, spec);
  EXPECT_DOUBLE_EQ(v.value, 0.5);
  EXPECT_DOUBLE_EQ(v.grad, 2.0);
  const double fd = central_difference([&](double x) { return smooth_k2(x, spec).value; }, 0.75);
  EXPECT_NEAR(fd, 2.0, 1e-8);

  const auto roberta = LossSpec::smooth_k2(3.0, 0.25);
  EXPECT_EQ(smooth_k2(0.20, roberta).value, 0.0);
  EXPECT_EQ(smooth_k2(0.20, roberta).grad, 0.0);
}

TEST(BaselineLosses, Examples) {
  EXPECT_EQ(l1_loss(0.0).value, 0.0);
  EXPECT_EQ(l1_loss(0.0).grad, 0.0);
  EXPECT_EQ(l1_loss(1.5).value, 1.5);
  EXPECT_EQ(l1_loss(1.5).grad, 1.0);
  EXPECT_EQ(mse_loss(0.5).value, 0.25);
  EXPECT_EQ(mse_loss(0.5).grad, 1.0);
  EXPECT_THROW(l1_loss(-0.1), InvalidInput);
}

TEST(LossKernels, RejectMismatchedSpec) {
  EXPECT_THROW(translated_relu(1.0, LossSpec::smooth_k2(1.0, 0.1)), InvalidInput);
  EXPECT_THROW(smooth_k2(1.0, LossSpec::mse()), InvalidInput);
  EXPECT_THROW(regression_loss(1.0, LossSpec::cross_entropy()), InvalidInput);
}

TEST(BufferZone, DenseSamplingIsExactlyZero) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> k_dist(0.1, 5.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const double d = 0.25 + 2.0 * unit(rng);
    const double x0 = unit(rng) * d / 2.0;
    const double k = k_dist(rng);
    const auto tr = LossSpec::translated_relu(k, x0, d);
    const auto sk = LossSpec::smooth_k2(k, x0, d);
    for (int i = 0; i < 100; ++i) {
      const double x = x0 * static_cast<double>(i) / 100.0;
      ASSERT_LT(x, x0 + 1e-300);
      if (x >= x0) continue;
      EXPECT_EQ(translated_relu(x, tr).value, 0.0);
      EXPECT_EQ(translated_relu(x, tr).grad, 0.0);
      EXPECT_EQ(smooth_k2(x, sk).value, 0.0);
      EXPECT_EQ(smooth_k2(x, sk).grad, 0.0);
    }
  }
}

TEST(Continuity, SmoothK2IsC1AndTranslatedReluJumpsByK) {
  const double k = 2.0;
  const double x0 = 0.25;
  const auto sk = LossSpec::smooth_k2(k, x0);
  const auto tr = LossSpec::translated_relu(k, x0);
  const LossValue below = smooth_k2(x0 - 1e-9, sk);
  const LossValue above = smooth_k2(x0 + 1e-9, sk);
  EXPECT_LT(std::abs(above.value - below.value), 1e-8);
  EXPECT_LT(std::abs(above.grad - below.grad), 1e-8);

  // Across the knot the value changes only by the linear rise k * 1e-9 on the right side.
  const double rise = translated_relu(x0 + 1e-9, tr).value - translated_relu(x0 - 1e-9, tr).value;
  EXPECT_LT(std::abs(rise - k * 1e-9), 1e-9);
  EXPECT_EQ(translated_relu(x0, tr).value, 0.0);
  EXPECT_EQ(translated_relu(x0 + 1e-9, tr).grad - translated_relu(x0 - 1e-9, tr).grad, k);
}

TEST(Monotonicity, NovelLossesNonDecreasing) {
  const auto tr = LossSpec::translated_relu(2.5, 0.25);
  const auto sk = LossSpec::smooth_k2(3.0, 0.25);
  double prev_tr = 0.0;
  double prev_sk = 0.0;
  for (int i = 0; i <= 4000; ++i) {
    const double x = i * 1e-3;
    const double vtr = translated_relu(x, tr).value;
    const double vsk = smooth_k2(x, sk).value;
    EXPECT_GE(vtr, prev_tr);
    EXPECT_GE(vsk, prev_sk);
    prev_tr = vtr;
    prev_sk = vsk;
  }
}

TEST(Reduction, ZeroBufferUnitSlopeRecoversL1AndMse) {
  const auto tr = LossSpec::translated_relu(1.0, 0.0);
  const auto sk = LossSpec::smooth_k2(1.0, 0.0);
  for (int i = 1; i <= 1000; ++i) {
    const double x = i * 5e-3;
    EXPECT_NEAR(translated_relu(x, tr).value, l1_loss(x).value, 1e-12);
    EXPECT_NEAR(translated_relu(x, tr).grad, l1_loss(x).grad, 1e-12);
    EXPECT_NEAR(smooth_k2(x, sk).value, mse_loss(x).value, 1e-12);
    EXPECT_NEAR(smooth_k2(x, sk).grad, mse_loss(x).grad, 1e-12);
  }
}

TEST(ScalarGradients, MatchFiniteDifferencesAwayFromKnot) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    const double k = 0.5 + 3.0 * unit(rng);
    const double x0 = 0.5 * unit(rng);
    const double x = 3.0 * unit(rng);
    if (std::abs(x - x0) < 1e-4 || x < 1e-4) continue;
    const auto tr = LossSpec::translated_relu(k, x0);
    const auto sk = LossSpec::smooth_k2(k, x0);
    auto check = [&](auto fn, double analytic) {
      const double numeric = central_difference(fn, x);
      EXPECT_LE(std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-4}), 1e-4)
          << "x=" << x << " k=" << k << " x0=" << x0;
    };
    check([&](double t) { return translated_relu(t, tr).value; }, translated_relu(x, tr).grad);
    check([&](double t) { return smooth_k2(t, sk).value; }, smooth_k2(x, sk).grad);
    check([&](double t) { return l1_loss(t).value; }, l1_loss(x).grad);
    check([&](double t) { return mse_loss(t).value; }, mse_loss(x).grad);
  }
}

TEST(RegressionLossWrtPrediction, ChainsResidualSign) {
  const auto sk = LossSpec::smooth_k2(2.0, 0.25);
  const LossValue over = regression_loss_wrt_prediction(2.0, 1.25, sk);  // x = 0.75
  EXPECT_DOUBLE_EQ(over.value, 0.5);
  EXPECT_DOUBLE_EQ(over.grad, 2.0);
  const LossValue under = regression_loss_wrt_prediction(0.5, 1.25, sk);
  EXPECT_DOUBLE_EQ(under.grad, -2.0);
  EXPECT_EQ(regression_loss_wrt_prediction(1.0, 1.0, LossSpec::l1()).grad, 0.0);
}

TEST(ClampToRange, Examples) {
  const LabelMapping four({"irrelevant", "slightly", "moderately", "highly"}, 0.0, 1.0);
  EXPECT_EQ(clamp_to_range(3.57, four), 3.0);
  EXPECT_EQ(clamp_to_range(-0.4, four), 0.0);
  EXPECT_EQ(clamp_to_range(1.5, four), 1.5);

  EXPECT_EQ(clamp_to_range(3.57, 0.0, 3.0).grad, 0.0);
  EXPECT_EQ(clamp_to_range(1.5, 0.0, 3.0).grad, 1.0);
  EXPECT_THROW(clamp_to_range(1.0, 2.0, 1.0), InvalidInput);
}

TEST(ClampToRange, OvershootPastTerminalNodeCostsNothing) {
  const auto sk = LossSpec::smooth_k2(2.0, 0.25);
  const ClampedValue c = clamp_to_range(3.57, 0.0, 3.0);
  const LossValue lv = regression_loss_wrt_prediction(c.value, 3.0, sk);
  EXPECT_EQ(lv.value, 0.0);
  EXPECT_EQ(lv.grad * c.grad, 0.0);
}

TEST(CrossEntropy, Examples) {
  const std::vector<double> uniform{0.0, 0.0, 0.0};
  EXPECT_NEAR(cross_entropy(uniform, 1).value, std::log(3.0), 1e-15);

  const std::vector<double> saturated{10.0, -10.0};
  EXPECT_NEAR(cross_entropy(saturated, 0).value, 0.0, 1e-6);

  const std::vector<double> logits{1.0, 2.0, 3.0};
  const auto probs = oracle::softmax_plain(logits);
  const CrossEntropyValue ce = cross_entropy(logits, 2);
  EXPECT_NEAR(ce.value, -std::log(probs[2]), 1e-14);
  EXPECT_NEAR(ce.value, 0.4076059644443803, 1e-14);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_NEAR(ce.grad[i], probs[i] - (i == 2 ? 1.0 : 0.0), 1e-14);
  }
}

TEST(CrossEntropy, StableForHugeLogits) {
  const std::vector<double> logits{1000.0, 0.0, -1000.0};
  const CrossEntropyValue ce = cross_entropy(logits, 1);
  EXPECT_TRUE(std::isfinite(ce.value));
  EXPECT_NEAR(ce.value, 1000.0, 1e-9);
}

TEST(CrossEntropy, RejectsOutOfRangeClass) {
  const std::vector<double> logits{0.0, 1.0};
  EXPECT_THROW(cross_entropy(logits, 2), InvalidInput);
}

TEST(InfoNce, SingletonBatchIsExactlyZero) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vector> a{{n(rng), n(rng), n(rng)}};
    std::vector<Vector> p{{n(rng), n(rng), n(rng)}};
    EXPECT_EQ(info_nce(a, p, 0.05).value, 0.0);
  }
}

TEST(InfoNce, OrthogonalPairOfPairs) {
  // a1 = p1 = e1, a2 = p2 = e2: cos(a_i, p_i) = 1, cos(a_i, p_j) = 0.
  std::vector<Vector> a{{1.0, 0.0}, {0.0, 1.0}};
  std::vector<Vector> p{{1.0, 0.0}, {0.0, 1.0}};
  const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + 1.0));
  EXPECT_NEAR(info_nce(a, p, 1.0).value, expected, 1e-9);
  EXPECT_NEAR(expected, 0.3132616875182228, 1e-15);
}

TEST(InfoNce, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  const std::size_t batch = 4;
  const std::size_t dim = 5;
  std::vector<Vector> a(batch, Vector(dim));
  std::vector<Vector> p(batch, Vector(dim));
  for (auto* set : {&a, &p}) {
    for (auto& v : *set) {
      for (auto& x : v) x = n(rng);
    }
  }
  const double tau = 0.3;
  const InfoNceValue analytic = info_nce(a, p, tau);
  const double h = 1e-5;
  double worst = 0.0;
  for (auto [set, grads] : {std::pair{&a, &analytic.grad_anchors}, std::pair{&p, &analytic.grad_positives}}) {
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t d = 0; d < dim; ++d) {
        const double orig = (*set)[i][d];
        (*set)[i][d] = orig + h;
        const double up = info_nce(a, p, tau).value;
        (*set)[i][d] = orig - h;
        const double down = info_nce(a, p, tau).value;
        (*set)[i][d] = orig;
        const double numeric = (up - down) / (2 * h);
        const double g = (*grads)[i][d];
        worst = std::max(worst, std::abs(g - numeric) / std::max({std::abs(g), std::abs(numeric), 1e-4}));
      }
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(InfoNce, RejectsZeroNormAndMismatchedBatches) {
  std::vector<Vector> a{{0.0, 0.0}};
  std::vector<Vector> p{{1.0, 0.0}};
  EXPECT_THROW(info_nce(a, p, 1.0), InvalidInput);
  std::vector<Vector> two{{1.0, 0.0}, {0.0, 1.0}};
  EXPECT_THROW(info_nce(two, p, 1.0), InvalidInput);
  EXPECT_THROW(info_nce({}, {}, 1.0), InvalidInput);
}

}  // namespace
}  // namespace stsreg
