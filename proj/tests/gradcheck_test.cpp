#include <gtest/gtest.h>

#include <random>

#include "stsreg/error.hpp"
#include "stsreg/gradcheck.hpp"
#include "support/reference_backward.hpp"

namespace stsreg {
namespace {

TEST(RelativeError, Definition) {
  EXPECT_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(1e-6, 0.0), 1e-2);  // floor keeps tiny values from blowing up
  EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
}

TEST(GradCheckSuite, CoversEveryLossAndModeAndPasses) {
  GradCheckOptions o;
  o.seed = 3;
  const auto cases = run_gradcheck_suite(o);
  ASSERT_EQ(cases.size(), 18u);
  for (const auto& c : cases) {
    EXPECT_TRUE(c.passed) << c.label << " max rel err " << c.result.max_relative_error << " at "
                          << c.result.worst_parameter;
    EXPECT_GT(c.result.parameters_checked, 0u);
  }
}

TEST(GradCheckSuite, RejectsBadOptions) {
  GradCheckOptions o;
  o.dim = 0;
  EXPECT_THROW(run_gradcheck_suite(o), InvalidInput);
}

struct AbsDiffFixture {
  ModelParams params;
  std::vector<Example> batch;
};

AbsDiffFixture absdiff_fixture(std::uint64_t seed) {
  InitOptions init;
  init.dim = 5;
  init.mode = FeatureMode::AbsDiff;
  init.embedding_scale = 1.0;
  init.bias = 0.5;
  init.seed = seed;
  AbsDiffFixture f{init_params(12, init), {}};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<TokenId> tok(0, 11);
  std::uniform_real_distribution<double> y(0.0, 3.0);
  for (int i = 0; i < 3; ++i) {
    Example ex;
    ex.pair.first = {tok(rng), tok(rng)};
    ex.pair.second = {tok(rng)};
    ex.target_value = y(rng);
    f.batch.push_back(ex);
  }
  return f;
}

TEST(ReferenceBackward, AgreesWithLibraryAndPassesCheck) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto f = absdiff_fixture(seed);
    if (distance_to_kink(f.batch, f.params, LossSpec::mse()) < 1e-4) continue;
    const auto lib = forward_backward(f.batch, f.params, LossSpec::mse());
    const auto ref = reference::absdiff_mse_backward(f.batch, f.params, false);
    EXPECT_NEAR(lib.loss, ref.loss, 1e-12);
    for (std::size_t i = 0; i < lib.gradients.embeddings.size(); ++i) {
      EXPECT_NEAR(lib.gradients.embeddings.values()[i], ref.gradients.embeddings.values()[i], 1e-12);
    }
    const GradientFn good = [](std::span<const Example> b, const ModelParams& p, const LossSpec&,
                               const ForwardBackwardOptions&) { return reference::absdiff_mse_backward(b, p, false); };
    EXPECT_LE(check_gradients(f.batch, f.params, LossSpec::mse(), {}, 1e-5, good).max_relative_error, 1e-4);
  }
}

TEST(ReferenceBackward, SignBugInAbsDiffIsCaught) {
  const auto f = absdiff_fixture(1);
  const GradientFn bad = [](std::span<const Example> b, const ModelParams& p, const LossSpec&,
                            const ForwardBackwardOptions&) { return reference::absdiff_mse_backward(b, p, true); };
  const auto r = check_gradients(f.batch, f.params, LossSpec::mse(), {}, 1e-5, bad);
  EXPECT_GT(r.max_relative_error, 1e-4);
  EXPECT_EQ(r.worst_parameter.rfind("embeddings", 0), 0u);
}

TEST(BufferZone, AnalyticAndNumericBothZero) {
  // Bias places every prediction within x0 of its target; nothing else contributes.
  InitOptions init;
  init.dim = 4;
  init.mode = FeatureMode::UVAbsDiff;
  init.seed = 2;
  ModelParams p = init_params(6, init);
  p.head_weights.fill(0.0);
  p.head_bias = {1.0};
  std::vector<Example> batch(2);
  batch[0].pair = {{0, 1}, {2}};
  batch[0].target_value = 1.1;
  batch[1].pair = {{3}, {4, 5}};
  batch[1].target_value = 0.95;
  for (const auto& loss : {LossSpec::translated_relu(2.0, 0.25, 1.0), LossSpec::smooth_k2(2.0, 0.25, 1.0)}) {
    const auto fb = forward_backward(batch, p, loss);
    EXPECT_EQ(fb.loss, 0.0);
    for (double g : fb.gradients.embeddings.values()) EXPECT_EQ(g, 0.0);
    for (double g : fb.gradients.head_weights.values()) EXPECT_EQ(g, 0.0);
    EXPECT_EQ(fb.gradients.head_bias[0], 0.0);
    const auto r = check_gradients(batch, p, loss);
    EXPECT_EQ(r.max_relative_error, 0.0);
  }
}

TEST(DistanceToKink, SeesResidualAtX0AndEqualEmbeddings) {
  InitOptions init;
  init.dim = 2;
  init.mode = FeatureMode::UV;
  ModelParams p = init_params(3, init);
  p.head_weights.fill(0.0);
  p.head_bias = {1.0};
  std::vector<Example> batch(1);
  batch[0].pair = {{0}, {1}};
  batch[0].target_value = 1.25;
  EXPECT_NEAR(distance_to_kink(batch, p, LossSpec::smooth_k2(1.0, 0.25, 1.0)), 0.0, 1e-15);
  p.mode = FeatureMode::AbsDiff;
  p.head_weights = Matrix(1, 2);
  batch[0].pair = {{0}, {0}};
  EXPECT_EQ(distance_to_kink(batch, p, LossSpec::mse()), 0.0);
}

}  // namespace
}  // namespace stsreg
