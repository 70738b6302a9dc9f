#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "stsreg/encoder.hpp"
#include "stsreg/error.hpp"
#include "stsreg/gradcheck.hpp"

namespace stsreg {
namespace {

Vocabulary small_vocab() {
  const std::vector<std::string> tokens{"a", "man", "runs"};
  return Vocabulary(tokens);
}

TEST(Tokenize, Examples) {
  const auto vocab = small_vocab();
  EXPECT_EQ(tokenize("A man runs", vocab), (TokenSequence{0, 1, 2}));
  EXPECT_EQ(tokenize("A MAN runs!", vocab), (TokenSequence{0, 1, 2}));
  EXPECT_EQ(tokenize("", vocab), (TokenSequence{vocab.oov_id()}));
  EXPECT_EQ(tokenize("  ?! ", vocab), (TokenSequence{vocab.oov_id()}));
}

TEST(Tokenize, UnknownWordsMapToOovAndTruncationApplies) {
  const auto vocab = small_vocab();
  EXPECT_EQ(tokenize("a dog runs", vocab), (TokenSequence{0, vocab.oov_id(), 2}));
  EXPECT_EQ(tokenize("a man runs a man runs", vocab, 4), (TokenSequence{0, 1, 2, 0}));
}

TEST(Tokenize, SplitsOnPunctuationAndKeepsUtf8) {
  EXPECT_EQ(split_words("Hello,world--foo\tbar"), (std::vector<std::string>{"hello", "world", "foo", "bar"}));
  EXPECT_EQ(split_words("Café au lait"), (std::vector<std::string>{"café", "au", "lait"}));
}

TEST(Vocabulary, IdsAreDenseWithReservedTail) {
  const auto vocab = Vocabulary::build(std::vector<std::string>{"the cat sat", "The dog sat."});
  EXPECT_EQ(vocab.tokens(), (std::vector<std::string>{"cat", "dog", "sat", "the"}));
  EXPECT_EQ(vocab.size(), 6u);
  EXPECT_EQ(vocab.oov_id(), 4u);
  EXPECT_EQ(vocab.pad_id(), 5u);
  EXPECT_EQ(vocab.id("zebra"), vocab.oov_id());
}

ModelParams tiny_params(FeatureMode mode, std::size_t dim = 2, std::size_t vocab = 4) {
  InitOptions opts;
  opts.dim = dim;
  opts.mode = mode;
  opts.seed = 42;
  return init_params(vocab, opts);
}

TEST(EmbedSentence, MeanOfRows) {
  auto params = tiny_params(FeatureMode::UVAbsDiff);
  params.embeddings(0, 0) = 1.0;
  params.embeddings(0, 1) = 3.0;
  params.embeddings(1, 0) = 3.0;
  params.embeddings(1, 1) = 5.0;
  const TokenSequence single{1};
  EXPECT_EQ(embed_sentence(single, params), (Vector{3.0, 5.0}));
  const TokenSequence two{0, 1};
  EXPECT_EQ(embed_sentence(two, params), (Vector{2.0, 4.0}));
  EXPECT_THROW(embed_sentence(TokenSequence{}, params), InvalidInput);
}

TEST(EmbedSentence, PermutationInvariant) {
  const auto params = tiny_params(FeatureMode::UVAbsDiff, 8, 20);
  std::mt19937_64 rng(1);
  TokenSequence tokens{3, 7, 7, 1, 19, 0, 4};
  const Vector reference = embed_sentence(tokens, params);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(tokens.begin(), tokens.end(), rng);
    const Vector e = embed_sentence(tokens, params);
    for (std::size_t d = 0; d < e.size(); ++d) {
      EXPECT_NEAR(e[d], reference[d], 1e-15);
    }
  }
}

TEST(Features, Examples) {
  const Vector u{1.0, 2.0};
  const Vector v{3.0, 0.0};
  EXPECT_EQ(features(u, v, FeatureMode::UVAbsDiff), (Vector{1, 2, 3, 0, 2, 2}));
  EXPECT_EQ(features(u, v, FeatureMode::AbsDiff), (Vector{2, 2}));
  EXPECT_EQ(features(u, v, FeatureMode::UV), (Vector{1, 2, 3, 0}));
  const Vector same = features(u, u, FeatureMode::UVAbsDiff);
  EXPECT_EQ(same[4], 0.0);
  EXPECT_EQ(same[5], 0.0);
  EXPECT_THROW(features(u, Vector{1.0}, FeatureMode::UV), ShapeError);
}

TEST(ModelParams, HeadParameterCounts) {
  for (std::size_t dim : {1u, 4u, 32u}) {
    InitOptions opts;
    opts.dim = dim;
    opts.mode = FeatureMode::UVAbsDiff;
    EXPECT_EQ(init_params(10, opts).head_weight_count(), 3 * dim * 1);
    opts.mode = FeatureMode::UV;
    EXPECT_EQ(init_params(10, opts).head_weight_count(), 2 * dim);
    opts.mode = FeatureMode::AbsDiff;
    EXPECT_EQ(init_params(10, opts).head_weight_count(), dim);
    opts.mode = FeatureMode::UVAbsDiff;
    opts.head = HeadKind::Classification;
    opts.classes = 3;
    EXPECT_EQ(init_params(10, opts).head_weight_count(), 3 * dim * 3);
  }
}

TEST(ModelParams, InitializationRanges) {
  InitOptions opts;
  opts.dim = 16;
  opts.bias = 2.5;
  opts.seed = 9;
  const auto params = init_params(50, opts);
  const double s = 1.0 / std::sqrt(48.0);
  for (double w : params.embeddings.values()) {
    EXPECT_LE(std::abs(w), 0.05);
  }
  for (double w : params.head_weights.values()) {
    EXPECT_LE(std::abs(w), s);
  }
  EXPECT_EQ(params.head_bias, (Vector{2.5}));
  EXPECT_EQ(init_params(50, opts), params);  // same seed, same draw
}

TEST(ModelParams, ValidateCatchesShapeMismatch) {
  auto params = tiny_params(FeatureMode::UVAbsDiff);
  params.mode = FeatureMode::UV;
  EXPECT_THROW(params.validate(), ShapeError);
  const EncodedPair pair{{0}, {1}};
  EXPECT_THROW(predict(pair, params), ShapeError);
}

TEST(Predict, ZeroHeadGivesBias) {
  auto params = tiny_params(FeatureMode::UVAbsDiff, 4, 6);
  params.head_weights.fill(0.0);
  params.head_bias = {1.25};
  EXPECT_EQ(predict({{0, 1}, {2, 3}}, params), 1.25);
  EXPECT_EQ(predict({{5}, {4, 4}}, params), 1.25);
}

TEST(Predict, IdenticalSentencesUnderAbsDiffGiveBias) {
  const auto params = tiny_params(FeatureMode::AbsDiff, 4, 6);
  EXPECT_EQ(predict({{0, 1, 2}, {2, 0, 1}}, params), params.head_bias[0]);
}

TEST(Predict, MatchesIndependentDotProduct) {
  const auto params = tiny_params(FeatureMode::UVAbsDiff, 5, 12);
  const EncodedPair pair{{0, 3, 3, 7}, {11, 2}};
  // Re-derive by hand: mean rows, then w . [u, v, |u-v|] + b.
  const std::size_t dim = 5;
  std::vector<double> u(dim, 0.0);
  std::vector<double> v(dim, 0.0);
  for (auto t : pair.first) for (std::size_t d = 0; d < dim; ++d) u[d] += params.embeddings(t, d) / 4.0;
  for (auto t : pair.second) for (std::size_t d = 0; d < dim; ++d) v[d] += params.embeddings(t, d) / 2.0;
  double expected = params.head_bias[0];
  for (std::size_t d = 0; d < dim; ++d) {
    expected += params.head_weights(0, d) * u[d];
    expected += params.head_weights(0, dim + d) * v[d];
    expected += params.head_weights(0, 2 * dim + d) * std::abs(u[d] - v[d]);
  }
  EXPECT_NEAR(predict(pair, params), expected, 1e-14);
}

TEST(Predict, AbsDiffIsSymmetric) {
  const auto params = tiny_params(FeatureMode::AbsDiff, 6, 10);
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<TokenId> tok(0, 9);
  for (int i = 0; i < 50; ++i) {
    EncodedPair p{{tok(rng), tok(rng)}, {tok(rng), tok(rng), tok(rng)}};
    EncodedPair swapped{p.second, p.first};
    EXPECT_EQ(predict(p, params), predict(swapped, params));
  }
}

TEST(Predict, RejectsOutOfTableToken) {
  const auto params = tiny_params(FeatureMode::UV, 2, 4);
  EXPECT_THROW(predict({{0}, {4}}, params), ShapeError);
}

TEST(ForwardBackward, BufferZoneHitGivesExactlyZeroGradients) {
  const auto params = tiny_params(FeatureMode::UVAbsDiff, 4, 8);
  const EncodedPair pair{{0, 1}, {2, 3}};
  const double pred = predict(pair, params);
  const std::vector<Example> batch{{pair, pred + 0.1, 0}, {{{4}, {5, 6}}, predict({{4}, {5, 6}}, params) - 0.2, 0}};
  const auto result = forward_backward(batch, params, LossSpec::smooth_k2(2.0, 0.25));
  EXPECT_EQ(result.loss, 0.0);
  for (const auto* m : {&result.gradients.embeddings, &result.gradients.head_weights}) {
    for (double g : m->values()) EXPECT_EQ(g, 0.0);
  }
  EXPECT_EQ(result.gradients.head_bias, (Vector{0.0}));
}

TEST(ForwardBackward, AbsentTokensGetZeroGradient) {
  const auto params = tiny_params(FeatureMode::UVAbsDiff, 4, 10);
  const std::vector<Example> batch{{{{0, 1}, {2}}, 3.0, 0}, {{{1}, {3, 3}}, 0.0, 0}};
  const auto result = forward_backward(batch, params, LossSpec::mse());
  for (TokenId t = 4; t < 10; ++t) {
    for (double g : result.gradients.embeddings.row(t)) EXPECT_EQ(g, 0.0);
  }
  double touched = 0.0;
  for (TokenId t = 0; t < 4; ++t) {
    for (double g : result.gradients.embeddings.row(t)) touched += std::abs(g);
  }
  EXPECT_GT(touched, 0.0);
}

TEST(ForwardBackward, ClampedOvershootBlocksGradient) {
  auto params = tiny_params(FeatureMode::UVAbsDiff, 4, 6);
  params.head_bias = {10.0};  // far above the range
  const std::vector<Example> batch{{{{0}, {1}}, 3.0, 0}};
  ForwardBackwardOptions opts;
  opts.clamp_range = std::pair{0.0, 3.0};
  const auto clamped = forward_backward(batch, params, LossSpec::smooth_k2(2.0, 0.25), opts);
  EXPECT_EQ(clamped.loss, 0.0);
  EXPECT_EQ(clamped.gradients.head_bias[0], 0.0);
  const auto raw = forward_backward(batch, params, LossSpec::smooth_k2(2.0, 0.25));
  EXPECT_GT(raw.loss, 0.0);
  EXPECT_GT(raw.gradients.head_bias[0], 0.0);
}

TEST(ForwardBackward, HeadAndLossMustAgree) {
  const auto regression = tiny_params(FeatureMode::UV, 2, 4);
  const std::vector<Example> batch{{{{0}, {1}}, 1.0, 0}};
  EXPECT_THROW(forward_backward(batch, regression, LossSpec::cross_entropy()), ShapeError);
  InitOptions opts;
  opts.dim = 2;
  opts.head = HeadKind::Classification;
  opts.classes = 3;
  const auto classifier = init_params(4, opts);
  EXPECT_THROW(forward_backward(batch, classifier, LossSpec::mse()), ShapeError);
  EXPECT_THROW(forward_backward({}, regression, LossSpec::mse()), InvalidInput);
}

TEST(ForwardBackward, InfoNceLeavesHeadUntouched) {
  const auto params = tiny_params(FeatureMode::UVAbsDiff, 4, 10);
  const std::vector<Example> batch{{{{0, 1}, {2}}, 0, 0}, {{{3}, {4, 5}}, 0, 0}, {{{6}, {7}}, 0, 0}};
  const auto result = forward_backward(batch, params, LossSpec::info_nce(0.5));
  EXPECT_GT(result.loss, 0.0);
  for (double g : result.gradients.head_weights.values()) EXPECT_EQ(g, 0.0);
  EXPECT_EQ(result.gradients.head_bias[0], 0.0);
}

TEST(ForwardBackward, GradientsMatchFiniteDifferencesForEveryLossAndMode) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    GradCheckOptions opts;
    opts.seed = seed;
    for (const auto& c : run_gradcheck_suite(opts)) {
      EXPECT_TRUE(c.passed) << c.label << " seed " << seed << " max rel err " << c.result.max_relative_error
                            << " at " << c.result.worst_parameter;
    }
  }
}

}  // namespace
}  // namespace stsreg
