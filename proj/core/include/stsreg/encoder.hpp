#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "stsreg/label_map.hpp"
#include "stsreg/losses.hpp"
#include "stsreg/tensor.hpp"

namespace stsreg {

using TokenId = std::uint32_t;
using TokenSequence = std::vector<TokenId>;

/// Token -> id table. Known tokens occupy [0, n); the OOV and padding ids are
/// appended after them, so ids are dense in [0, size()).
class Vocabulary {
public:
  /// Ids are assigned in the order given; duplicates are ignored.
  explicit Vocabulary(std::span<const std::string> tokens = {});

  /// Vocabulary of every token (per the tokenizer rules) in the given texts, sorted.
  static Vocabulary build(std::span<const std::string> texts);

  std::size_t size() const noexcept { return tokens_.size() + 2; }
  std::size_t known_size() const noexcept { return tokens_.size(); }
  TokenId oov_id() const noexcept { return static_cast<TokenId>(tokens_.size()); }
  TokenId pad_id() const noexcept { return static_cast<TokenId>(tokens_.size() + 1); }

  /// oov_id() for unknown tokens.
  TokenId id(std::string_view token) const;
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Lowercased words split on whitespace and ASCII punctuation. Bytes >= 0x80
/// are kept as word characters, so UTF-8 text passes through unchanged.
std::vector<std::string> split_words(std::string_view text);

/// Word ids truncated to max_tokens. An input with no words yields {oov_id}.
TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_tokens = 256);

enum class FeatureMode { UV, AbsDiff, UVAbsDiff };

std::string_view to_string(FeatureMode mode) noexcept;
FeatureMode parse_feature_mode(std::string_view name);
/// Multiple of the embedding dimension: UV 2, AbsDiff 1, UVAbsDiff 3.
std::size_t feature_multiplier(FeatureMode mode) noexcept;

enum class HeadKind { Regression, Classification };

std::string_view to_string(HeadKind kind) noexcept;
HeadKind parse_head_kind(std::string_view name);

/// The complete trainable state: one shared embedding table for both towers
/// and a linear head over the pair features.
///
/// head_weights is outputs x feature_length. A regression head has one output,
/// a classification head has K.
struct ModelParams {
  Matrix embeddings;
  Matrix head_weights;
  Vector head_bias;
  FeatureMode mode = FeatureMode::UVAbsDiff;
  HeadKind head = HeadKind::Regression;

  std::size_t dim() const noexcept { return embeddings.cols(); }
  std::size_t vocab_size() const noexcept { return embeddings.rows(); }
  std::size_t outputs() const noexcept { return head_weights.rows(); }
  std::size_t feature_length() const noexcept { return feature_multiplier(mode) * dim(); }
  std::size_t head_weight_count() const noexcept { return head_weights.size(); }

  /// Throws ShapeError unless the head matches the feature mode and head kind.
  void validate() const;

  bool operator==(const ModelParams&) const = default;
};

struct InitOptions {
  std::size_t dim = 32;
  FeatureMode mode = FeatureMode::UVAbsDiff;
  HeadKind head = HeadKind::Regression;
  std::size_t classes = 1;  ///< outputs of a classification head
  double bias = 0.0;        ///< initial head bias (every output)
  double embedding_scale = 0.05;
  std::uint64_t seed = 0;
};

/// Embeddings ~ U(-embedding_scale, embedding_scale); head weights ~ U(-s, s)
/// with s = feature_length^(-1/2).
ModelParams init_params(std::size_t vocab_size, const InitOptions& options);

/// Zero tensors shaped like params.
ModelParams zeros_like(const ModelParams& params);

/// Mean of the embedding rows of the tokens.
Vector embed_sentence(std::span<const TokenId> tokens, const ModelParams& params);

Vector features(std::span<const double> u, std::span<const double> v, FeatureMode mode);

struct EncodedPair {
  TokenSequence first;
  TokenSequence second;
};

/// Head outputs (one value for a regression head, K logits for classification).
Vector head_outputs(const EncodedPair& pair, const ModelParams& params);

/// Scalar similarity score of a regression head.
double predict(const EncodedPair& pair, const ModelParams& params);

/// Target of one training example. target_value drives regression losses,
/// class_index drives cross-entropy.
struct Example {
  EncodedPair pair;
  double target_value = 0.0;
  std::size_t class_index = 0;
};

struct ForwardBackwardOptions {
  /// Clamp predictions into [low, high] before the residual.
  std::optional<std::pair<double, double>> clamp_range;
};

struct ForwardBackwardResult {
  double loss = 0.0;
  ModelParams gradients;
};

/// Batch-mean loss and its exact gradient with respect to every parameter.
///
/// Regression kinds use target_value, CrossEntropy uses class_index, and InfoNCE
/// treats pair.first as the anchor and pair.second as its positive (the head
/// receives no gradient).
ForwardBackwardResult forward_backward(std::span<const Example> batch, const ModelParams& params,
                                       const LossSpec& loss, const ForwardBackwardOptions& options = {});

/// Loss only; used by finite-difference checks and evaluation.
double batch_loss(std::span<const Example> batch, const ModelParams& params, const LossSpec& loss,
                  const ForwardBackwardOptions& options = {});

/// A trained model: tokenizer state, parameters and (for categorical tasks) the label mapping.
struct Model {
  Vocabulary vocab;
  ModelParams params;
  std::size_t max_tokens = 256;
  std::optional<LabelMapping> mapping;

  EncodedPair encode(std::string_view first, std::string_view second) const {
    return {tokenize(first, vocab, max_tokens), tokenize(second, vocab, max_tokens)};
  }
  double predict(std::string_view first, std::string_view second) const {
    return stsreg::predict(encode(first, second), params);
  }

  bool operator==(const Model&) const = default;
};

}  // namespace stsreg
