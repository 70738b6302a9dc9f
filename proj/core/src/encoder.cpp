#include "stsreg/encoder.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <random>
#include <set>

#include "stsreg/error.hpp"

namespace stsreg {

namespace {

bool is_word_byte(unsigned char c) {
  if (c >= 0x80) {
    return true;
  }
  return !(std::isspace(c) || std::ispunct(c) || std::iscntrl(c));
}

double sign_of(double value) { return value > 0.0 ? 1.0 : (value < 0.0 ? -1.0 : 0.0); }

void accumulate_rows(Matrix& grad, std::span<const TokenId> tokens, std::span<const double> d_embedding) {
  const double share = 1.0 / static_cast<double>(tokens.size());
  for (TokenId t : tokens) {
    auto row = grad.row(t);
    for (std::size_t d = 0; d < row.size(); ++d) {
      row[d] += d_embedding[d] * share;
    }
  }
}

// Back-propagates d(loss)/d(features) into d(loss)/du and d(loss)/dv.
void backprop_features(std::span<const double> d_features, std::span<const double> u, std::span<const double> v,
                       FeatureMode mode, Vector& du, Vector& dv) {
  const std::size_t dim = u.size();
  du.assign(dim, 0.0);
  dv.assign(dim, 0.0);
  std::size_t abs_offset = 0;
  switch (mode) {
    case FeatureMode::UV:
      for (std::size_t d = 0; d < dim; ++d) {
        du[d] = d_features[d];
        dv[d] = d_features[dim + d];
      }
      return;
    case FeatureMode::AbsDiff:
      abs_offset = 0;
      break;
    case FeatureMode::UVAbsDiff:
      for (std::size_t d = 0; d < dim; ++d) {
        du[d] = d_features[d];
        dv[d] = d_features[dim + d];
      }
      abs_offset = 2 * dim;
      break;
  }
  for (std::size_t d = 0; d < dim; ++d) {
    const double g = d_features[abs_offset + d] * sign_of(u[d] - v[d]);
    du[d] += g;
    dv[d] -= g;
  }
}

void check_pair(const EncodedPair& pair, const ModelParams& params) {
  for (const auto* seq : {&pair.first, &pair.second}) {
    if (seq->empty()) {
      throw InvalidInput("cannot embed an empty token sequence");
    }
    for (TokenId t : *seq) {
      if (t >= params.vocab_size()) {
        throw ShapeError("token id " + std::to_string(t) + " outside embedding table of " +
                         std::to_string(params.vocab_size()) + " rows");
      }
    }
  }
}

}  // namespace

Vocabulary::Vocabulary(std::span<const std::string> tokens) {
  for (const auto& token : tokens) {
    if (index_.contains(token)) {
      continue;
    }
    index_.emplace(token, static_cast<TokenId>(tokens_.size()));
    tokens_.push_back(token);
  }
}

Vocabulary Vocabulary::build(std::span<const std::string> texts) {
  std::set<std::string> unique;
  for (const auto& text : texts) {
    for (auto& word : split_words(text)) {
      unique.insert(std::move(word));
    }
  }
  std::vector<std::string> sorted(unique.begin(), unique.end());
  return Vocabulary(sorted);
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? oov_id() : it->second;
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (is_word_byte(c)) {
      current.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : ch);
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) {
    words.push_back(std::move(current));
  }
  return words;
}

TokenSequence tokenize(std::string_view text, const Vocabulary& vocab, std::size_t max_tokens) {
  TokenSequence ids;
  for (const auto& word : split_words(text)) {
    if (ids.size() >= max_tokens) {
      break;
    }
    ids.push_back(vocab.id(word));
  }
  if (ids.empty()) {
    ids.push_back(vocab.oov_id());
  }
  return ids;
}

std::string_view to_string(FeatureMode mode) noexcept {
  switch (mode) {
    case FeatureMode::UV:
      return "uv";
    case FeatureMode::AbsDiff:
      return "absdiff";
    case FeatureMode::UVAbsDiff:
      return "uv_absdiff";
  }
  return "unknown";
}

FeatureMode parse_feature_mode(std::string_view name) {
  if (name == "uv") return FeatureMode::UV;
  if (name == "absdiff") return FeatureMode::AbsDiff;
  if (name == "uv_absdiff") return FeatureMode::UVAbsDiff;
  throw InvalidInput("unknown feature mode '" + std::string(name) + "' (expected uv, absdiff or uv_absdiff)");
}

std::size_t feature_multiplier(FeatureMode mode) noexcept {
  switch (mode) {
    case FeatureMode::UV:
      return 2;
    case FeatureMode::AbsDiff:
      return 1;
    case FeatureMode::UVAbsDiff:
      return 3;
  }
  return 0;
}

std::string_view to_string(HeadKind kind) noexcept {
  return kind == HeadKind::Regression ? "regression" : "classification";
}

HeadKind parse_head_kind(std::string_view name) {
  if (name == "regression") return HeadKind::Regression;
  if (name == "classification") return HeadKind::Classification;
  throw InvalidInput("unknown head kind '" + std::string(name) + "'");
}

void ModelParams::validate() const {
  if (dim() == 0 || vocab_size() == 0) {
    throw ShapeError("model has an empty embedding table");
  }
  if (head_weights.cols() != feature_length()) {
    throw ShapeError("head expects " + std::to_string(head_weights.cols()) + " features but mode " +
                     std::string(to_string(mode)) + " produces " + std::to_string(feature_length()));
  }
  if (head_bias.size() != outputs()) {
    throw ShapeError("head bias length does not match head outputs");
  }
  if (head == HeadKind::Regression && outputs() != 1) {
    throw ShapeError("regression head must have exactly one output");
  }
  if (head == HeadKind::Classification && outputs() < 2) {
    throw ShapeError("classification head needs at least two outputs");
  }
}

ModelParams init_params(std::size_t vocab_size, const InitOptions& options) {
  if (vocab_size == 0 || options.dim == 0) {
    throw InvalidInput("init_params: vocabulary and dimension must be non-empty");
  }
  const std::size_t outputs = options.head == HeadKind::Regression ? 1 : options.classes;
  ModelParams params;
  params.mode = options.mode;
  params.head = options.head;
  params.embeddings = Matrix(vocab_size, options.dim);
  params.head_weights = Matrix(outputs, feature_multiplier(options.mode) * options.dim);
  params.head_bias = Vector(outputs, options.bias);

  std::mt19937_64 rng(options.seed);
  std::uniform_real_distribution<double> embedding_dist(-options.embedding_scale, options.embedding_scale);
  for (double& w : params.embeddings.values()) {
    w = embedding_dist(rng);
  }
  const double s = 1.0 / std::sqrt(static_cast<double>(params.head_weights.cols()));
  std::uniform_real_distribution<double> head_dist(-s, s);
  for (double& w : params.head_weights.values()) {
    w = head_dist(rng);
  }
  params.validate();
  return params;
}

ModelParams zeros_like(const ModelParams& params) {
  ModelParams z;
  z.mode = params.mode;
  z.head = params.head;
  z.embeddings = Matrix(params.embeddings.rows(), params.embeddings.cols());
  z.head_weights = Matrix(params.head_weights.rows(), params.head_weights.cols());
  z.head_bias = Vector(params.head_bias.size(), 0.0);
  return z;
}

Vector embed_sentence(std::span<const TokenId> tokens, const ModelParams& params) {
  if (tokens.empty()) {
    throw InvalidInput("embed_sentence: empty token sequence");
  }
  Vector out(params.dim(), 0.0);
  for (TokenId t : tokens) {
    if (t >= params.vocab_size()) {
      throw ShapeError("token id " + std::to_string(t) + " outside embedding table");
    }
    const auto row = params.embeddings.row(t);
    for (std::size_t d = 0; d < out.size(); ++d) {
      out[d] += row[d];
    }
  }
  const double inv = 1.0 / static_cast<double>(tokens.size());
  for (double& x : out) {
    x *= inv;
  }
  return out;
}

Vector features(std::span<const double> u, std::span<const double> v, FeatureMode mode) {
  if (u.size() != v.size()) {
    throw ShapeError("features: embedding dimensions differ (" + std::to_string(u.size()) + " vs " +
                     std::to_string(v.size()) + ")");
  }
  Vector out;
  out.reserve(feature_multiplier(mode) * u.size());
  if (mode != FeatureMode::AbsDiff) {
    out.insert(out.end(), u.begin(), u.end());
    out.insert(out.end(), v.begin(), v.end());
  }
  if (mode != FeatureMode::UV) {
    for (std::size_t d = 0; d < u.size(); ++d) {
      out.push_back(std::abs(u[d] - v[d]));
    }
  }
  return out;
}

Vector head_outputs(const EncodedPair& pair, const ModelParams& params) {
  params.validate();
  check_pair(pair, params);
  const Vector u = embed_sentence(pair.first, params);
  const Vector v = embed_sentence(pair.second, params);
  const Vector f = features(u, v, params.mode);
  Vector out(params.outputs());
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = dot(params.head_weights.row(k), f) + params.head_bias[k];
  }
  return out;
}

double predict(const EncodedPair& pair, const ModelParams& params) {
  if (params.head != HeadKind::Regression) {
    throw ShapeError("predict: model has a classification head");
  }
  return head_outputs(pair, params).front();
}

ForwardBackwardResult forward_backward(std::span<const Example> batch, const ModelParams& params,
                                       const LossSpec& loss, const ForwardBackwardOptions& options) {
  if (batch.empty()) {
    throw InvalidInput("forward_backward: empty batch");
  }
  params.validate();
  const LossKind kind = loss.kind();
  if (is_regression(kind) && params.head != HeadKind::Regression) {
    throw ShapeError("regression loss requires a regression head");
  }
  if (kind == LossKind::CrossEntropy && params.head != HeadKind::Classification) {
    throw ShapeError("cross-entropy requires a classification head");
  }

  ForwardBackwardResult result{0.0, zeros_like(params)};
  ModelParams& grad = result.gradients;
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  std::vector<Vector> us;
  std::vector<Vector> vs;
  us.reserve(batch.size());
  vs.reserve(batch.size());
  for (const auto& ex : batch) {
    check_pair(ex.pair, params);
    us.push_back(embed_sentence(ex.pair.first, params));
    vs.push_back(embed_sentence(ex.pair.second, params));
  }

  if (kind == LossKind::InfoNCE) {
    const InfoNceValue nce = info_nce(us, vs, loss.tau());
    result.loss = nce.value;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      accumulate_rows(grad.embeddings, batch[i].pair.first, nce.grad_anchors[i]);
      accumulate_rows(grad.embeddings, batch[i].pair.second, nce.grad_positives[i]);
    }
    return result;
  }

  Vector d_outputs(params.outputs());
  Vector d_features(params.feature_length());
  Vector du;
  Vector dv;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const Example& ex = batch[i];
    const Vector f = features(us[i], vs[i], params.mode);
    Vector outputs(params.outputs());
    for (std::size_t k = 0; k < outputs.size(); ++k) {
      outputs[k] = dot(params.head_weights.row(k), f) + params.head_bias[k];
    }

    bool any_gradient = false;
    if (kind == LossKind::CrossEntropy) {
      const CrossEntropyValue ce = cross_entropy(outputs, ex.class_index);
      result.loss += ce.value * inv_n;
      for (std::size_t k = 0; k < outputs.size(); ++k) {
        d_outputs[k] = ce.grad[k] * inv_n;
      }
      any_gradient = true;
    } else {
      ClampedValue pred{outputs[0], 1.0};
      if (options.clamp_range) {
        pred = clamp_to_range(outputs[0], options.clamp_range->first, options.clamp_range->second);
      }
      const LossValue lv = regression_loss_wrt_prediction(pred.value, ex.target_value, loss);
      result.loss += lv.value * inv_n;
      d_outputs[0] = lv.grad * pred.grad * inv_n;
      any_gradient = d_outputs[0] != 0.0;
    }
    if (!any_gradient) {
      continue;
    }

    std::fill(d_features.begin(), d_features.end(), 0.0);
    for (std::size_t k = 0; k < d_outputs.size(); ++k) {
      const double g = d_outputs[k];
      auto w_row = params.head_weights.row(k);
      auto gw_row = grad.head_weights.row(k);
      for (std::size_t j = 0; j < f.size(); ++j) {
        gw_row[j] += g * f[j];
        d_features[j] += g * w_row[j];
      }
      grad.head_bias[k] += g;
    }
    backprop_features(d_features, us[i], vs[i], params.mode, du, dv);
    accumulate_rows(grad.embeddings, ex.pair.first, du);
    accumulate_rows(grad.embeddings, ex.pair.second, dv);
  }
  return result;
}

double batch_loss(std::span<const Example> batch, const ModelParams& params, const LossSpec& loss,
                  const ForwardBackwardOptions& options) {
  if (batch.empty()) {
    throw InvalidInput("batch_loss: empty batch");
  }
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  if (loss.kind() == LossKind::InfoNCE) {
    std::vector<Vector> us;
    std::vector<Vector> vs;
    for (const auto& ex : batch) {
      check_pair(ex.pair, params);
      us.push_back(embed_sentence(ex.pair.first, params));
      vs.push_back(embed_sentence(ex.pair.second, params));
    }
    return info_nce(us, vs, loss.tau()).value;
  }
  double total = 0.0;
  for (const auto& ex : batch) {
    const Vector outputs = head_outputs(ex.pair, params);
    if (loss.kind() == LossKind::CrossEntropy) {
      total += cross_entropy(outputs, ex.class_index).value;
      continue;
    }
    double pred = outputs.front();
    if (options.clamp_range) {
      pred = std::clamp(pred, options.clamp_range->first, options.clamp_range->second);
    }
    total += regression_loss(residual(pred, ex.target_value).x, loss).value;
  }
  return total * inv_n;
}

}  // namespace stsreg
