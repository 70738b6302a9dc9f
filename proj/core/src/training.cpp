#include "stsreg/training.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "stsreg/error.hpp"
#include "stsreg/eval.hpp"

namespace stsreg {

namespace {

void require_same_shape(const ModelParams& a, const ModelParams& b) {
  if (a.embeddings.rows() != b.embeddings.rows() || a.embeddings.cols() != b.embeddings.cols() ||
      a.head_weights.rows() != b.head_weights.rows() || a.head_weights.cols() != b.head_weights.cols() ||
      a.head_bias.size() != b.head_bias.size()) {
    throw ShapeError("parameter and gradient shapes differ");
  }
}

// Dev pairs encoded once against the (fixed) vocabulary.
struct EncodedDev {
  std::vector<EncodedPair> pairs;
  std::vector<double> golds;
};

EncodedDev encode_dev(const Model& model, const Dataset& dev) {
  EncodedDev out;
  out.golds = gold_values(dev, model.mapping);
  out.pairs.reserve(dev.size());
  for (const auto& p : dev.pairs()) {
    out.pairs.push_back(model.encode(p.s1, p.s2));
  }
  return out;
}

std::optional<double> score_dev(const Model& model, const EncodedDev& dev) {
  std::vector<double> preds;
  preds.reserve(dev.pairs.size());
  for (const auto& pair : dev.pairs) {
    preds.push_back(score_from_outputs(head_outputs(pair, model.params), model.params.head, model.mapping));
  }
  try {
    return spearman(preds, dev.golds);
  } catch (const UndefinedStatistic&) {
    return std::nullopt;
  }
}

bool improves(const std::optional<double>& candidate, const std::optional<double>& best, bool have_best) {
  if (!have_best) {
    return true;
  }
  if (!candidate) {
    return false;
  }
  return !best || *candidate > *best;
}

template <typename F>
void for_each_trainable(ModelParams& params, const ModelParams& grads, Stage stage, F&& f) {
  if (stage == Stage::Joint) {
    f(params.embeddings.values(), grads.embeddings.values());
  }
  f(params.head_weights.values(), grads.head_weights.values());
  f(std::span<double>(params.head_bias), std::span<const double>(grads.head_bias));
}

bool all_finite(const ModelParams& params) {
  const auto finite = [](std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
  };
  return finite(params.embeddings.values()) && finite(params.head_weights.values()) && finite(params.head_bias);
}

}  // namespace

std::string_view to_string(Stage stage) noexcept { return stage == Stage::HeadOnly ? "head_only" : "joint"; }

Stage parse_stage(std::string_view name) {
  if (name == "head_only") return Stage::HeadOnly;
  if (name == "joint") return Stage::Joint;
  throw InvalidInput("unknown stage '" + std::string(name) + "' (expected head_only or joint)");
}

std::string_view to_string(OptimizerKind kind) noexcept { return kind == OptimizerKind::SGD ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::SGD;
  if (name == "adam") return OptimizerKind::Adam;
  throw InvalidInput("unknown optimizer '" + std::string(name) + "' (expected sgd or adam)");
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw InvalidInput("train config: batch_size must be positive");
  if (epochs == 0) throw InvalidInput("train config: epochs must be positive");
  if (eval_every == 0) throw InvalidInput("train config: eval_every must be positive");
  if (max_tokens == 0) throw InvalidInput("train config: max_tokens must be positive");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw InvalidInput("train config: learning_rate must be finite and non-negative");
  }
}

TrainData make_train_data(const Dataset& dataset, const Vocabulary& vocab, std::size_t max_tokens,
                          const std::optional<LabelMapping>& mapping) {
  TrainData data;
  data.examples.reserve(dataset.size());
  if (dataset.is_continuous()) {
    data.target_range = {dataset.score_range().low, dataset.score_range().high};
    for (const auto& p : dataset.pairs()) {
      data.examples.push_back(
          {{tokenize(p.s1, vocab, max_tokens), tokenize(p.s2, vocab, max_tokens)}, p.score(), 0});
    }
    return data;
  }
  if (!mapping) {
    throw InvalidInput("dataset '" + dataset.name() + "' is categorical; a label mapping is required");
  }
  data.target_range = {mapping->lowest(), mapping->highest()};
  for (const auto& p : dataset.pairs()) {
    const std::size_t index = mapping->index_of(p.label());
    data.examples.push_back({{tokenize(p.s1, vocab, max_tokens), tokenize(p.s2, vocab, max_tokens)},
                             mapping->nodes()[index],
                             index});
  }
  return data;
}

TrainData make_contrastive_data(const Dataset& dataset, const Vocabulary& vocab, std::size_t max_tokens,
                                double threshold) {
  TrainData data;
  data.target_range = {dataset.score_range().low, dataset.score_range().high};
  for (const auto& [anchor, positive] : extract_positive_pairs(dataset, threshold)) {
    data.examples.push_back({{tokenize(anchor, vocab, max_tokens), tokenize(positive, vocab, max_tokens)}, 0.0, 0});
  }
  return data;
}

void sgd_step(ModelParams& params, const ModelParams& gradients, double learning_rate, Stage stage) {
  require_same_shape(params, gradients);
  for_each_trainable(params, gradients, stage, [&](std::span<double> p, std::span<const double> g) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      p[i] -= learning_rate * g[i];
    }
  });
}

AdamOptimizer::AdamOptimizer(const ModelParams& shape) : m_(zeros_like(shape)), v_(zeros_like(shape)) {}

void AdamOptimizer::step(ModelParams& params, const ModelParams& gradients, double learning_rate, Stage stage) {
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;
  require_same_shape(params, gradients);
  require_same_shape(params, m_);
  ++t_;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));

  auto update = [&](std::span<double> p, std::span<const double> g, std::span<double> m, std::span<double> v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      p[i] -= learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  };
  if (stage == Stage::Joint) {
    update(params.embeddings.values(), gradients.embeddings.values(), m_.embeddings.values(), v_.embeddings.values());
  }
  update(params.head_weights.values(), gradients.head_weights.values(), m_.head_weights.values(),
         v_.head_weights.values());
  update(params.head_bias, gradients.head_bias, m_.head_bias, v_.head_bias);
}

std::optional<double> dev_spearman(const Model& model, const Dataset& dev) {
  return score_dev(model, encode_dev(model, dev));
}

TrainResult train(const Model& model, const TrainData& data, const Dataset& dev, const TrainConfig& config,
                  const LossSpec& loss, Stage stage) {
  config.validate();
  model.params.validate();
  if (data.examples.empty()) {
    throw InvalidInput("train: empty training set");
  }
  if (dev.empty()) {
    throw InvalidInput("train: empty dev set");
  }
  if (loss.kind() == LossKind::InfoNCE && stage == Stage::HeadOnly) {
    throw InvalidInput("train: InfoNCE does not reach the head; use the joint stage");
  }

  const EncodedDev encoded_dev = encode_dev(model, dev);
  ForwardBackwardOptions fb_options;
  if (config.clamp_predictions && is_regression(loss.kind())) {
    fb_options.clamp_range = data.target_range;
  }

  Model current = model;
  std::optional<AdamOptimizer> adam;
  if (config.optimizer == OptimizerKind::Adam) {
    adam.emplace(current.params);
  }

  TrainResult result{model, 0, std::nullopt, {}};
  bool have_best = false;
  auto evaluate_at = [&](std::size_t step, HistoryRow& row) {
    row.dev_spearman = score_dev(current, encoded_dev);
    if (improves(row.dev_spearman, result.best_dev_spearman, have_best)) {
      have_best = true;
      result.best.params = current.params;
      result.best_step = step;
      result.best_dev_spearman = row.dev_spearman;
    }
  };

  HistoryRow initial{0, 0, std::nullopt, std::nullopt};
  evaluate_at(0, initial);
  result.history.push_back(initial);

  const std::size_t n = data.examples.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) {
    order[i] = i;
  }
  std::mt19937_64 rng(config.seed);
  std::vector<Example> batch;
  batch.reserve(config.batch_size);
  std::size_t step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    for (std::size_t i = n - 1; i > 0; --i) {
      std::uniform_int_distribution<std::size_t> pick(0, i);
      std::swap(order[i], order[pick(rng)]);
    }
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t end = std::min(n, begin + config.batch_size);
      batch.clear();
      for (std::size_t k = begin; k < end; ++k) {
        batch.push_back(data.examples[order[k]]);
      }
      ++step;
      ForwardBackwardResult fb;
      try {
        fb = forward_backward(batch, current.params, loss, fb_options);
      } catch (const InvalidInput& e) {
        // Targets are validated up front, so this is a diverged (non-finite) prediction.
        throw TrainingError("training diverged at step " + std::to_string(step) + " (epoch " +
                            std::to_string(epoch) + "): " + e.what() + "; try a smaller learning rate");
      }
      if (!std::isfinite(fb.loss)) {
        std::ostringstream msg;
        msg << "non-finite training loss at step " << step << " (epoch " << epoch << ", batch of "
            << batch.size() << "); try a smaller learning rate";
        throw TrainingError(msg.str());
      }
      if (adam) {
        adam->step(current.params, fb.gradients, config.learning_rate, stage);
      } else {
        sgd_step(current.params, fb.gradients, config.learning_rate, stage);
      }
      if (!all_finite(current.params)) {
        throw TrainingError("parameters became non-finite after step " + std::to_string(step) + " (epoch " +
                            std::to_string(epoch) + "); try a smaller learning rate");
      }

      HistoryRow row{step, epoch, fb.loss, std::nullopt};
      const bool epoch_end = end == n;
      if (step % config.eval_every == 0 || epoch_end) {
        evaluate_at(step, row);
      }
      result.history.push_back(row);
    }
  }
  return result;
}

TwoStageResult two_stage_finetune(const Model& model, const TrainData& stage1_data, const TrainData& stage2_data,
                                  const Dataset& dev, const TwoStageConfig& config, const LossSpec& loss) {
  TwoStageResult out;
  out.head_only = train(model, stage1_data, dev, config.head_only, loss, Stage::HeadOnly);
  out.joint = train(out.head_only.best, stage2_data, dev, config.joint, loss, Stage::Joint);
  return out;
}

std::string format_history_csv(std::span<const HistoryRow> history) {
  std::ostringstream os;
  os.precision(17);
  os << "step,epoch,train_loss,dev_spearman\n";
  for (const auto& row : history) {
    os << row.step << ',' << row.epoch << ',';
    if (row.train_loss) {
      os << *row.train_loss;
    }
    os << ',';
    if (row.dev_spearman) {
      os << *row.dev_spearman;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace stsreg
