#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "stsreg/data.hpp"
#include "stsreg/encoder.hpp"
#include "stsreg/label_map.hpp"
#include "stsreg/losses.hpp"

namespace stsreg {

/// HeadOnly updates the head and leaves the embedding table frozen; Joint updates everything.
enum class Stage { HeadOnly, Joint };

std::string_view to_string(Stage stage) noexcept;
Stage parse_stage(std::string_view name);

enum class OptimizerKind { SGD, Adam };

std::string_view to_string(OptimizerKind kind) noexcept;
OptimizerKind parse_optimizer(std::string_view name);

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t epochs = 1;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  std::size_t eval_every = 50;
  std::size_t max_tokens = 256;
  bool clamp_predictions = true;
  OptimizerKind optimizer = OptimizerKind::SGD;

  /// Throws InvalidInput unless every positive field is positive and lr >= 0 is finite.
  void validate() const;
};

/// Encoded examples plus the closed range of their numeric targets (used for clamping).
struct TrainData {
  std::vector<Example> examples;
  std::pair<double, double> target_range{0.0, 0.0};
};

/// Continuous data regresses on the raw score; categorical data is mapped
/// through `mapping` (node value as target, node index as class).
TrainData make_train_data(const Dataset& dataset, const Vocabulary& vocab, std::size_t max_tokens,
                          const std::optional<LabelMapping>& mapping = std::nullopt);

/// (anchor, positive) examples from pairs scoring at least `threshold`, for InfoNCE.
TrainData make_contrastive_data(const Dataset& dataset, const Vocabulary& vocab, std::size_t max_tokens,
                                double threshold = 4.0);

/// p <- p - lr * g for every parameter the stage leaves unfrozen.
void sgd_step(ModelParams& params, const ModelParams& gradients, double learning_rate, Stage stage);

/// Adaptive moments (beta1 0.9, beta2 0.999, eps 1e-8) with bias correction.
class AdamOptimizer {
public:
  explicit AdamOptimizer(const ModelParams& shape);
  void step(ModelParams& params, const ModelParams& gradients, double learning_rate, Stage stage);

private:
  ModelParams m_;
  ModelParams v_;
  std::uint64_t t_ = 0;
};

/// One row per optimizer step (step >= 1, with its batch loss) plus a step-0
/// row for the initial parameters. dev_spearman is present on evaluation rows.
struct HistoryRow {
  std::size_t step = 0;
  std::size_t epoch = 0;
  std::optional<double> train_loss;
  std::optional<double> dev_spearman;

  bool operator==(const HistoryRow&) const = default;
};

struct TrainResult {
  Model best;
  std::size_t best_step = 0;
  std::optional<double> best_dev_spearman;
  std::vector<HistoryRow> history;
};

/// Mini-batch training with dev-set checkpoint selection.
///
/// Shuffles once per epoch (Fisher-Yates under config.seed), evaluates dev
/// Spearman at step 0, every eval_every steps and at each epoch end, and keeps
/// the parameters with the highest dev Spearman (earliest wins ties). Throws
/// TrainingError on a non-finite loss.
TrainResult train(const Model& model, const TrainData& data, const Dataset& dev, const TrainConfig& config,
                  const LossSpec& loss, Stage stage);

/// Spearman of the model on `dev`; nullopt when undefined (constant predictions).
std::optional<double> dev_spearman(const Model& model, const Dataset& dev);

struct TwoStageConfig {
  TrainConfig head_only;  ///< stage 1, encoder frozen
  TrainConfig joint;      ///< stage 2, everything trainable
};

struct TwoStageResult {
  TrainResult head_only;
  TrainResult joint;
};

/// Stage 1 trains only the head on the categorical (NLI-style) data; stage 2
/// trains everything on the continuous (STS-style) data, starting from the
/// stage-1 checkpoint. Both stages use `loss` (Smooth K2 unless overridden).
TwoStageResult two_stage_finetune(const Model& model, const TrainData& stage1_data, const TrainData& stage2_data,
                                  const Dataset& dev, const TwoStageConfig& config, const LossSpec& loss);

/// History as CSV: step,epoch,train_loss,dev_spearman (empty cells where absent).
std::string format_history_csv(std::span<const HistoryRow> history);

}  // namespace stsreg
