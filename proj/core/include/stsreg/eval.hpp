#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "stsreg/data.hpp"
#include "stsreg/encoder.hpp"
#include "stsreg/label_map.hpp"

namespace stsreg {

/// 1-based ranks; tied values share the mean of the ranks they cover.
std::vector<double> fractional_ranks(std::span<const double> values);

/// Pearson correlation of fractional ranks.
///
/// Throws InvalidInput on length mismatch or fewer than two samples and
/// UndefinedStatistic when either input is constant.
double spearman(std::span<const double> predictions, std::span<const double> golds);

double pearson(std::span<const double> a, std::span<const double> b);

/// dot(u, v) / (|u| |v|); throws InvalidInput for a zero vector.
double cosine(std::span<const double> u, std::span<const double> v);

/// Scalar score from raw head outputs; see score_pair.
double score_from_outputs(std::span<const double> outputs, HeadKind head, const std::optional<LabelMapping>& mapping);

/// Model score for a pair. Regression heads return the prediction; classification
/// heads return the softmax-weighted mean of the mapping's nodes (class indices
/// when the model carries no mapping).
double score_pair(const Model& model, const SentencePair& pair);

/// Predicted category index: nearest node for regression heads, argmax for classification heads.
std::size_t predict_class(const Model& model, const SentencePair& pair, const LabelMapping& mapping);

/// Gold values used for rank correlation: scores, or mapped node values for categorical data.
std::vector<double> gold_values(const Dataset& dataset, const std::optional<LabelMapping>& mapping);

/// Fraction of pairs whose predicted category equals the gold label.
double accuracy(const Model& model, const Dataset& dataset, const LabelMapping& mapping);

struct DatasetScore {
  std::string name;
  double spearman = 0.0;
  std::optional<double> accuracy;

  bool operator==(const DatasetScore&) const = default;
};

struct EvalReport {
  std::vector<DatasetScore> datasets;
  double average = 0.0;

  std::string to_json() const;
  static EvalReport from_json(std::string_view text);
  /// Aligned table: one column per dataset plus "Avg.", Spearman x 100.
  std::string to_table(std::string_view model_name = "model") const;

  bool operator==(const EvalReport&) const = default;
};

/// Builds a report from per-dataset scores; average is their Spearman mean.
EvalReport make_report(std::vector<DatasetScore> scores);

/// Spearman per dataset (accuracy too where categorical) and the mean Spearman.
/// Categorical datasets need a mapping, either passed or carried by the model.
EvalReport evaluate(const Model& model, std::span<const Dataset> datasets,
                    const std::optional<LabelMapping>& mapping = std::nullopt);

}  // namespace stsreg
