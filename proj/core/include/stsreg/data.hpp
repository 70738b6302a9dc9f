#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "stsreg/label_map.hpp"

namespace stsreg {

/// Two sentences with either a continuous score or a categorical label.
struct SentencePair {
  std::string s1;
  std::string s2;
  std::variant<double, std::string> target;

  bool has_score() const noexcept { return std::holds_alternative<double>(target); }
  double score() const { return std::get<double>(target); }
  const std::string& label() const { return std::get<std::string>(target); }

  bool operator==(const SentencePair&) const = default;
};

struct ScoreRange {
  double low = 0.0;
  double high = 5.0;
  bool operator==(const ScoreRange&) const = default;
};

/// Continuous datasets declare a score range, categorical ones a category list.
using DatasetSchema = std::variant<ScoreRange, std::vector<std::string>>;

/// A named, validated collection of pairs. Every pair satisfies the schema.
class Dataset {
public:
  Dataset(std::string name, DatasetSchema schema, std::vector<SentencePair> pairs = {});

  const std::string& name() const noexcept { return name_; }
  const DatasetSchema& schema() const noexcept { return schema_; }
  const std::vector<SentencePair>& pairs() const noexcept { return pairs_; }
  std::size_t size() const noexcept { return pairs_.size(); }
  bool empty() const noexcept { return pairs_.empty(); }
  bool is_continuous() const noexcept { return std::holds_alternative<ScoreRange>(schema_); }
  const ScoreRange& score_range() const;
  const std::vector<std::string>& categories() const;

  bool operator==(const Dataset&) const = default;

private:
  std::string name_;
  DatasetSchema schema_;
  std::vector<SentencePair> pairs_;
};

/// Reads `score<TAB>s1<TAB>s2` (or `label<TAB>s1<TAB>s2`) lines, UTF-8, no header.
/// Blank lines are skipped; fields past the third are ignored. Any malformed
/// line rejects the whole file with a ParseError naming the line.
Dataset load_tsv(const std::filesystem::path& path, const DatasetSchema& schema, std::string name = {});

/// Detects the schema: all-numeric first fields give a continuous dataset whose
/// range is `range` (or the observed min/max when absent); otherwise categorical
/// with categories taken from `mapping` (or first-appearance order).
Dataset load_tsv_auto(const std::filesystem::path& path, const std::optional<ScoreRange>& range = std::nullopt,
                      const std::optional<LabelMapping>& mapping = std::nullopt, std::string name = {});

/// Writes the canonical TSV form. Scores use the shortest round-trip representation.
void save_tsv(const Dataset& dataset, const std::filesystem::path& path);
std::string format_tsv(const Dataset& dataset);

struct RemovedPair {
  SentencePair pair;
  std::string test_dataset;
};

struct DedupResult {
  Dataset filtered;
  std::vector<RemovedPair> removed;
};

/// Removes every training pair whose (s1, s2) equals a test pair in either
/// order. Comparison is exact after trimming outer whitespace; scores are
/// ignored and test sets are never modified.
DedupResult dedup_filter(const Dataset& train, const std::vector<Dataset>& tests);

/// One JSON object per removed pair: {"s1", "s2", "score"|"label", "test_dataset"}.
std::string format_removal_audit(const std::vector<RemovedPair>& removed);

/// 5 * (score - 1) / 4, mapping [1, 5] onto [0, 5].
double rescale_sick(double score);
/// Applies rescale_sick to every pair; the result has range [0, 5].
Dataset rescale_sick(const Dataset& dataset);

/// Concatenation in order. All inputs must share one schema.
Dataset merge(const std::vector<Dataset>& datasets, std::string name = "merged");

/// contradiction -> 0, neutral -> 1, entailment -> 2.
double map_nli(std::string_view label);

/// (s1, s2) of every pair with score >= threshold.
std::vector<std::pair<std::string, std::string>> extract_positive_pairs(const Dataset& dataset,
                                                                         double threshold = 4.0);

/// Outer ASCII whitespace removed.
std::string_view trim(std::string_view text) noexcept;

bool is_valid_utf8(std::string_view text) noexcept;

}  // namespace stsreg
