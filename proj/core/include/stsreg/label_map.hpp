#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace stsreg {

/// Ordered categories (ascending similarity) placed on evenly spaced numeric
/// nodes start, start + d, start + 2d, ...
///
/// Immutable after construction. Nodes are always computed as start + i * d,
/// so the spacing invariant holds by construction.
class LabelMapping {
public:
  /// Throws InvalidInput for fewer than two categories, duplicate names,
  /// or a non-positive/non-finite interval.
  LabelMapping(std::vector<std::string> categories, double start, double interval);

  /// contradiction -> 0, neutral -> 1, entailment -> 2.
  static LabelMapping nli();

  const std::vector<std::string>& categories() const noexcept { return categories_; }
  const std::vector<double>& nodes() const noexcept { return nodes_; }
  std::size_t size() const noexcept { return categories_.size(); }
  double start() const noexcept { return start_; }
  double interval() const noexcept { return interval_; }
  double lowest() const noexcept { return nodes_.front(); }
  double highest() const noexcept { return nodes_.back(); }

  double encode(std::string_view category) const;
  std::size_t index_of(std::string_view category) const;
  bool contains(std::string_view category) const noexcept;
  const std::string& decode(std::size_t node_index) const;

  /// Index of the nearest node; exact midpoints go to the higher node and
  /// predictions past either end go to the terminal node.
  std::size_t classify_index(double prediction) const;
  const std::string& classify(double prediction) const { return categories_[classify_index(prediction)]; }

  /// d/2: the largest deviation from an interior node that still classifies correctly.
  double correctness_radius() const noexcept { return interval_ / 2.0; }

  /// {"categories": [...], "start": s, "interval": d}
  std::string to_json() const;
  static LabelMapping from_json(std::string_view text);

  bool operator==(const LabelMapping& other) const {
    return categories_ == other.categories_ && start_ == other.start_ && interval_ == other.interval_;
  }

private:
  std::vector<std::string> categories_;
  std::vector<double> nodes_;
  double start_;
  double interval_;
};

/// Convenience for build_mapping(categories, start, d).
inline LabelMapping build_mapping(std::vector<std::string> categories, double start, double interval) {
  return LabelMapping(std::move(categories), start, interval);
}

}  // namespace stsreg
