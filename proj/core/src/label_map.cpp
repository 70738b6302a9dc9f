#include "stsreg/label_map.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>
#include <utility>

#include <json.hpp>

#include "stsreg/error.hpp"

namespace stsreg {

LabelMapping::LabelMapping(std::vector<std::string> categories, double start, double interval)
    : categories_(std::move(categories)), start_(start), interval_(interval) {
  if (categories_.size() < 2) {
    throw InvalidInput("label mapping needs at least two categories");
  }
  if (!std::isfinite(start_)) {
    throw InvalidInput("label mapping start must be finite");
  }
  if (!(interval_ > 0.0) || !std::isfinite(interval_)) {
    throw InvalidInput("label mapping interval must be positive and finite");
  }
  std::unordered_set<std::string> seen;
  for (const auto& name : categories_) {
    if (!seen.insert(name).second) {
      throw InvalidInput("duplicate category '" + name + "' in label mapping");
    }
  }
  nodes_.reserve(categories_.size());
  for (std::size_t i = 0; i < categories_.size(); ++i) {
    nodes_.push_back(start_ + static_cast<double>(i) * interval_);
  }
}

LabelMapping LabelMapping::nli() { return LabelMapping({"contradiction", "neutral", "entailment"}, 0.0, 1.0); }

std::size_t LabelMapping::index_of(std::string_view category) const {
  auto it = std::find(categories_.begin(), categories_.end(), category);
  if (it == categories_.end()) {
    throw InvalidInput("unknown category '" + std::string(category) + "'");
  }
  return static_cast<std::size_t>(it - categories_.begin());
}

bool LabelMapping::contains(std::string_view category) const noexcept {
  return std::find(categories_.begin(), categories_.end(), category) != categories_.end();
}

double LabelMapping::encode(std::string_view category) const { return nodes_[index_of(category)]; }

const std::string& LabelMapping::decode(std::size_t node_index) const {
  if (node_index >= categories_.size()) {
    throw InvalidInput("node index " + std::to_string(node_index) + " out of range [0, " +
                       std::to_string(categories_.size()) + ")");
  }
  return categories_[node_index];
}

std::size_t LabelMapping::classify_index(double prediction) const {
  if (!std::isfinite(prediction)) {
    throw InvalidInput("cannot classify a non-finite prediction");
  }
  const auto last = static_cast<double>(nodes_.size() - 1);
  const double guess = std::clamp(std::floor((prediction - start_) / interval_ + 0.5), 0.0, last);
  auto best = static_cast<std::size_t>(guess);
  // The division above can round across a midpoint; settle it on the actual
  // distances to the neighbouring nodes. Ties go to the higher node.
  auto closer = [&](std::size_t a, std::size_t b) {
    const double da = std::abs(prediction - nodes_[a]);
    const double db = std::abs(prediction - nodes_[b]);
    return da < db || (da == db && a > b);
  };
  if (best > 0 && closer(best - 1, best)) {
    --best;
  } else if (best + 1 < nodes_.size() && closer(best + 1, best)) {
    ++best;
  }
  return best;
}

std::string LabelMapping::to_json() const {
  nlohmann::json doc;
  doc["categories"] = categories_;
  doc["start"] = start_;
  doc["interval"] = interval_;
  return doc.dump();
}

LabelMapping LabelMapping::from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("label mapping: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("categories") || !doc.contains("start") || !doc.contains("interval")) {
    throw InvalidInput("label mapping document needs 'categories', 'start' and 'interval'");
  }
  try {
    return LabelMapping(doc.at("categories").get<std::vector<std::string>>(), doc.at("start").get<double>(),
                        doc.at("interval").get<double>());
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("label mapping: ") + e.what());
  }
}

}  // namespace stsreg
