#include "stsreg/eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "stsreg/error.hpp"

namespace stsreg {

namespace {

void require_paired(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw InvalidInput(std::string(what) + ": length mismatch (" + std::to_string(a.size()) + " vs " +
                       std::to_string(b.size()) + ")");
  }
  if (a.size() < 2) {
    throw InvalidInput(std::string(what) + ": need at least two samples");
  }
}

const LabelMapping& resolve_mapping(const Model& model, const std::optional<LabelMapping>& mapping,
                                    const Dataset& dataset) {
  if (mapping) {
    return *mapping;
  }
  if (model.mapping) {
    return *model.mapping;
  }
  throw InvalidInput("dataset '" + dataset.name() + "' is categorical but no label mapping is available");
}

void check_categories(const Dataset& dataset, const LabelMapping& mapping) {
  for (const auto& c : dataset.categories()) {
    if (!mapping.contains(c)) {
      throw InvalidInput("dataset '" + dataset.name() + "' category '" + c + "' is not in the label mapping");
    }
  }
}

}  // namespace

std::vector<double> fractional_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  std::vector<double> ranks(values.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && values[order[j]] == values[order[i]]) {
      ++j;
    }
    // Positions i..j-1 hold ranks i+1..j; each gets their mean.
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      ranks[order[k]] = rank;
    }
    i = j;
  }
  return ranks;
}

double pearson(std::span<const double> a, std::span<const double> b) {
  require_paired(a, b, "pearson");
  const double n = static_cast<double>(a.size());
  const double mean_a = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mean_b = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double cov = 0.0;
  double var_a = 0.0;
  double var_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    cov += da * db;
    var_a += da * da;
    var_b += db * db;
  }
  if (var_a == 0.0 || var_b == 0.0) {
    throw UndefinedStatistic("correlation is undefined for a constant input");
  }
  return std::clamp(cov / std::sqrt(var_a * var_b), -1.0, 1.0);
}

double spearman(std::span<const double> predictions, std::span<const double> golds) {
  require_paired(predictions, golds, "spearman");
  for (std::span<const double> s : {predictions, golds}) {
    if (std::any_of(s.begin(), s.end(), [](double x) { return !std::isfinite(x); })) {
      throw InvalidInput("spearman: non-finite value");
    }
  }
  const auto rp = fractional_ranks(predictions);
  const auto rg = fractional_ranks(golds);
  return pearson(rp, rg);
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw ShapeError("cosine: dimension mismatch");
  }
  const double nu = norm(u);
  const double nv = norm(v);
  if (nu == 0.0 || nv == 0.0) {
    throw InvalidInput("cosine: zero vector");
  }
  return std::clamp(dot(u, v) / (nu * nv), -1.0, 1.0);
}

double score_from_outputs(std::span<const double> outputs, HeadKind head, const std::optional<LabelMapping>& mapping) {
  if (head == HeadKind::Regression) {
    return outputs.front();
  }
  const double shift = *std::max_element(outputs.begin(), outputs.end());
  const bool use_nodes = mapping && mapping->size() == outputs.size();
  double z = 0.0;
  double expected = 0.0;
  for (std::size_t k = 0; k < outputs.size(); ++k) {
    const double p = std::exp(outputs[k] - shift);
    z += p;
    expected += p * (use_nodes ? mapping->nodes()[k] : static_cast<double>(k));
  }
  return expected / z;
}

double score_pair(const Model& model, const SentencePair& pair) {
  const Vector out = head_outputs(model.encode(pair.s1, pair.s2), model.params);
  return score_from_outputs(out, model.params.head, model.mapping);
}

std::size_t predict_class(const Model& model, const SentencePair& pair, const LabelMapping& mapping) {
  const EncodedPair encoded = model.encode(pair.s1, pair.s2);
  const Vector out = head_outputs(encoded, model.params);
  if (model.params.head == HeadKind::Regression) {
    return mapping.classify_index(out.front());
  }
  if (out.size() != mapping.size()) {
    throw ShapeError("classification head has " + std::to_string(out.size()) + " outputs but the mapping has " +
                     std::to_string(mapping.size()) + " categories");
  }
  return static_cast<std::size_t>(std::max_element(out.begin(), out.end()) - out.begin());
}

std::vector<double> gold_values(const Dataset& dataset, const std::optional<LabelMapping>& mapping) {
  std::vector<double> golds;
  golds.reserve(dataset.size());
  if (dataset.is_continuous()) {
    for (const auto& p : dataset.pairs()) {
      golds.push_back(p.score());
    }
    return golds;
  }
  if (!mapping) {
    throw InvalidInput("dataset '" + dataset.name() + "' is categorical but no label mapping is available");
  }
  check_categories(dataset, *mapping);
  for (const auto& p : dataset.pairs()) {
    golds.push_back(mapping->encode(p.label()));
  }
  return golds;
}

double accuracy(const Model& model, const Dataset& dataset, const LabelMapping& mapping) {
  if (dataset.is_continuous()) {
    throw InvalidInput("accuracy: dataset '" + dataset.name() + "' is not categorical");
  }
  if (dataset.empty()) {
    throw UndefinedStatistic("accuracy: dataset '" + dataset.name() + "' is empty");
  }
  check_categories(dataset, mapping);
  std::size_t correct = 0;
  for (const auto& p : dataset.pairs()) {
    if (predict_class(model, p, mapping) == mapping.index_of(p.label())) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

EvalReport make_report(std::vector<DatasetScore> scores) {
  EvalReport report;
  report.datasets = std::move(scores);
  if (!report.datasets.empty()) {
    double sum = 0.0;
    for (const auto& d : report.datasets) {
      sum += d.spearman;
    }
    report.average = sum / static_cast<double>(report.datasets.size());
  }
  return report;
}

EvalReport evaluate(const Model& model, std::span<const Dataset> datasets, const std::optional<LabelMapping>& mapping) {
  if (datasets.empty()) {
    throw InvalidInput("evaluate: no datasets given");
  }
  std::vector<DatasetScore> scores;
  for (const auto& ds : datasets) {
    DatasetScore entry{ds.name(), 0.0, std::nullopt};
    std::optional<LabelMapping> active = mapping;
    if (!ds.is_continuous()) {
      active = resolve_mapping(model, mapping, ds);
      entry.accuracy = accuracy(model, ds, *active);
    }
    const auto golds = gold_values(ds, active);
    std::vector<double> preds;
    preds.reserve(ds.size());
    for (const auto& p : ds.pairs()) {
      preds.push_back(score_pair(model, p));
    }
    entry.spearman = spearman(preds, golds);
    scores.push_back(std::move(entry));
  }
  return make_report(std::move(scores));
}

std::string EvalReport::to_json() const {
  nlohmann::ordered_json doc;
  doc["datasets"] = nlohmann::ordered_json::array();
  for (const auto& d : datasets) {
    nlohmann::ordered_json row;
    row["name"] = d.name;
    row["spearman"] = d.spearman;
    if (d.accuracy) {
      row["accuracy"] = *d.accuracy;
    }
    doc["datasets"].push_back(std::move(row));
  }
  doc["average"] = average;
  return doc.dump(2);
}

EvalReport EvalReport::from_json(std::string_view text) {
  try {
    const auto doc = nlohmann::json::parse(text);
    EvalReport report;
    for (const auto& row : doc.at("datasets")) {
      DatasetScore d;
      d.name = row.at("name").get<std::string>();
      d.spearman = row.at("spearman").get<double>();
      if (row.contains("accuracy")) {
        d.accuracy = row.at("accuracy").get<double>();
      }
      report.datasets.push_back(std::move(d));
    }
    report.average = doc.at("average").get<double>();
    return report;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(std::string("eval report: ") + e.what());
  }
}

std::string EvalReport::to_table(std::string_view model_name) const {
  std::vector<std::string> header{"Model"};
  std::vector<std::string> spearman_row{std::string(model_name)};
  std::vector<std::string> accuracy_row{"accuracy"};
  bool any_accuracy = false;
  auto fmt = [](double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v * 100.0;
    return os.str();
  };
  for (const auto& d : datasets) {
    header.push_back(d.name);
    spearman_row.push_back(fmt(d.spearman));
    accuracy_row.push_back(d.accuracy ? fmt(*d.accuracy) : "-");
    any_accuracy = any_accuracy || d.accuracy.has_value();
  }
  header.push_back("Avg.");
  spearman_row.push_back(fmt(average));
  accuracy_row.push_back("-");

  std::vector<std::size_t> width(header.size(), 0);
  for (const auto* row : {&header, &spearman_row, &accuracy_row}) {
    for (std::size_t c = 0; c < row->size(); ++c) {
      width[c] = std::max(width[c], (*row)[c].size());
    }
  }
  std::ostringstream os;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) {
        os << "  ";
      }
      if (c == 0) {
        os << std::left << std::setw(static_cast<int>(width[c])) << row[c];
      } else {
        os << std::right << std::setw(static_cast<int>(width[c])) << row[c];
      }
    }
    os << '\n';
  };
  emit(header);
  emit(spearman_row);
  if (any_accuracy) {
    emit(accuracy_row);
  }
  return os.str();
}

}  // namespace stsreg
