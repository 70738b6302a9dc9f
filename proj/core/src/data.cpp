#include "stsreg/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <json.hpp>

#include "stsreg/error.hpp"

namespace stsreg {

namespace {

std::optional<double> parse_number(std::string_view text) {
  text = trim(text);
  if (text.empty()) {
    return std::nullopt;
  }
  double value = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

std::string format_number(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

struct RawLine {
  std::size_t number;
  std::string first;
  std::string s1;
  std::string s2;
};

std::vector<RawLine> read_raw_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path.string() + "'");
  }
  std::vector<RawLine> lines;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') {
      line.pop_back();
    }
    if (trim(line).empty()) {
      continue;
    }
    if (!is_valid_utf8(line)) {
      throw ParseError(path.string(), number, "line is not valid UTF-8");
    }
    std::vector<std::string_view> fields;
    std::string_view rest = line;
    while (true) {
      auto tab = rest.find('\t');
      fields.push_back(rest.substr(0, tab));
      if (tab == std::string_view::npos) {
        break;
      }
      rest.remove_prefix(tab + 1);
    }
    if (fields.size() < 3) {
      throw ParseError(path.string(), number,
                       "expected 3 tab-separated fields (score, sentence 1, sentence 2), found " +
                           std::to_string(fields.size()));
    }
    lines.push_back({number, std::string(fields[0]), std::string(fields[1]), std::string(fields[2])});
  }
  if (in.bad()) {
    throw IoError("read error on '" + path.string() + "'");
  }
  return lines;
}

std::string default_name(const std::filesystem::path& path, std::string name) {
  return name.empty() ? path.stem().string() : name;
}

using PairKey = std::pair<std::string, std::string>;

}  // namespace

std::string_view trim(std::string_view text) noexcept {
  constexpr std::string_view ws = " \t\r\n\f\v";
  const auto first = text.find_first_not_of(ws);
  if (first == std::string_view::npos) {
    return {};
  }
  const auto last = text.find_last_not_of(ws);
  return text.substr(first, last - first + 1);
}

bool is_valid_utf8(std::string_view text) noexcept {
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t extra = 0;
    std::uint32_t code = 0;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      extra = 1;
      code = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      extra = 2;
      code = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      extra = 3;
      code = c & 0x07;
    } else {
      return false;
    }
    if (i + extra >= text.size()) {
      return false;
    }
    for (std::size_t k = 1; k <= extra; ++k) {
      const auto cc = static_cast<unsigned char>(text[i + k]);
      if ((cc & 0xC0) != 0x80) {
        return false;
      }
      code = (code << 6) | (cc & 0x3F);
    }
    // Overlong encodings, surrogates and out-of-range code points.
    constexpr std::uint32_t min_code[] = {0, 0x80, 0x800, 0x10000};
    if (code < min_code[extra] || code > 0x10FFFF || (code >= 0xD800 && code <= 0xDFFF)) {
      return false;
    }
    i += extra + 1;
  }
  return true;
}

Dataset::Dataset(std::string name, DatasetSchema schema, std::vector<SentencePair> pairs)
    : name_(std::move(name)), schema_(std::move(schema)), pairs_(std::move(pairs)) {
  if (const auto* range = std::get_if<ScoreRange>(&schema_)) {
    if (!(range->low <= range->high)) {
      throw InvalidInput("dataset '" + name_ + "': empty score range");
    }
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
      const auto& p = pairs_[i];
      if (!p.has_score()) {
        throw InvalidInput("dataset '" + name_ + "': pair " + std::to_string(i) + " has a label, expected a score");
      }
      if (!(p.score() >= range->low && p.score() <= range->high)) {
        throw InvalidInput("dataset '" + name_ + "': score " + format_number(p.score()) + " of pair " +
                           std::to_string(i) + " outside [" + format_number(range->low) + ", " +
                           format_number(range->high) + "]");
      }
    }
  } else {
    const auto& cats = std::get<std::vector<std::string>>(schema_);
    for (std::size_t i = 0; i < pairs_.size(); ++i) {
      const auto& p = pairs_[i];
      if (p.has_score()) {
        throw InvalidInput("dataset '" + name_ + "': pair " + std::to_string(i) + " has a score, expected a label");
      }
      if (std::find(cats.begin(), cats.end(), p.label()) == cats.end()) {
        throw InvalidInput("dataset '" + name_ + "': unknown label '" + p.label() + "'");
      }
    }
  }
}

const ScoreRange& Dataset::score_range() const {
  if (!is_continuous()) {
    throw InvalidInput("dataset '" + name_ + "' is categorical");
  }
  return std::get<ScoreRange>(schema_);
}

const std::vector<std::string>& Dataset::categories() const {
  if (is_continuous()) {
    throw InvalidInput("dataset '" + name_ + "' is continuous");
  }
  return std::get<std::vector<std::string>>(schema_);
}

Dataset load_tsv(const std::filesystem::path& path, const DatasetSchema& schema, std::string name) {
  const auto lines = read_raw_lines(path);
  std::vector<SentencePair> pairs;
  pairs.reserve(lines.size());
  if (const auto* range = std::get_if<ScoreRange>(&schema)) {
    for (const auto& line : lines) {
      const auto score = parse_number(line.first);
      if (!score) {
        throw ParseError(path.string(), line.number, "score '" + line.first + "' is not a finite number");
      }
      if (!(*score >= range->low && *score <= range->high)) {
        throw ParseError(path.string(), line.number,
                         "score " + line.first + " outside [" + format_number(range->low) + ", " +
                             format_number(range->high) + "]");
      }
      pairs.push_back({line.s1, line.s2, *score});
    }
  } else {
    const auto& cats = std::get<std::vector<std::string>>(schema);
    for (const auto& line : lines) {
      const std::string label(trim(line.first));
      if (std::find(cats.begin(), cats.end(), label) == cats.end()) {
        throw ParseError(path.string(), line.number, "unknown label '" + label + "'");
      }
      pairs.push_back({line.s1, line.s2, label});
    }
  }
  return Dataset(default_name(path, std::move(name)), schema, std::move(pairs));
}

Dataset load_tsv_auto(const std::filesystem::path& path, const std::optional<ScoreRange>& range,
                      const std::optional<LabelMapping>& mapping, std::string name) {
  const auto lines = read_raw_lines(path);
  const bool numeric = std::all_of(lines.begin(), lines.end(),
                                   [](const RawLine& l) { return parse_number(l.first).has_value(); });
  if (numeric) {
    ScoreRange r{0.0, 0.0};
    if (range) {
      r = *range;
    } else if (!lines.empty()) {
      r.low = std::numeric_limits<double>::infinity();
      r.high = -std::numeric_limits<double>::infinity();
      for (const auto& l : lines) {
        const double s = *parse_number(l.first);
        r.low = std::min(r.low, s);
        r.high = std::max(r.high, s);
      }
    }
    return load_tsv(path, r, std::move(name));
  }
  std::vector<std::string> categories;
  if (mapping) {
    categories = mapping->categories();
  } else {
    for (const auto& l : lines) {
      std::string label(trim(l.first));
      if (std::find(categories.begin(), categories.end(), label) == categories.end()) {
        categories.push_back(std::move(label));
      }
    }
  }
  return load_tsv(path, categories, std::move(name));
}

std::string format_tsv(const Dataset& dataset) {
  std::string out;
  for (const auto& p : dataset.pairs()) {
    out += p.has_score() ? format_number(p.score()) : p.label();
    out += '\t';
    out += p.s1;
    out += '\t';
    out += p.s2;
    out += '\n';
  }
  return out;
}

void save_tsv(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot write '" + path.string() + "'");
  }
  out << format_tsv(dataset);
  if (!out) {
    throw IoError("write failed on '" + path.string() + "'");
  }
}

DedupResult dedup_filter(const Dataset& train, const std::vector<Dataset>& tests) {
  // Keyed by (s1, s2) in both orientations; the value names the first test set holding it.
  std::map<PairKey, std::string, std::less<>> test_pairs;
  for (const auto& test : tests) {
    for (const auto& p : test.pairs()) {
      std::string a(trim(p.s1));
      std::string b(trim(p.s2));
      test_pairs.try_emplace({a, b}, test.name());
      test_pairs.try_emplace({std::move(b), std::move(a)}, test.name());
    }
  }

  std::vector<SentencePair> kept;
  std::vector<RemovedPair> removed;
  for (const auto& p : train.pairs()) {
    auto it = test_pairs.find(PairKey{std::string(trim(p.s1)), std::string(trim(p.s2))});
    if (it != test_pairs.end()) {
      removed.push_back({p, it->second});
    } else {
      kept.push_back(p);
    }
  }
  return {Dataset(train.name(), train.schema(), std::move(kept)), std::move(removed)};
}

std::string format_removal_audit(const std::vector<RemovedPair>& removed) {
  std::string out;
  for (const auto& r : removed) {
    nlohmann::ordered_json line;
    line["s1"] = r.pair.s1;
    line["s2"] = r.pair.s2;
    if (r.pair.has_score()) {
      line["score"] = r.pair.score();
    } else {
      line["label"] = r.pair.label();
    }
    line["test_dataset"] = r.test_dataset;
    out += line.dump();
    out += '\n';
  }
  return out;
}

double rescale_sick(double score) {
  if (!(score >= 1.0 && score <= 5.0)) {
    throw InvalidInput("rescale_sick: score " + format_number(score) + " outside [1, 5]");
  }
  return 5.0 * (score - 1.0) / 4.0;
}

Dataset rescale_sick(const Dataset& dataset) {
  if (!dataset.is_continuous()) {
    throw InvalidInput("rescale_sick: dataset '" + dataset.name() + "' is categorical");
  }
  std::vector<SentencePair> pairs;
  pairs.reserve(dataset.size());
  for (const auto& p : dataset.pairs()) {
    pairs.push_back({p.s1, p.s2, rescale_sick(p.score())});
  }
  return Dataset(dataset.name(), ScoreRange{0.0, 5.0}, std::move(pairs));
}

Dataset merge(const std::vector<Dataset>& datasets, std::string name) {
  if (datasets.empty()) {
    return Dataset(std::move(name), ScoreRange{0.0, 5.0});
  }
  const DatasetSchema& schema = datasets.front().schema();
  std::vector<SentencePair> pairs;
  for (const auto& ds : datasets) {
    if (!(ds.schema() == schema)) {
      throw InvalidInput("merge: dataset '" + ds.name() + "' does not share the schema of '" +
                         datasets.front().name() + "'");
    }
    pairs.insert(pairs.end(), ds.pairs().begin(), ds.pairs().end());
  }
  return Dataset(std::move(name), schema, std::move(pairs));
}

double map_nli(std::string_view label) { return LabelMapping::nli().encode(label); }

std::vector<std::pair<std::string, std::string>> extract_positive_pairs(const Dataset& dataset, double threshold) {
  if (!dataset.is_continuous()) {
    throw InvalidInput("extract_positive_pairs: dataset '" + dataset.name() + "' is categorical");
  }
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& p : dataset.pairs()) {
    if (p.score() >= threshold) {
      out.emplace_back(p.s1, p.s2);
    }
  }
  return out;
}

}  // namespace stsreg
