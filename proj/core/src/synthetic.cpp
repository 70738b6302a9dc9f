#include "stsreg/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "stsreg/error.hpp"

namespace stsreg {

namespace {

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) {
      out += ' ';
    }
    out += w;
  }
  return out;
}

template <typename Rng>
void shuffle_in_place(std::vector<std::string>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(v[i - 1], v[pick(rng)]);
  }
}

// Sentence A uses `length` distinct words; B keeps `shared` of them and fills
// the rest with words absent from A.
template <typename Rng>
std::pair<std::string, std::string> make_pair(const std::vector<std::string>& pool, std::size_t length,
                                              std::size_t shared, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::set<std::size_t> used;
  std::vector<std::string> a;
  while (a.size() < length) {
    const std::size_t w = pick(rng);
    if (used.insert(w).second) {
      a.push_back(pool[w]);
    }
  }
  std::vector<std::string> b(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(shared));
  while (b.size() < length) {
    const std::size_t w = pick(rng);
    if (used.insert(w).second) {
      b.push_back(pool[w]);
    }
  }
  shuffle_in_place(a, rng);
  shuffle_in_place(b, rng);
  return {join(a), join(b)};
}

void check_options(const SyntheticOptions& options) {
  if (options.sentence_length == 0 || options.word_pool < 2 * options.sentence_length) {
    throw InvalidInput("synthetic corpus: word pool must hold two disjoint sentences");
  }
}

}  // namespace

std::vector<std::string> synthetic_words(std::size_t count, std::uint64_t seed) {
  static constexpr const char* onsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br",
                                           "st", "tr", "pl", "gr", "sh"};
  static constexpr const char* vowels[] = {"a", "e", "i", "o", "u", "ai", "ou"};
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> onset(0, std::size(onsets) - 1);
  std::uniform_int_distribution<std::size_t> vowel(0, std::size(vowels) - 1);
  std::uniform_int_distribution<int> syllables(2, 3);
  std::set<std::string> seen;
  std::vector<std::string> words;
  while (words.size() < count) {
    std::string w;
    for (int s = syllables(rng); s > 0; --s) {
      w += onsets[onset(rng)];
      w += vowels[vowel(rng)];
    }
    if (seen.insert(w).second) {
      words.push_back(std::move(w));
    }
  }
  return words;
}

std::vector<std::string> relevance_categories() {
  return {"irrelevant", "slightly relevant", "moderately relevant", "highly relevant"};
}

Dataset make_ordinal_corpus(std::string name, const std::vector<std::string>& categories,
                            const SyntheticOptions& options) {
  check_options(options);
  if (categories.size() < 2 || (categories.size() - 1) * options.shared_step > options.sentence_length) {
    throw InvalidInput("synthetic corpus: too many categories for the sentence length");
  }
  const auto pool = synthetic_words(options.word_pool, options.pool_seed);
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> klass(0, categories.size() - 1);
  std::vector<SentencePair> pairs;
  pairs.reserve(options.pairs);
  for (std::size_t i = 0; i < options.pairs; ++i) {
    const std::size_t c = klass(rng);
    auto [a, b] = make_pair(pool, options.sentence_length, c * options.shared_step, rng);
    pairs.push_back({std::move(a), std::move(b), categories[c]});
  }
  return Dataset(std::move(name), categories, std::move(pairs));
}

Dataset make_continuous_corpus(std::string name, const SyntheticOptions& options) {
  check_options(options);
  const auto pool = synthetic_words(options.word_pool, options.pool_seed);
  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> shared(0, options.sentence_length);
  std::vector<SentencePair> pairs;
  pairs.reserve(options.pairs);
  for (std::size_t i = 0; i < options.pairs; ++i) {
    const std::size_t s = shared(rng);
    auto [a, b] = make_pair(pool, options.sentence_length, s, rng);
    const double score = 5.0 * static_cast<double>(s) / static_cast<double>(options.sentence_length);
    pairs.push_back({std::move(a), std::move(b), score});
  }
  return Dataset(std::move(name), ScoreRange{0.0, 5.0}, std::move(pairs));
}

}  // namespace stsreg
