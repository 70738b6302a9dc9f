#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "stsreg/data.hpp"

namespace stsreg {

/// Sentence pairs over a pool of made-up words where the number of words the
/// two sentences share determines the gold value.
struct SyntheticOptions {
  std::size_t pairs = 100;
  std::size_t sentence_length = 8;
  std::size_t word_pool = 400;
  std::size_t shared_step = 2;  ///< class c shares c * shared_step words
  std::uint64_t seed = 0;       ///< drives pair sampling
  std::uint64_t pool_seed = 0;  ///< drives the word pool; keep equal across splits so they share words
};

/// Pronounceable fake words, deterministic in (count, seed).
std::vector<std::string> synthetic_words(std::size_t count, std::uint64_t seed);

/// Categorical corpus: class index c (uniformly drawn) shares c * shared_step words.
/// Requires (categories - 1) * shared_step <= sentence_length.
Dataset make_ordinal_corpus(std::string name, const std::vector<std::string>& categories,
                            const SyntheticOptions& options);

/// Continuous corpus on [0, 5]: shared count s drawn uniformly from
/// 0..sentence_length, score = 5 s / sentence_length.
Dataset make_continuous_corpus(std::string name, const SyntheticOptions& options);

/// The four-level relevance scale, lowest first.
std::vector<std::string> relevance_categories();

}  // namespace stsreg
