#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include <Eigen/Core>

#include "heattap/keys.hpp"

namespace heattap {

enum class PromptOrigin { Corpus, Added };

struct Prompt {
  std::string text;
  PromptOrigin origin = PromptOrigin::Corpus;
};

/// Candidate prompts plus the list of common words; any word not on the list
/// counts as rare.
struct PromptPool {
  std::vector<Prompt> prompts;
  std::unordered_set<std::string> common_words;

  /// Lowercased words of `text` (split on spaces, trailing period dropped).
  static std::vector<std::string> words(std::string_view text);
  std::size_t rare_word_count(std::string_view text) const;
};

/// Reads one prompt per line from each file; blank lines are skipped.
PromptPool load_pool(const std::filesystem::path& corpus, const std::filesystem::path& added,
                     const std::filesystem::path& common_words);

/// Letters and single spaces only, with an optional final period.
bool well_formed_prompt(std::string_view text);

/// Keeps well-formed prompts with at most 6 words, all common (corpus origin),
/// or with words + rare words <= 6 (added origin).
PromptPool filter_pool(const PromptPool& pool);

/// Character counts over the 28 keys.
using CharDistribution = Eigen::Matrix<double, kNumKeys, 1>;

/// Counts of the key characters of `text` after lowercasing.
CharDistribution char_counts(std::string_view text);

/// Shannon entropy in bits; 0 log 0 = 0. Throws std::invalid_argument when the
/// total is zero.
double char_entropy(const CharDistribution& counts);

/// Adds, n times, the prompt whose inclusion maximizes the entropy of the
/// pooled character counts. Ties go to the shorter prompt, then the
/// lexicographically smaller one.
std::vector<std::string> greedy_select(const PromptPool& pool, std::size_t n = 90);

}  // namespace heattap
