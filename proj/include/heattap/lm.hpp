#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>

#include <json.hpp>

#include "heattap/keys.hpp"

namespace heattap {

/// Next-key distribution given committed text.
class CharLM {
 public:
  virtual ~CharLM() = default;
  /// p^LM over the 28 keys; sums to 1 and depends only on `context`.
  virtual KeyDistribution next_key_probs(std::string_view context) const = 0;
};

/// Keeps at most the last `max_words` words of `context` (after folding to the
/// key alphabet), including any trailing partial word.
std::string truncate_context(std::string_view context, int max_words = 5);

/// Character n-gram model with add-k smoothing and backoff to the longest
/// history seen in training.
///
///   P(c | h) = (count(h' c) + k) / (count(h') + 28 k)
///
/// where h' is the longest suffix of h (at most order-1 characters) with a
/// non-zero count; the empty history is always available.
class NgramCharLM final : public CharLM {
 public:
  explicit NgramCharLM(int order = 5, double add_k = 0.1);

  /// Builds from raw text; the text is folded to the key alphabet first.
  static NgramCharLM train(std::string_view corpus, int order = 5, double add_k = 0.1);
  static NgramCharLM train_file(const std::filesystem::path& corpus, int order = 5,
                                double add_k = 0.1);

  KeyDistribution next_key_probs(std::string_view context) const override;

  int order() const { return order_; }
  double add_k() const { return add_k_; }
  const std::string& corpus_fingerprint() const { return fingerprint_; }
  /// Count of an n-gram (length 1..order), 0 when unseen.
  std::uint64_t count(std::string_view ngram) const;

  nlohmann::json to_json() const;
  static NgramCharLM from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static NgramCharLM load(const std::filesystem::path& path);

 private:
  void add_text(std::string_view folded);

  int order_;
  double add_k_;
  std::string fingerprint_;
  std::unordered_map<std::string, std::uint64_t> ngrams_;
  std::unordered_map<std::string, std::uint64_t> histories_;
};

}  // namespace heattap
