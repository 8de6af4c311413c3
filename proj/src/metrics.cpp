#include "heattap/metrics.hpp"

#include <algorithm>
#include <stdexcept>

namespace heattap {

double cer(std::span<const KeyId> reference, std::span<const KeyId> predicted) {
  if (reference.size() != predicted.size())
    throw std::invalid_argument("reference and prediction counts differ");
  if (reference.empty()) throw std::invalid_argument("CER of an empty set");
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < reference.size(); ++i)
    if (reference[i] != predicted[i]) ++wrong;
  return 100.0 * static_cast<double>(wrong) / static_cast<double>(reference.size());
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && text[i] == ' ') ++i;
    const std::size_t start = i;
    while (i < text.size() && text[i] != ' ') ++i;
    if (i > start) words.emplace_back(text.substr(start, i - start));
  }
  return words;
}

double wer(std::string_view reference, std::string_view hypothesis) {
  const auto r = split_words(reference);
  const auto h = split_words(hypothesis);
  if (r.empty()) throw std::invalid_argument("WER needs at least one reference word");
  std::vector<std::size_t> prev(h.size() + 1), cur(h.size() + 1);
  for (std::size_t j = 0; j <= h.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= r.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= h.size(); ++j)
      cur[j] = std::min({prev[j - 1] + (r[i - 1] == h[j - 1] ? 0 : 1), prev[j] + 1, cur[j - 1] + 1});
    std::swap(prev, cur);
  }
  return 100.0 * static_cast<double>(prev[h.size()]) / static_cast<double>(r.size());
}

double wpm(std::span<const TrialTiming> trials) {
  if (trials.empty()) throw std::invalid_argument("WPM needs at least one trial");
  double chars = 0.0, ms = 0.0;
  for (const auto& t : trials) {
    if (t.last_tap_ms < t.first_tap_ms) throw DataError("trial ends before it starts");
    chars += static_cast<double>(t.characters);
    ms += static_cast<double>(t.last_tap_ms - t.first_tap_ms);
  }
  if (ms <= 0.0) throw DataError("zero elapsed time");
  return (chars / 5.0) / (ms / 60000.0);
}

}  // namespace heattap
