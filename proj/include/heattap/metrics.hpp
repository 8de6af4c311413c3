#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "heattap/keys.hpp"

namespace heattap {

/// Percentage of predictions that differ from the reference keys.
double cer(std::span<const KeyId> reference, std::span<const KeyId> predicted);

/// Words split on runs of spaces; leading/trailing spaces ignored.
std::vector<std::string> split_words(std::string_view text);

/// Word-level Levenshtein distance over the reference word count, in percent.
double wer(std::string_view reference, std::string_view hypothesis);

/// Committed character count and first/last tap times of one trial.
struct TrialTiming {
  std::size_t characters = 0;
  std::int64_t first_tap_ms = 0;
  std::int64_t last_tap_ms = 0;
};

/// (characters / 5) per minute, with characters and elapsed time summed over
/// trials. Throws DataError when the total elapsed time is zero.
double wpm(std::span<const TrialTiming> trials);

}  // namespace heattap
