#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace heattap {

/// Thrown for malformed input data: bad files, schema violations, out-of-alphabet text.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kNumKeys = 28;

/// One of the 28 candidate keys. The index is the class index used by every
/// model: a..z are 0..25, SPACE is 26, PERIOD is 27.
class KeyId {
 public:
  constexpr KeyId() = default;
  constexpr explicit KeyId(int index) : index_(static_cast<std::uint8_t>(index)) {
    if (index < 0 || index >= kNumKeys) throw std::out_of_range("KeyId index out of range");
  }

  static constexpr KeyId space() { return KeyId(26); }
  static constexpr KeyId period() { return KeyId(27); }

  constexpr int index() const { return index_; }
  constexpr bool is_space() const { return index_ == 26; }
  constexpr bool is_period() const { return index_ == 27; }

  /// 'a'..'z', ' ' or '.'.
  constexpr char to_char() const {
    if (index_ < 26) return static_cast<char>('a' + index_);
    return index_ == 26 ? ' ' : '.';
  }

  /// "a".."z", "SPACE", "PERIOD" -- the label spelling used in every file format.
  std::string label() const {
    if (index_ < 26) return std::string(1, to_char());
    return index_ == 26 ? "SPACE" : "PERIOD";
  }

  /// Case-folds letters; returns nullopt for characters outside the key alphabet.
  static constexpr std::optional<KeyId> from_char(char c) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if (c >= 'a' && c <= 'z') return KeyId(c - 'a');
    if (c == ' ') return space();
    if (c == '.') return period();
    return std::nullopt;
  }

  static KeyId from_label(std::string_view label) {
    if (label == "SPACE") return space();
    if (label == "PERIOD") return period();
    if (label.size() == 1 && label[0] >= 'a' && label[0] <= 'z') return KeyId(label[0] - 'a');
    throw DataError("unknown key label '" + std::string(label) + "'");
  }

  friend constexpr bool operator==(KeyId, KeyId) = default;
  friend constexpr auto operator<=>(KeyId, KeyId) = default;

 private:
  std::uint8_t index_ = 0;
};

/// Iterable view over all keys in canonical order.
inline constexpr std::array<KeyId, kNumKeys> all_keys() {
  std::array<KeyId, kNumKeys> keys{};
  for (int k = 0; k < kNumKeys; ++k) keys[k] = KeyId(k);
  return keys;
}

using KeySet = std::bitset<kNumKeys>;

/// Probability (or score) vector over the 28 keys in canonical order.
using KeyDistribution = Eigen::Matrix<double, kNumKeys, 1>;

/// Index of the largest entry; ties go to the lowest canonical index.
template <typename Derived>
KeyId argmax_key(const Eigen::MatrixBase<Derived>& scores) {
  int best = 0;
  for (int k = 1; k < kNumKeys; ++k)
    if (scores(k) > scores(best)) best = k;
  return KeyId(best);
}

/// Lowercases and maps every character to a key; throws DataError on anything else.
std::string to_key_text(std::string_view text);

/// Lowercases, maps every character outside the key alphabet to SPACE and
/// collapses runs of SPACE. Used for language-model corpora.
std::string fold_to_key_text(std::string_view text);

}  // namespace heattap
