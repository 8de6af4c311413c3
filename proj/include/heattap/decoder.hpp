#pragma once

#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "heattap/lm.hpp"
#include "heattap/spatial.hpp"

namespace heattap {

struct DecodeConfig {
  bool use_lm = false;
  bool use_suc = false;     ///< skip unambiguous cases
  bool use_filter = false;  ///< neighbor key filtering
  double suc_fraction = 0.25;
  /// Neighbor window half-extent in common key widths / heights.
  double window_x = 1.5;
  double window_y = 1.5;

  void validate() const;
  nlohmann::json to_json() const;
  static DecodeConfig from_json(const nlohmann::json& j);
};

enum class DecodeBucket { NotAmbiguous, ModelWithoutLm, ModelWithLm };

std::string to_string(DecodeBucket bucket);
DecodeBucket parse_decode_bucket(std::string_view name);

struct DecodeTrace {
  std::string tap_id;
  DecodeBucket bucket = DecodeBucket::ModelWithoutLm;
  KeySet candidates;
  /// Zero for keys outside the candidate set; unset for unambiguous taps.
  std::optional<KeyDistribution> spatial;
  std::optional<KeyDistribution> lm;
  KeyId decided;

  nlohmann::json to_json() const;
};

struct Decoded {
  KeyId key;
  DecodeTrace trace;
};

/// Key k with |x - x_k| < f w_k and |y - y_k| < f h_k, if any.
std::optional<KeyId> is_unambiguous(const KeyboardLayout& layout, Point p,
                                    double fraction = 0.25);

/// Keys whose center lies within (window_x w, window_y h) of p, SPACE measured
/// from its inner boundaries. Always includes the key under p.
KeySet candidate_filter(const KeyboardLayout& layout, Point p, double window_x = 1.5,
                        double window_y = 1.5);

/// True when `context` is empty or ends on a word boundary.
bool at_word_start(std::string_view context);

/// Decodes one tap. `lm` may be null; `context` is the committed text before
/// the tap.
Decoded decode(const KeyboardLayout& layout, const SpatialScorer& scorer, const CharLM* lm,
               const TapSample& tap, std::string_view context, const DecodeConfig& config);

}  // namespace heattap
