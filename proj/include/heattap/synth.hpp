#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "heattap/align.hpp"
#include "heattap/features.hpp"
#include "heattap/layout.hpp"

namespace heattap {

/// Seeded random source with platform-independent draws (the standard
/// distributions are implementation-defined, the engine is not).
class SynthRng {
 public:
  explicit SynthRng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Standard normal via Box-Muller.
  double normal();
  /// Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi);
  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Decorrelated child seed for stream `index` of `root`.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

/// Parameters of the synthetic typist. The reported centroid is the true
/// contact point plus a bias and noise, while the heatmap blob sits on the true
/// contact point, so the heatmap carries information the centroid lost.
struct SynthConfig {
  std::uint64_t seed = 1;
  int users = 24;
  Point user_offset_mean{0.0, 0.0};  ///< px
  Point user_offset_sd{6.75, 10.3};  ///< px, per-user systematic offset spread
  double contact_sigma_x = 0.2 * 135.0;
  double contact_sigma_y = 0.2 * 206.0;
  double report_sigma = 0.15 * 135.0;
  Point report_bias{0.0, 0.1 * 206.0};
  double blob_peak = 200.0;
  double blob_radius = 60.0;
  int noise_min = -2;
  int noise_max = 2;
  std::vector<std::string> prompts;  ///< empty selects default_prompts()
  int taps_per_user = 2000;
  double tap_interval_ms = 250.0;

  void validate() const;
  nlohmann::json to_json() const;
  /// Missing fields keep their defaults.
  static SynthConfig from_json(const nlohmann::json& j);
};

/// Built-in English phrase set used when a config lists no prompts.
const std::vector<std::string>& default_prompts();

/// Blob of the given contact point on the 16x18 grid, embedded in a 39x18 frame
/// with zero upper rows. `rng` adds the configured intensity noise; pass
/// nullptr for a noise-free frame.
HeatmapFrame render_heatmap(const KeyboardLayout& layout, Point contact, const SynthConfig& config,
                            SynthRng* rng = nullptr);

/// Intensity-weighted mean of cell centers over the keyboard region, ignoring
/// cells at or below `floor` (set it to the noise ceiling to suppress the
/// background). NaN when no cell qualifies.
Point heatmap_centroid(const KeyboardLayout& layout, const HeatmapFrame& frame, int floor = 0);

/// One synthetic tap with its hidden true contact point.
struct SynthTap {
  TapSample tap;
  Point contact;
};

/// Full generation including the hidden contact points (for diagnostics).
std::vector<SynthTap> generate_detailed(const KeyboardLayout& layout, const SynthConfig& config);

/// Labeled tap stream: each user types the prompts (starting at a per-user
/// rotation) until at least `taps_per_user` taps, finishing the current prompt.
std::vector<TapSample> generate_dataset(const KeyboardLayout& layout, const SynthConfig& config);

/// Typed-text stream for a list of strings: like generate_dataset but types
/// exactly the given strings once per user.
std::vector<TapSample> generate_for_texts(const KeyboardLayout& layout, const SynthConfig& config,
                                          const std::vector<std::string>& texts);

/// Event log of users typing each text once with on-key feedback. A tap shown
/// as the wrong key is backspaced and retyped with probability
/// `correction_probability` (at most three retries per character). Taps carry
/// no label.
std::vector<TypingEvent> generate_typing_log(const KeyboardLayout& layout,
                                             const SynthConfig& config,
                                             const std::vector<std::string>& texts,
                                             double correction_probability);

}  // namespace heattap
