#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "heattap/keys.hpp"
#include "heattap/layout.hpp"

namespace heattap {

inline constexpr int kFrameRows = 39;

using IntensityGrid = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, kGridCols, Eigen::RowMajor>;

/// One capacitive frame: either the full 39x18 sensor image or a pre-cropped
/// 16x18 keyboard region. Intensities are 0..255.
class HeatmapFrame {
 public:
  HeatmapFrame() : cells_(IntensityGrid::Zero(kFrameRows, kGridCols)) {}
  explicit HeatmapFrame(IntensityGrid cells);

  static HeatmapFrame zeros(bool cropped = false);

  bool cropped() const { return cells_.rows() == kGridRows; }
  const IntensityGrid& cells() const { return cells_; }

  /// The last 16 rows, which cover the keyboard.
  auto keyboard_region() const { return cells_.bottomRows(kGridRows); }
  std::uint8_t& at_keyboard(int row, int col) {
    return cells_(cells_.rows() - kGridRows + row, col);
  }
  std::uint8_t at_keyboard(int row, int col) const {
    return cells_(cells_.rows() - kGridRows + row, col);
  }

 private:
  IntensityGrid cells_;
};

/// A single tap: reported centroid plus the first heatmap frame of the touch.
struct TapSample {
  Point centroid;
  std::optional<HeatmapFrame> heatmap;
  std::int64_t t_ms = 0;
  std::optional<KeyId> label;
  std::string user_id;
  std::string prompt_id;
};

/// Stable identifier "user/prompt/t_ms" used to refer to a tap across files.
std::string tap_ref(const TapSample& tap);

enum class FeatureSetKind { C, Hf, CHf, Ho, CHo };

inline constexpr FeatureSetKind kAllFeatureKinds[] = {FeatureSetKind::C, FeatureSetKind::Hf,
                                                       FeatureSetKind::CHf, FeatureSetKind::Ho,
                                                       FeatureSetKind::CHo};

constexpr int feature_dim(FeatureSetKind kind) {
  switch (kind) {
    case FeatureSetKind::C: return 2 * kNumKeys;
    case FeatureSetKind::Hf: return kGridCells;
    case FeatureSetKind::CHf: return 2 * kNumKeys + kGridCells;
    case FeatureSetKind::Ho: return kNumKeys;
    case FeatureSetKind::CHo: return 3 * kNumKeys;
  }
  return 0;
}

constexpr bool uses_centroid(FeatureSetKind kind) {
  return kind == FeatureSetKind::C || kind == FeatureSetKind::CHf || kind == FeatureSetKind::CHo;
}
constexpr bool uses_heatmap(FeatureSetKind kind) { return kind != FeatureSetKind::C; }

std::string to_string(FeatureSetKind kind);
FeatureSetKind parse_feature_kind(std::string_view name);

/// [dx_1, dy_1, ..., dx_28, dy_28], each offset divided by the common key size.
Eigen::VectorXd centroid_features(const KeyboardLayout& layout, Point p);

/// Row-major flattening of the 16x18 keyboard region.
Eigen::VectorXd flatten_heatmap(const HeatmapFrame& frame);

/// f_k = sum_ij (O(k,i,j) / A_k) v_ij.
Eigen::VectorXd heatmap_overlap_vector(const KeyboardLayout& layout, const HeatmapFrame& frame);

/// Per-dimension min-max scaling onto [-1, 1].
class Normalizer {
 public:
  Normalizer() = default;
  Normalizer(Eigen::VectorXd min, Eigen::VectorXd max);

  /// Fits on the rows of `samples`; throws std::invalid_argument when empty.
  static Normalizer fit(const Eigen::Ref<const Eigen::MatrixXd>& samples);

  Eigen::Index dim() const { return min_.size(); }
  const Eigen::VectorXd& min() const { return min_; }
  const Eigen::VectorXd& max() const { return max_; }

  /// 2 (v - min) / (max - min) - 1, clamped to [-1, 1]; constant dimensions map to 0.
  Eigen::VectorXd apply(const Eigen::Ref<const Eigen::VectorXd>& v) const;
  /// Row-wise apply, in place.
  void apply_rows(Eigen::Ref<Eigen::MatrixXd> samples) const;

 private:
  Eigen::VectorXd min_, max_;
};

/// Raw (or normalized, when `normalizer` is given) feature vector; centroid
/// block first, heatmap block second.
Eigen::VectorXd build_features(const KeyboardLayout& layout, FeatureSetKind kind,
                               const TapSample& tap, const Normalizer* normalizer = nullptr);

/// Raw feature matrix, one row per tap.
Eigen::MatrixXd build_feature_matrix(const KeyboardLayout& layout, FeatureSetKind kind,
                                     std::span<const TapSample> taps);

// Tap JSONL records.
inline constexpr int kTapSchemaVersion = 1;

nlohmann::json tap_to_json(const TapSample& tap);
TapSample tap_from_json(const nlohmann::json& j);

void write_taps_jsonl(std::ostream& out, std::span<const TapSample> taps);
std::vector<TapSample> read_taps_jsonl(std::istream& in);
std::vector<TapSample> load_taps(const std::string& path);
void save_taps(const std::string& path, std::span<const TapSample> taps);

}  // namespace heattap
