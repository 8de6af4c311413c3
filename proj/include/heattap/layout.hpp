#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include <Eigen/Core>
#include <json.hpp>

#include "heattap/keys.hpp"

namespace heattap {

/// A position in keyboard pixels; origin at the keyboard's top-left corner.
struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Axis-aligned rectangle, [left, left+width] x [top, top+height].
struct Rect {
  double left = 0.0;
  double top = 0.0;
  double width = 0.0;
  double height = 0.0;

  double right() const { return left + width; }
  double bottom() const { return top + height; }
  double area() const { return width * height; }
  Point center() const { return {left + 0.5 * width, top + 0.5 * height}; }
  bool contains(Point p) const {
    return p.x >= left && p.x <= right() && p.y >= top && p.y <= bottom();
  }
};

/// Area of the intersection of two rectangles (0 when disjoint).
double intersection_area(const Rect& a, const Rect& b);

struct KeyGeometry {
  KeyId id;
  Rect box;

  Point center() const { return box.center(); }
};

inline constexpr int kGridRows = 16;
inline constexpr int kGridCols = 18;
inline constexpr int kGridCells = kGridRows * kGridCols;

/// Per-key normalized overlap weights O(k,i,j)/A_k, one row per key, cells
/// flattened row-major.
using OverlapMatrix = Eigen::Matrix<double, kNumKeys, kGridCells, Eigen::RowMajor>;

/// Keyboard geometry plus the capacitive grid that covers it. The grid has
/// 16x18 square cells and is bottom-aligned with the keyboard, so its top edge
/// may sit above the keyboard (negative y).
///
/// Immutable once constructed; construct through from_json() or
/// default_layout(), both of which validate.
class KeyboardLayout {
 public:
  KeyboardLayout(std::string name, double width, double height, double key_width,
                 double key_height, double cell_px, std::array<KeyGeometry, kNumKeys> keys);

  static KeyboardLayout from_json(const nlohmann::json& j);
  static KeyboardLayout load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  const std::string& name() const { return name_; }
  double width() const { return width_; }
  double height() const { return height_; }
  /// Most common key width / height; the scale for centroid features.
  double key_width() const { return key_width_; }
  double key_height() const { return key_height_; }
  double cell_px() const { return cell_px_; }

  const KeyGeometry& key(KeyId k) const { return keys_[k.index()]; }
  const std::array<KeyGeometry, kNumKeys>& keys() const { return keys_; }

  /// Cell (row, col) of the 16x18 grid in keyboard coordinates.
  Rect cell(int row, int col) const;
  Point cell_center(int row, int col) const { return cell(row, col).center(); }
  double grid_top() const { return height_ - kGridRows * cell_px_; }

  const OverlapMatrix& overlap_weights() const { return overlap_; }

  /// Stable 64-bit FNV-1a hash of the canonical JSON form, as 16 hex digits.
  const std::string& fingerprint() const { return fingerprint_; }

 private:
  std::string name_;
  double width_, height_, key_width_, key_height_, cell_px_;
  std::array<KeyGeometry, kNumKeys> keys_;
  OverlapMatrix overlap_;
  std::string fingerprint_;
};

/// The 1440x854 QWERTY portrait layout: three staggered letter rows plus a
/// bottom row with a 675 px SPACE and PERIOD to its right.
const KeyboardLayout& default_layout();

/// Key whose box contains p; ties among containing boxes and the fallback
/// nearest-center search both resolve to the lowest canonical index.
KeyId containing_or_closest_key(const KeyboardLayout& layout, Point p);

/// Horizontal offset from p to key k's center. For SPACE the offset is measured
/// from the inner boundaries half a common key width inside each edge, and is
/// zero between them.
double horizontal_offset(const KeyboardLayout& layout, Point p, KeyId k);

/// sqrt((dx/W)^2 + (dy/H)^2) using horizontal_offset for dx.
double normalized_distance(const KeyboardLayout& layout, Point p, KeyId k);

/// Overlap area in px^2 between key k and grid cell (row, col).
double overlap_area(const KeyboardLayout& layout, KeyId k, int row, int col);

std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace heattap
