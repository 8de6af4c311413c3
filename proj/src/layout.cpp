#include "heattap/layout.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace heattap {

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

double intersection_area(const Rect& a, const Rect& b) {
  const double w = std::min(a.right(), b.right()) - std::max(a.left, b.left);
  const double h = std::min(a.bottom(), b.bottom()) - std::max(a.top, b.top);
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

namespace {

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

}  // namespace

KeyboardLayout::KeyboardLayout(std::string name, double width, double height, double key_width,
                               double key_height, double cell_px,
                               std::array<KeyGeometry, kNumKeys> keys)
    : name_(std::move(name)),
      width_(width),
      height_(height),
      key_width_(key_width),
      key_height_(key_height),
      cell_px_(cell_px),
      keys_(keys) {
  if (!positive_finite(width_) || !positive_finite(height_) || !positive_finite(key_width_) ||
      !positive_finite(key_height_) || !positive_finite(cell_px_))
    throw DataError("layout dimensions must be positive and finite");
  if (std::abs(cell_px_ * kGridCols - width_) > 1e-9)
    throw DataError("layout cell_px * 18 must equal the keyboard width");
  if (kGridRows * cell_px_ < height_)
    throw DataError("heatmap grid does not span the keyboard height");

  for (int k = 0; k < kNumKeys; ++k) {
    const auto& g = keys_[k];
    if (g.id.index() != k) throw DataError("layout keys must be in canonical order");
    if (!positive_finite(g.box.width) || !positive_finite(g.box.height))
      throw DataError("key " + g.id.label() + " has non-positive size");
    if (!std::isfinite(g.box.left) || !std::isfinite(g.box.top) || g.box.left < 0.0 ||
        g.box.top < 0.0 || g.box.right() > width_ + 1e-9 || g.box.bottom() > height_ + 1e-9)
      throw DataError("key " + g.id.label() + " lies outside the keyboard");
  }
  for (int a = 0; a < kNumKeys; ++a)
    for (int b = a + 1; b < kNumKeys; ++b)
      if (intersection_area(keys_[a].box, keys_[b].box) > 0.0)
        throw DataError("keys " + keys_[a].id.label() + " and " + keys_[b].id.label() +
                        " overlap");

  for (int k = 0; k < kNumKeys; ++k) {
    const double area = keys_[k].box.area();
    for (int i = 0; i < kGridRows; ++i)
      for (int j = 0; j < kGridCols; ++j)
        overlap_(k, i * kGridCols + j) = intersection_area(keys_[k].box, cell(i, j)) / area;
  }

  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx",
                static_cast<unsigned long long>(fnv1a64(to_json().dump())));
  fingerprint_ = hex;
}

Rect KeyboardLayout::cell(int row, int col) const {
  if (row < 0 || row >= kGridRows || col < 0 || col >= kGridCols)
    throw std::out_of_range("grid cell index out of range");
  return {col * cell_px_, grid_top() + row * cell_px_, cell_px_, cell_px_};
}

nlohmann::json KeyboardLayout::to_json() const {
  nlohmann::json keys = nlohmann::json::array();
  for (const auto& g : keys_)
    keys.push_back({{"label", g.id.label()},
                    {"left", g.box.left},
                    {"top", g.box.top},
                    {"width", g.box.width},
                    {"height", g.box.height}});
  return {{"name", name_}, {"W", width_},       {"H", height_},
          {"w", key_width_}, {"h", key_height_}, {"cell_px", cell_px_},
          {"keys", keys}};
}

KeyboardLayout KeyboardLayout::from_json(const nlohmann::json& j) {
  try {
    std::array<KeyGeometry, kNumKeys> keys{};
    std::array<bool, kNumKeys> seen{};
    const auto& arr = j.at("keys");
    if (!arr.is_array() || arr.size() != kNumKeys)
      throw DataError("layout must define exactly 28 keys");
    for (const auto& kj : arr) {
      const KeyId id = KeyId::from_label(kj.at("label").get<std::string>());
      if (seen[id.index()]) throw DataError("duplicate key " + id.label());
      seen[id.index()] = true;
      keys[id.index()] = {id,
                          {kj.at("left").get<double>(), kj.at("top").get<double>(),
                           kj.at("width").get<double>(), kj.at("height").get<double>()}};
    }
    return KeyboardLayout(j.value("name", std::string("unnamed")), j.at("W").get<double>(),
                          j.at("H").get<double>(), j.at("w").get<double>(),
                          j.at("h").get<double>(), j.at("cell_px").get<double>(), keys);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid layout JSON: ") + e.what());
  }
}

KeyboardLayout KeyboardLayout::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open layout file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cannot parse layout file " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

const KeyboardLayout& default_layout() {
  static const KeyboardLayout layout = [] {
    constexpr double W = 1440.0, H = 854.0, w = 135.0, h = 206.0;
    constexpr double space_width = 675.0;
    // 30 px strip above the first row; rows are flush to the bottom edge.
    constexpr double top0 = H - 4 * h;
    std::array<KeyGeometry, kNumKeys> keys{};
    const char* rows[] = {"qwertyuiop", "asdfghjkl", "zxcvbnm"};
    for (int r = 0; r < 3; ++r) {
      const std::string_view row = rows[r];
      const double left0 = 0.5 * (W - static_cast<double>(row.size()) * w);
      for (std::size_t i = 0; i < row.size(); ++i) {
        const KeyId id = *KeyId::from_char(row[i]);
        keys[id.index()] = {id, {left0 + static_cast<double>(i) * w, top0 + r * h, w, h}};
      }
    }
    const double space_left = 0.5 * (W - space_width);
    keys[26] = {KeyId::space(), {space_left, top0 + 3 * h, space_width, h}};
    keys[27] = {KeyId::period(), {space_left + space_width, top0 + 3 * h, w, h}};
    return KeyboardLayout("qwerty-portrait-1440x854", W, H, w, h, W / kGridCols, keys);
  }();
  return layout;
}

KeyId containing_or_closest_key(const KeyboardLayout& layout, Point p) {
  for (const auto& g : layout.keys())
    if (g.box.contains(p)) return g.id;
  int best = 0;
  double best_d2 = std::numeric_limits<double>::infinity();
  for (const auto& g : layout.keys()) {
    const Point c = g.center();
    const double d2 = (p.x - c.x) * (p.x - c.x) + (p.y - c.y) * (p.y - c.y);
    if (d2 < best_d2) {
      best_d2 = d2;
      best = g.id.index();
    }
  }
  return KeyId(best);
}

double horizontal_offset(const KeyboardLayout& layout, Point p, KeyId k) {
  const auto& g = layout.key(k);
  if (!k.is_space()) return p.x - g.center().x;
  const double inner_left = g.box.left + 0.5 * layout.key_width();
  const double inner_right = g.box.right() - 0.5 * layout.key_width();
  if (p.x < inner_left) return p.x - inner_left;
  if (p.x > inner_right) return p.x - inner_right;
  return 0.0;
}

double normalized_distance(const KeyboardLayout& layout, Point p, KeyId k) {
  const double dx = horizontal_offset(layout, p, k) / layout.width();
  const double dy = (p.y - layout.key(k).center().y) / layout.height();
  return std::sqrt(dx * dx + dy * dy);
}

double overlap_area(const KeyboardLayout& layout, KeyId k, int row, int col) {
  return intersection_area(layout.key(k).box, layout.cell(row, col));
}

}  // namespace heattap
