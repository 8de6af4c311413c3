#include "heattap/features.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace heattap {

HeatmapFrame::HeatmapFrame(IntensityGrid cells) : cells_(std::move(cells)) {
  if (cells_.rows() != kFrameRows && cells_.rows() != kGridRows)
    throw DataError("heatmap frame must have 39 or 16 rows, got " +
                    std::to_string(cells_.rows()));
}

HeatmapFrame HeatmapFrame::zeros(bool cropped) {
  return HeatmapFrame(IntensityGrid::Zero(cropped ? kGridRows : kFrameRows, kGridCols));
}

std::string to_string(FeatureSetKind kind) {
  switch (kind) {
    case FeatureSetKind::C: return "C";
    case FeatureSetKind::Hf: return "Hf";
    case FeatureSetKind::CHf: return "CHf";
    case FeatureSetKind::Ho: return "Ho";
    case FeatureSetKind::CHo: return "CHo";
  }
  return "?";
}

FeatureSetKind parse_feature_kind(std::string_view name) {
  for (auto kind : kAllFeatureKinds)
    if (to_string(kind) == name) return kind;
  throw DataError("unknown feature set '" + std::string(name) + "'");
}

std::string tap_ref(const TapSample& tap) {
  return tap.user_id + "/" + tap.prompt_id + "/" + std::to_string(tap.t_ms);
}

Eigen::VectorXd centroid_features(const KeyboardLayout& layout, Point p) {
  Eigen::VectorXd f(2 * kNumKeys);
  for (const auto& g : layout.keys()) {
    const Point c = g.center();
    f(2 * g.id.index()) = (p.x - c.x) / layout.key_width();
    f(2 * g.id.index() + 1) = (p.y - c.y) / layout.key_height();
  }
  return f;
}

Eigen::VectorXd flatten_heatmap(const HeatmapFrame& frame) {
  Eigen::VectorXd f(kGridCells);
  for (int i = 0; i < kGridRows; ++i)
    for (int j = 0; j < kGridCols; ++j) f(i * kGridCols + j) = frame.at_keyboard(i, j);
  return f;
}

Eigen::VectorXd heatmap_overlap_vector(const KeyboardLayout& layout, const HeatmapFrame& frame) {
  return layout.overlap_weights() * flatten_heatmap(frame);
}

Normalizer::Normalizer(Eigen::VectorXd min, Eigen::VectorXd max)
    : min_(std::move(min)), max_(std::move(max)) {
  if (min_.size() != max_.size()) throw std::invalid_argument("normalizer min/max size mismatch");
  if ((max_.array() < min_.array()).any())
    throw std::invalid_argument("normalizer max below min");
}

Normalizer Normalizer::fit(const Eigen::Ref<const Eigen::MatrixXd>& samples) {
  if (samples.rows() == 0) throw std::invalid_argument("cannot fit a normalizer on zero samples");
  return Normalizer(samples.colwise().minCoeff().transpose(),
                    samples.colwise().maxCoeff().transpose());
}

Eigen::VectorXd Normalizer::apply(const Eigen::Ref<const Eigen::VectorXd>& v) const {
  if (v.size() != min_.size())
    throw std::invalid_argument("feature length " + std::to_string(v.size()) +
                                " does not match normalizer length " +
                                std::to_string(min_.size()));
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double range = max_(i) - min_(i);
    out(i) = range > 0.0 ? std::clamp(2.0 * (v(i) - min_(i)) / range - 1.0, -1.0, 1.0) : 0.0;
  }
  return out;
}

void Normalizer::apply_rows(Eigen::Ref<Eigen::MatrixXd> samples) const {
  if (samples.cols() != min_.size())
    throw std::invalid_argument("feature matrix width does not match normalizer length");
  for (Eigen::Index c = 0; c < samples.cols(); ++c) {
    const double range = max_(c) - min_(c);
    if (range > 0.0) {
      samples.col(c) = ((2.0 / range) * (samples.col(c).array() - min_(c)) - 1.0)
                           .cwiseMax(-1.0)
                           .cwiseMin(1.0)
                           .matrix();
    } else {
      samples.col(c).setZero();
    }
  }
}

Eigen::VectorXd build_features(const KeyboardLayout& layout, FeatureSetKind kind,
                               const TapSample& tap, const Normalizer* normalizer) {
  if (uses_heatmap(kind) && !tap.heatmap)
    throw DataError("feature set " + to_string(kind) + " requires a heatmap");
  Eigen::VectorXd f(feature_dim(kind));
  Eigen::Index offset = 0;
  if (uses_centroid(kind)) {
    f.head(2 * kNumKeys) = centroid_features(layout, tap.centroid);
    offset = 2 * kNumKeys;
  }
  switch (kind) {
    case FeatureSetKind::Hf:
    case FeatureSetKind::CHf:
      f.segment(offset, kGridCells) = flatten_heatmap(*tap.heatmap);
      break;
    case FeatureSetKind::Ho:
    case FeatureSetKind::CHo:
      f.segment(offset, kNumKeys) = heatmap_overlap_vector(layout, *tap.heatmap);
      break;
    case FeatureSetKind::C:
      break;
  }
  return normalizer ? normalizer->apply(f) : f;
}

Eigen::MatrixXd build_feature_matrix(const KeyboardLayout& layout, FeatureSetKind kind,
                                     std::span<const TapSample> taps) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(taps.size()), feature_dim(kind));
  for (std::size_t i = 0; i < taps.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) = build_features(layout, kind, taps[i]).transpose();
  return m;
}

nlohmann::json tap_to_json(const TapSample& tap) {
  nlohmann::json j;
  j["schema"] = kTapSchemaVersion;
  j["user_id"] = tap.user_id;
  j["prompt_id"] = tap.prompt_id;
  j["t_ms"] = tap.t_ms;
  j["centroid"] = {tap.centroid.x, tap.centroid.y};
  if (tap.heatmap) {
    const auto& cells = tap.heatmap->cells();
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index i = 0; i < cells.rows(); ++i) {
      nlohmann::json row = nlohmann::json::array();
      for (Eigen::Index c = 0; c < cells.cols(); ++c) row.push_back(int{cells(i, c)});
      rows.push_back(std::move(row));
    }
    j["heatmap"] = std::move(rows);
  }
  if (tap.label) j["label"] = tap.label->label();
  return j;
}

TapSample tap_from_json(const nlohmann::json& j) {
  try {
    const int schema = j.value("schema", kTapSchemaVersion);
    if (schema != kTapSchemaVersion)
      throw DataError("unsupported tap schema version " + std::to_string(schema));
    TapSample tap;
    tap.user_id = j.value("user_id", std::string());
    tap.prompt_id = j.value("prompt_id", std::string());
    tap.t_ms = j.value("t_ms", std::int64_t{0});
    const auto& c = j.at("centroid");
    if (!c.is_array() || c.size() != 2) throw DataError("centroid must be [x, y]");
    tap.centroid = {c[0].get<double>(), c[1].get<double>()};
    if (!std::isfinite(tap.centroid.x) || !std::isfinite(tap.centroid.y))
      throw DataError("centroid must be finite");
    if (j.contains("heatmap") && !j["heatmap"].is_null()) {
      const auto& rows = j["heatmap"];
      if (!rows.is_array() || (rows.size() != kFrameRows && rows.size() != kGridRows))
        throw DataError("heatmap must have 39 or 16 rows");
      IntensityGrid cells(static_cast<Eigen::Index>(rows.size()), kGridCols);
      for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!rows[i].is_array() || rows[i].size() != kGridCols)
          throw DataError("heatmap rows must have 18 columns");
        for (int col = 0; col < kGridCols; ++col) {
          const int v = rows[i][col].get<int>();
          if (v < 0 || v > 255) throw DataError("heatmap intensity outside 0..255");
          cells(static_cast<Eigen::Index>(i), col) = static_cast<std::uint8_t>(v);
        }
      }
      tap.heatmap = HeatmapFrame(std::move(cells));
    }
    if (j.contains("label") && !j["label"].is_null())
      tap.label = KeyId::from_label(j["label"].get<std::string>());
    return tap;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid tap record: ") + e.what());
  }
}

void write_taps_jsonl(std::ostream& out, std::span<const TapSample> taps) {
  for (const auto& tap : taps) out << tap_to_json(tap).dump() << '\n';
}

std::vector<TapSample> read_taps_jsonl(std::istream& in) {
  std::vector<TapSample> taps;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      taps.push_back(tap_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return taps;
}

std::vector<TapSample> load_taps(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return read_taps_jsonl(in);
}

void save_taps(const std::string& path, std::span<const TapSample> taps) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  write_taps_jsonl(out, taps);
}

}  // namespace heattap
