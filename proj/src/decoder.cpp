#include "heattap/decoder.hpp"

#include <cmath>
#include <stdexcept>

namespace heattap {

void DecodeConfig::validate() const {
  if (!(suc_fraction > 0.0 && suc_fraction < 0.5))
    throw std::invalid_argument("suc_fraction must lie in (0, 0.5)");
  if (!(window_x > 0.0) || !(window_y > 0.0))
    throw std::invalid_argument("neighbor window must be positive");
}

nlohmann::json DecodeConfig::to_json() const {
  return {{"use_lm", use_lm},           {"use_suc", use_suc},   {"use_filter", use_filter},
          {"suc_fraction", suc_fraction}, {"window_x", window_x}, {"window_y", window_y}};
}

DecodeConfig DecodeConfig::from_json(const nlohmann::json& j) {
  DecodeConfig c;
  try {
    c.use_lm = j.value("use_lm", c.use_lm);
    c.use_suc = j.value("use_suc", c.use_suc);
    c.use_filter = j.value("use_filter", c.use_filter);
    c.suc_fraction = j.value("suc_fraction", c.suc_fraction);
    c.window_x = j.value("window_x", c.window_x);
    c.window_y = j.value("window_y", c.window_y);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid decode config: ") + e.what());
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  return c;
}

std::string to_string(DecodeBucket bucket) {
  switch (bucket) {
    case DecodeBucket::NotAmbiguous:
      return "not_ambiguous";
    case DecodeBucket::ModelWithoutLm:
      return "model_without_lm";
    case DecodeBucket::ModelWithLm:
      return "model_with_lm";
  }
  return "model_without_lm";
}

DecodeBucket parse_decode_bucket(std::string_view name) {
  if (name == "not_ambiguous") return DecodeBucket::NotAmbiguous;
  if (name == "model_without_lm") return DecodeBucket::ModelWithoutLm;
  if (name == "model_with_lm") return DecodeBucket::ModelWithLm;
  throw DataError("unknown decode bucket '" + std::string(name) + "'");
}

namespace {

nlohmann::json distribution_json(const KeyDistribution& p) {
  return std::vector<double>(p.data(), p.data() + kNumKeys);
}

}  // namespace

nlohmann::json DecodeTrace::to_json() const {
  std::vector<std::string> cands;
  for (KeyId k : all_keys())
    if (candidates.test(k.index())) cands.push_back(k.label());
  nlohmann::json j = {{"tap_ref", tap_id},
                      {"bucket", to_string(bucket)},
                      {"candidates", cands},
                      {"decided", decided.label()}};
  j["p_sm"] = spatial ? distribution_json(*spatial) : nlohmann::json(nullptr);
  j["p_lm"] = lm ? distribution_json(*lm) : nlohmann::json(nullptr);
  return j;
}

std::optional<KeyId> is_unambiguous(const KeyboardLayout& layout, Point p, double fraction) {
  for (const auto& g : layout.keys()) {
    const Point c = g.center();
    if (std::abs(p.x - c.x) < fraction * g.box.width &&
        std::abs(p.y - c.y) < fraction * g.box.height)
      return g.id;
  }
  return std::nullopt;
}

KeySet candidate_filter(const KeyboardLayout& layout, Point p, double window_x,
                        double window_y) {
  KeySet set;
  const double max_dx = window_x * layout.key_width();
  const double max_dy = window_y * layout.key_height();
  for (const auto& g : layout.keys()) {
    const double dx = horizontal_offset(layout, p, g.id);
    const double dy = p.y - g.center().y;
    if (std::abs(dx) <= max_dx && std::abs(dy) <= max_dy) set.set(g.id.index());
  }
  set.set(containing_or_closest_key(layout, p).index());
  return set;
}

bool at_word_start(std::string_view context) { return context.empty() || context.back() == ' '; }

Decoded decode(const KeyboardLayout& layout, const SpatialScorer& scorer, const CharLM* lm,
               const TapSample& tap, std::string_view context, const DecodeConfig& config) {
  Decoded out;
  DecodeTrace& trace = out.trace;
  trace.tap_id = tap_ref(tap);

  if (config.use_suc) {
    if (auto k = is_unambiguous(layout, tap.centroid, config.suc_fraction)) {
      trace.bucket = DecodeBucket::NotAmbiguous;
      trace.candidates.set(k->index());
      trace.decided = *k;
      out.key = *k;
      return out;
    }
  }

  trace.candidates = config.use_filter
                         ? candidate_filter(layout, tap.centroid, config.window_x, config.window_y)
                         : KeySet().set();
  KeyDistribution p = spatial_proba(layout, scorer, tap);
  if (config.use_filter) {
    for (KeyId k : all_keys())
      if (!trace.candidates.test(k.index())) p(k.index()) = 0.0;
    const double total = p.sum();
    if (total > 0.0) {
      p /= total;
    } else {
      // The scorer put no mass on any candidate; fall back to uniform over them.
      for (KeyId k : all_keys()) p(k.index()) = trace.candidates.test(k.index()) ? 1.0 : 0.0;
      p /= p.sum();
    }
  }
  trace.spatial = p;
  const KeyId spatial_best = argmax_key(p);

  bool fuse = config.use_lm && lm != nullptr && spatial_best != KeyId::period() &&
              !at_word_start(context);
  if (fuse) {
    const KeyDistribution q = lm->next_key_probs(context);
    double lo = INFINITY, hi = -INFINITY;
    for (KeyId k : all_keys())
      if (trace.candidates.test(k.index())) {
        lo = std::min(lo, q(k.index()));
        hi = std::max(hi, q(k.index()));
      }
    trace.lm = q;
    fuse = hi - lo >= 1e-9;
  }

  if (!fuse) {
    trace.bucket = DecodeBucket::ModelWithoutLm;
    out.key = spatial_best;
  } else {
    trace.bucket = DecodeBucket::ModelWithLm;
    KeyDistribution score = p.cwiseProduct(*trace.lm);
    for (KeyId k : all_keys())
      if (!trace.candidates.test(k.index())) score(k.index()) = -1.0;
    out.key = argmax_key(score);
  }
  trace.decided = out.key;
  return out;
}

}  // namespace heattap
