#include <doctest.h>

#include <cmath>
#include <map>

#include "heattap/synth.hpp"

using namespace heattap;

namespace {

const KeyboardLayout& L() { return default_layout(); }
KeyId key(char c) { return *KeyId::from_char(c); }

SynthConfig small(std::uint64_t seed = 1) {
  SynthConfig c;
  c.seed = seed;
  c.users = 3;
  c.taps_per_user = 120;
  return c;
}

}  // namespace

TEST_CASE("generation is deterministic per seed") {
  const auto a = generate_dataset(L(), small(5));
  const auto b = generate_dataset(L(), small(5));
  const auto c = generate_dataset(L(), small(6));
  REQUIRE(a.size() == b.size());
  bool differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].centroid.x == b[i].centroid.x);
    CHECK(a[i].centroid.y == b[i].centroid.y);
    CHECK(a[i].heatmap->cells() == b[i].heatmap->cells());
    CHECK(a[i].t_ms == b[i].t_ms);
    if (i < c.size()) differs = differs || a[i].centroid.x != c[i].centroid.x;
  }
  CHECK(differs);
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) == derive_seed(1, 0));
}

TEST_CASE("dataset shape") {
  const auto taps = generate_dataset(L(), small());
  std::map<std::string, std::size_t> per_user;
  for (const auto& t : taps) {
    ++per_user[t.user_id];
    CHECK(t.label.has_value());
    CHECK(t.heatmap.has_value());
    CHECK(t.centroid.x >= 0.0);
    CHECK(t.centroid.x <= L().width());
    CHECK(t.centroid.y >= 0.0);
    CHECK(t.centroid.y <= L().height());
  }
  CHECK(per_user.size() == 3);
  for (auto& [u, n] : per_user) CHECK(n >= 120);
  CHECK(per_user.count("u000"));
  for (std::size_t i = 1; i < taps.size(); ++i)
    if (taps[i].user_id == taps[i - 1].user_id) CHECK(taps[i].t_ms > taps[i - 1].t_ms);
}

TEST_CASE("noise-free config reports the contact point") {
  SynthConfig c = small();
  c.report_sigma = 0.0;
  c.report_bias = {0.0, 0.0};
  c.noise_min = c.noise_max = 0;
  for (const auto& s : generate_detailed(L(), c)) {
    CHECK(s.tap.centroid.x == s.contact.x);
    CHECK(s.tap.centroid.y == s.contact.y);
    CHECK(s.tap.heatmap->cells() == render_heatmap(L(), s.contact, c).cells());
  }
}

TEST_CASE("rendered blobs") {
  SynthConfig c;
  const Point g = L().key(key('g')).center();
  const HeatmapFrame f = render_heatmap(L(), g, c);
  int best_i = 0, best_j = 0;
  for (int i = 0; i < kGridRows; ++i)
    for (int j = 0; j < kGridCols; ++j)
      if (f.at_keyboard(i, j) > f.at_keyboard(best_i, best_j)) best_i = i, best_j = j;
  const Point peak = L().cell_center(best_i, best_j);
  CHECK(std::abs(peak.x - g.x) <= 40.0);
  CHECK(std::abs(peak.y - g.y) <= 40.0);
  CHECK(f.at_keyboard(best_i, best_j) <= 200);
  const Point hc = heatmap_centroid(L(), f);
  CHECK(std::abs(hc.x - g.x) < 5.0);
  CHECK(std::abs(hc.y - g.y) < 5.0);
  CHECK(std::isnan(heatmap_centroid(L(), HeatmapFrame::zeros()).x));
}

TEST_CASE("contact points center on the intended key") {
  SynthConfig c;
  c.users = 1;
  c.user_offset_sd = {0.0, 0.0};
  c.prompts = {"ggggggggggggggggggggggggg"};
  c.taps_per_user = 2000;
  double sx = 0, sy = 0;
  const auto taps = generate_detailed(L(), c);
  for (const auto& s : taps) sx += s.contact.x, sy += s.contact.y;
  const double n = static_cast<double>(taps.size());
  const Point g = L().key(key('g')).center();
  CHECK(std::abs(sx / n - g.x) < 4.0 * c.contact_sigma_x / std::sqrt(n));
  CHECK(std::abs(sy / n - g.y) < 4.0 * c.contact_sigma_y / std::sqrt(n));
}

TEST_CASE("the heatmap locates the contact better than the reported centroid") {
  SynthConfig c = small(9);
  double heat = 0, reported = 0;
  std::size_t n = 0;
  for (const auto& s : generate_detailed(L(), c)) {
    const Point h = heatmap_centroid(L(), *s.tap.heatmap, c.noise_max);
    if (std::isnan(h.x)) continue;
    heat += std::hypot(h.x - s.contact.x, h.y - s.contact.y);
    reported += std::hypot(s.tap.centroid.x - s.contact.x, s.tap.centroid.y - s.contact.y);
    ++n;
  }
  REQUIRE(n > 300);
  CHECK(heat < reported);
}

TEST_CASE("typing log") {
  SynthConfig c = small();
  const std::vector<std::string> texts{"my watch fell in the water.", "the cat sat"};
  const auto events = generate_typing_log(L(), c, texts, 1.0);
  std::size_t taps = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (e.kind == EventKind::Tap) {
      ++taps;
      CHECK_FALSE(e.tap->label.has_value());
      CHECK(e.decoded == containing_or_closest_key(L(), e.tap->centroid));
    } else {
      REQUIRE(i > 0);
      CHECK(events[i - 1].kind == EventKind::Tap);
    }
    if (i > 0 && events[i - 1].user_id == e.user_id) CHECK(e.t_ms > events[i - 1].t_ms);
  }
  CHECK(taps >= 3 * (texts[0].size() + texts[1].size()));

  const auto none = generate_typing_log(L(), c, texts, 0.0);
  for (const auto& e : none) CHECK(e.kind == EventKind::Tap);
  CHECK(none.size() == 3 * (texts[0].size() + texts[1].size()));
  CHECK_THROWS_AS(generate_typing_log(L(), c, texts, 1.5), DataError);
}

TEST_CASE("synth config") {
  SynthConfig c;
  c.users = 7;
  c.prompts = {"abc"};
  const auto back = SynthConfig::from_json(c.to_json());
  CHECK(back.users == 7);
  CHECK(back.prompts == c.prompts);
  CHECK(back.report_bias.y == c.report_bias.y);
  CHECK(SynthConfig::from_json({{"seed", 3}}).blob_radius == 60.0);
  c.noise_min = 3;
  c.noise_max = 2;
  CHECK_THROWS_AS(c.validate(), DataError);
  SynthConfig bad_prompt;
  bad_prompt.prompts = {"it's"};
  CHECK_THROWS_AS(bad_prompt.validate(), DataError);
}
