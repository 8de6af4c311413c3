#include "heattap/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace heattap {

double SynthRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

int SynthRng::uniform_int(int lo, int hi) {
  if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
  const auto span = static_cast<std::uint64_t>(static_cast<std::int64_t>(hi) - lo) + 1;
  // Lemire's multiply-shift; bias is below 2^-40 for the spans used here.
  const auto r = static_cast<unsigned __int128>(engine_()) * span;
  return lo + static_cast<int>(static_cast<std::uint64_t>(r >> 64));
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
  // splitmix64 finalizer over the mixed pair.
  std::uint64_t z = root + 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

void SynthConfig::validate() const {
  if (users <= 0) throw DataError("synth: users must be positive");
  if (!(contact_sigma_x > 0.0) || !(contact_sigma_y > 0.0))
    throw DataError("synth: contact sigmas must be positive");
  if (report_sigma < 0.0) throw DataError("synth: report_sigma must be non-negative");
  if (user_offset_sd.x < 0.0 || user_offset_sd.y < 0.0)
    throw DataError("synth: user offset sd must be non-negative");
  if (!(blob_radius > 0.0)) throw DataError("synth: blob_radius must be positive");
  if (blob_peak < 0.0 || blob_peak > 255.0) throw DataError("synth: blob_peak must be in 0..255");
  if (noise_min > noise_max) throw DataError("synth: noise_min exceeds noise_max");
  if (taps_per_user <= 0) throw DataError("synth: taps_per_user must be positive");
  for (const auto& p : prompts) (void)to_key_text(p);
}

nlohmann::json SynthConfig::to_json() const {
  return {{"seed", seed},
          {"users", users},
          {"user_offset_mean", {user_offset_mean.x, user_offset_mean.y}},
          {"user_offset_sd", {user_offset_sd.x, user_offset_sd.y}},
          {"contact_sigma_x", contact_sigma_x},
          {"contact_sigma_y", contact_sigma_y},
          {"report_sigma", report_sigma},
          {"report_bias", {report_bias.x, report_bias.y}},
          {"blob_peak", blob_peak},
          {"blob_radius", blob_radius},
          {"noise_min", noise_min},
          {"noise_max", noise_max},
          {"prompts", prompts},
          {"taps_per_user", taps_per_user},
          {"tap_interval_ms", tap_interval_ms}};
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
  SynthConfig c;
  auto point = [&](const char* key, Point fallback) {
    if (!j.contains(key)) return fallback;
    const auto& a = j.at(key);
    if (!a.is_array() || a.size() != 2) throw DataError(std::string(key) + " must be [x, y]");
    return Point{a[0].get<double>(), a[1].get<double>()};
  };
  try {
    c.seed = j.value("seed", c.seed);
    c.users = j.value("users", c.users);
    c.user_offset_mean = point("user_offset_mean", c.user_offset_mean);
    c.user_offset_sd = point("user_offset_sd", c.user_offset_sd);
    c.contact_sigma_x = j.value("contact_sigma_x", c.contact_sigma_x);
    c.contact_sigma_y = j.value("contact_sigma_y", c.contact_sigma_y);
    c.report_sigma = j.value("report_sigma", c.report_sigma);
    c.report_bias = point("report_bias", c.report_bias);
    c.blob_peak = j.value("blob_peak", c.blob_peak);
    c.blob_radius = j.value("blob_radius", c.blob_radius);
    c.noise_min = j.value("noise_min", c.noise_min);
    c.noise_max = j.value("noise_max", c.noise_max);
    c.prompts = j.value("prompts", c.prompts);
    c.taps_per_user = j.value("taps_per_user", c.taps_per_user);
    c.tap_interval_ms = j.value("tap_interval_ms", c.tap_interval_ms);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid synth config: ") + e.what());
  }
  c.validate();
  return c;
}

const std::vector<std::string>& default_prompts() {
  static const std::vector<std::string> prompts = {
      "the quick brown fox jumps over the lazy dog.",
      "my watch fell in the water.",
      "we are having spaghetti.",
      "time to go shopping.",
      "a problem with the engine.",
      "elephants are afraid of mice.",
      "question that must be answered.",
      "the sun is shining brightly today.",
      "please pass the salt and pepper.",
      "she sells sea shells by the shore.",
      "an excellent way to spend the day.",
      "the jazz band played all night.",
      "a quiet evening by the fire.",
      "the zoo keeper fed the zebra.",
      "pack my box with five dozen jugs.",
      "the museum opens at nine.",
      "we walked along the river bank.",
      "the library is closed on sunday.",
      "my favorite color is blue.",
      "the children played in the park.",
      "a cup of hot coffee.",
      "the train was very late.",
      "he quickly fixed the broken fence.",
      "the kitchen smells of fresh bread.",
      "just give me a minute.",
      "the weather forecast calls for rain.",
      "a dozen eggs and a quart of milk.",
      "this is a very good idea.",
      "the project was a great success.",
      "do not walk too quickly.",
      "the judge was fair and wise.",
      "an extra large pizza with cheese.",
      "the yellow taxi stopped nearby.",
      "we visited the old castle.",
      "the garden needs more water.",
      "keep the door closed.",
      "the movie was quite exciting.",
      "my brother plays the violin.",
      "the mountains look beautiful in winter.",
      "she wrote a long letter home.",
      "the price of gas went up.",
      "a box of very sharp knives.",
      "the dog barked at the mailman.",
      "we need to buy new shoes.",
      "the flight leaves in an hour.",
      "the squirrel hid the acorn.",
      "turn left at the next light.",
      "a glass of orange juice.",
      "the baby is sleeping now.",
      "the waves crashed on the rocks.",
      "all work and no play.",
      "the meeting was moved to friday.",
      "he has a very quick wit.",
      "the cat sat on the warm mat.",
      "a jar of honey and a loaf of bread.",
      "the phone rang twice.",
      "the students finished their exams.",
      "we saw a fox in the woods.",
      "the bridge was painted red.",
      "bring your jacket just in case.",
  };
  return prompts;
}

HeatmapFrame render_heatmap(const KeyboardLayout& layout, Point contact, const SynthConfig& config,
                            SynthRng* rng) {
  HeatmapFrame frame = HeatmapFrame::zeros();
  const double two_s2 = 2.0 * config.blob_radius * config.blob_radius;
  for (int i = 0; i < kGridRows; ++i) {
    for (int j = 0; j < kGridCols; ++j) {
      const Point c = layout.cell_center(i, j);
      const double d2 = (c.x - contact.x) * (c.x - contact.x) + (c.y - contact.y) * (c.y - contact.y);
      long v = std::lround(config.blob_peak * std::exp(-d2 / two_s2));
      if (rng) v += rng->uniform_int(config.noise_min, config.noise_max);
      frame.at_keyboard(i, j) = static_cast<std::uint8_t>(std::clamp(v, 0L, 255L));
    }
  }
  return frame;
}

Point heatmap_centroid(const KeyboardLayout& layout, const HeatmapFrame& frame, int floor) {
  double total = 0.0, sx = 0.0, sy = 0.0;
  for (int i = 0; i < kGridRows; ++i)
    for (int j = 0; j < kGridCols; ++j) {
      const double v = frame.at_keyboard(i, j) > floor ? frame.at_keyboard(i, j) : 0.0;
      const Point c = layout.cell_center(i, j);
      total += v;
      sx += v * c.x;
      sy += v * c.y;
    }
  if (total <= 0.0) return {std::nan(""), std::nan("")};
  return {sx / total, sy / total};
}

namespace {

std::string id_string(const char* prefix, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%03d", prefix, index);
  return buf;
}

struct UserTypist {
  const KeyboardLayout& layout;
  const SynthConfig& config;
  SynthRng rng;
  Point offset;
  std::string user_id;
  std::int64_t clock_ms = 0;

  UserTypist(const KeyboardLayout& l, const SynthConfig& c, int user)
      : layout(l), config(c), rng(derive_seed(c.seed, static_cast<std::uint64_t>(user))) {
    user_id = id_string("u", user);
    offset = {config.user_offset_mean.x + config.user_offset_sd.x * rng.normal(),
              config.user_offset_mean.y + config.user_offset_sd.y * rng.normal()};
  }

  SynthTap tap_for(KeyId key, const std::string& prompt_id) {
    const Point center = layout.key(key).center();
    Point contact{center.x + offset.x + config.contact_sigma_x * rng.normal(),
                  center.y + offset.y + config.contact_sigma_y * rng.normal()};
    contact.x = std::clamp(contact.x, 0.0, layout.width());
    contact.y = std::clamp(contact.y, 0.0, layout.height());
    Point reported{contact.x + config.report_bias.x + config.report_sigma * rng.normal(),
                   contact.y + config.report_bias.y + config.report_sigma * rng.normal()};
    reported.x = std::clamp(reported.x, 0.0, layout.width());
    reported.y = std::clamp(reported.y, 0.0, layout.height());

    SynthTap s;
    s.contact = contact;
    s.tap.centroid = reported;
    s.tap.heatmap = render_heatmap(layout, contact, config, &rng);
    s.tap.label = key;
    s.tap.user_id = user_id;
    s.tap.prompt_id = prompt_id;
    advance();
    s.tap.t_ms = clock_ms;
    return s;
  }

  void advance() {
    clock_ms += static_cast<std::int64_t>(
        std::llround(config.tap_interval_ms * (0.75 + 0.5 * rng.uniform())));
  }

  void type(const std::string& text, const std::string& prompt_id, std::vector<SynthTap>& out) {
    for (char ch : to_key_text(text)) out.push_back(tap_for(*KeyId::from_char(ch), prompt_id));
    clock_ms += 2000;
  }
};

}  // namespace

std::vector<SynthTap> generate_detailed(const KeyboardLayout& layout, const SynthConfig& config) {
  config.validate();
  const auto& prompts = config.prompts.empty() ? default_prompts() : config.prompts;
  if (prompts.empty()) throw DataError("synth: no prompts");
  std::vector<SynthTap> out;
  for (int u = 0; u < config.users; ++u) {
    UserTypist typist(layout, config, u);
    const std::size_t start = static_cast<std::size_t>(u) * 7 % prompts.size();
    std::size_t before = out.size();
    for (std::size_t n = 0; static_cast<int>(out.size() - before) < config.taps_per_user; ++n) {
      const std::size_t p = (start + n) % prompts.size();
      typist.type(prompts[p], id_string("p", static_cast<int>(p)), out);
    }
  }
  return out;
}

std::vector<TapSample> generate_dataset(const KeyboardLayout& layout, const SynthConfig& config) {
  auto detailed = generate_detailed(layout, config);
  std::vector<TapSample> taps;
  taps.reserve(detailed.size());
  for (auto& s : detailed) taps.push_back(std::move(s.tap));
  return taps;
}

std::vector<TapSample> generate_for_texts(const KeyboardLayout& layout, const SynthConfig& config,
                                          const std::vector<std::string>& texts) {
  config.validate();
  std::vector<SynthTap> out;
  for (int u = 0; u < config.users; ++u) {
    UserTypist typist(layout, config, u);
    for (std::size_t p = 0; p < texts.size(); ++p)
      typist.type(texts[p], id_string("p", static_cast<int>(p)), out);
  }
  std::vector<TapSample> taps;
  taps.reserve(out.size());
  for (auto& s : out) taps.push_back(std::move(s.tap));
  return taps;
}

std::vector<TypingEvent> generate_typing_log(const KeyboardLayout& layout,
                                             const SynthConfig& config,
                                             const std::vector<std::string>& texts,
                                             double correction_probability) {
  config.validate();
  if (!(correction_probability >= 0.0 && correction_probability <= 1.0))
    throw DataError("synth: correction probability must be in [0, 1]");
  std::vector<TypingEvent> events;
  for (int u = 0; u < config.users; ++u) {
    UserTypist typist(layout, config, u);
    for (std::size_t p = 0; p < texts.size(); ++p) {
      const std::string prompt_id = id_string("p", static_cast<int>(p));
      for (char ch : to_key_text(texts[p])) {
        const KeyId key = *KeyId::from_char(ch);
        for (int attempt = 0;; ++attempt) {
          SynthTap s = typist.tap_for(key, prompt_id);
          TypingEvent e;
          e.t_ms = s.tap.t_ms;
          e.user_id = typist.user_id;
          e.prompt_id = prompt_id;
          e.decoded = containing_or_closest_key(layout, s.tap.centroid);
          s.tap.label.reset();
          e.tap = std::move(s.tap);
          const bool wrong = *e.decoded != key;
          events.push_back(std::move(e));
          if (!wrong || attempt >= 3 || typist.rng.uniform() >= correction_probability) break;
          typist.advance();
          events.push_back({EventKind::Backspace, typist.clock_ms, typist.user_id, prompt_id,
                            std::nullopt, std::nullopt});
        }
      }
      typist.clock_ms += 2000;
    }
  }
  return events;
}

}  // namespace heattap
