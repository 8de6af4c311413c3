#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "heattap/align.hpp"
#include "heattap/decoder.hpp"
#include "heattap/features.hpp"
#include "heattap/harness.hpp"
#include "heattap/lm.hpp"
#include "heattap/metrics.hpp"
#include "heattap/prompts.hpp"
#include "heattap/spatial.hpp"
#include "heattap/synth.hpp"

using namespace heattap;
namespace fs = std::filesystem;

namespace {

const KeyboardLayout& L() { return default_layout(); }
KeyId key(char c) { return *KeyId::from_char(c); }

struct Outcome {
  bool pass = true;
  std::string detail;
  double limit_s = 0.0;  // 0: no runtime bound
};

// Collects failed conditions and their descriptions.
struct Checker {
  Outcome out;
  void operator()(bool ok, const std::string& what) {
    if (!ok) {
      out.pass = false;
      if (!out.detail.empty()) out.detail += "; ";
      out.detail += what;
    }
  }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

// --- 1 ---------------------------------------------------------------------

Outcome feature_dims() {
  Checker check;
  check.out.limit_s = 1.0;
  SynthConfig cfg;
  SynthRng rng(1);
  TapSample t;
  t.centroid = L().key(key('g')).center();
  t.heatmap = render_heatmap(L(), t.centroid, cfg, &rng);
  const std::pair<FeatureSetKind, Eigen::Index> expected[] = {
      {FeatureSetKind::C, 56}, {FeatureSetKind::Hf, 288}, {FeatureSetKind::CHf, 344},
      {FeatureSetKind::Ho, 28}, {FeatureSetKind::CHo, 84}};
  for (auto [kind, dim] : expected) {
    check(static_cast<Eigen::Index>(feature_dim(kind)) == dim, to_string(kind) + " declared dim");
    check(build_features(L(), kind, t).size() == dim, to_string(kind) + " built dim");
  }
  if (check.out.pass) check.out.detail = "C=56 Hf=288 CHf=344 Ho=28 CHo=84";
  return check.out;
}

// --- 2 ---------------------------------------------------------------------

// Unit-area sample count over a pixel lattice of the given pitch.
double raster_overlap(const Rect& a, const Rect& b, double step) {
  const double left = std::max(a.left, b.left), right = std::min(a.right(), b.right());
  const double top = std::max(a.top, b.top), bottom = std::min(a.bottom(), b.bottom());
  if (right <= left || bottom <= top) return 0.0;
  long count = 0;
  for (double y = std::floor(top / step) * step + 0.5 * step; y < bottom; y += step) {
    if (y < top) continue;
    for (double x = std::floor(left / step) * step + 0.5 * step; x < right; x += step)
      if (x >= left) ++count;
  }
  return static_cast<double>(count) * step * step;
}

Outcome overlap_weights() {
  Checker check;
  check.out.limit_s = 10.0;
  double worst_sum = 0.0;
  for (KeyId k : all_keys()) {
    double s = 0.0;
    for (int i = 0; i < kGridRows; ++i)
      for (int j = 0; j < kGridCols; ++j) s += overlap_area(L(), k, i, j);
    worst_sum = std::max(worst_sum, std::abs(s / L().key(k).box.area() - 1.0));
  }
  check(worst_sum <= 1e-9, fmt("weight sum off by %.3g", worst_sum));

  // Key edges fall on half pixels, so the 1 px raster runs on the doubled layout.
  std::mt19937_64 rng(11);
  double worst_rel = 0.0;
  int nonzero = 0;
  for (int t = 0; t < 1000; ++t) {
    const KeyId k(static_cast<int>(rng() % kNumKeys));
    // Half the cases pick a cell under the key so most comparisons are non-trivial.
    int i = static_cast<int>(rng() % kGridRows), j = static_cast<int>(rng() % kGridCols);
    if (t % 2 == 0) {
      const Point c = L().key(k).center();
      for (int r = 0; r < kGridRows; ++r)
        if (L().cell(r, 0).top <= c.y && c.y < L().cell(r, 0).bottom()) i = r;
      for (int q = 0; q < kGridCols; ++q)
        if (L().cell(0, q).left <= c.x && c.x < L().cell(0, q).right()) j = q;
      i = std::clamp(i + static_cast<int>(rng() % 3) - 1, 0, kGridRows - 1);
      j = std::clamp(j + static_cast<int>(rng() % 3) - 1, 0, kGridCols - 1);
    }
    const double exact = overlap_area(L(), k, i, j);
    Rect a = L().key(k).box, b = L().cell(i, j);
    for (Rect* r : {&a, &b}) *r = {2 * r->left, 2 * r->top, 2 * r->width, 2 * r->height};
    const double raster = raster_overlap(a, b, 1.0) / 4.0;
    if (exact == 0.0) {
      check(raster == 0.0, "raster finds overlap where none exists");
    } else {
      ++nonzero;
      worst_rel = std::max(worst_rel, std::abs(raster - exact) / exact);
    }
  }
  check(worst_rel <= 0.005, fmt("raster mismatch %.4f", worst_rel));
  check(nonzero >= 400, "too few overlapping cases");
  check.out.detail = check.out.pass ? fmt("sum error %.2g, raster worst %.2g over %.0f overlapping cases",
                                          worst_sum, worst_rel, nonzero)
                                    : check.out.detail;
  return check.out;
}

// --- 3 ---------------------------------------------------------------------

Outcome gradient_check() {
  Checker check;
  check.out.limit_s = 30.0;
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double h = 1e-4;
  double worst = 0.0;
  const FeatureSetKind kinds[] = {FeatureSetKind::Ho, FeatureSetKind::C, FeatureSetKind::CHo};
  for (int trial = 0; trial < 100; ++trial) {
    const FeatureSetKind kind = kinds[trial % 3];
    const Eigen::Index d = static_cast<Eigen::Index>(feature_dim(kind));
    SpatialModel m = SpatialModel::zeros(kind, Normalizer());
    for (Eigen::Index i = 0; i < m.weights.size(); ++i) m.weights.data()[i] = 0.5 * u(rng);
    for (int k = 0; k < kNumKeys; ++k) m.bias(k) = 0.5 * u(rng);
    const int n = 5 + static_cast<int>(rng() % 20);
    Eigen::MatrixXd f(n, d);
    for (Eigen::Index i = 0; i < f.size(); ++i) f.data()[i] = u(rng);
    std::vector<KeyId> y;
    for (int i = 0; i < n; ++i) y.push_back(KeyId(static_cast<int>(rng() % kNumKeys)));
    const double reg = 0.01 + 0.5 * (u(rng) + 1.0);
    const auto r = loss_and_gradient(m, f, y, reg);

    Eigen::MatrixXd num_w(kNumKeys, d);
    Eigen::VectorXd num_b(kNumKeys);
    for (Eigen::Index i = 0; i < m.weights.size(); ++i) {
      SpatialModel p = m, q = m;
      p.weights.data()[i] += h;
      q.weights.data()[i] -= h;
      num_w.data()[i] = (loss_and_gradient(p, f, y, reg).loss - loss_and_gradient(q, f, y, reg).loss) / (2 * h);
    }
    for (int k = 0; k < kNumKeys; ++k) {
      SpatialModel p = m, q = m;
      p.bias(k) += h;
      q.bias(k) -= h;
      num_b(k) = (loss_and_gradient(p, f, y, reg).loss - loss_and_gradient(q, f, y, reg).loss) / (2 * h);
    }
    worst = std::max({worst,
                      (num_w - r.grad_weights).norm() / std::max(num_w.norm(), r.grad_weights.norm()),
                      (num_b - r.grad_bias).norm() / std::max(num_b.norm(), r.grad_bias.norm())});
  }
  check(worst <= 1e-5, fmt("worst relative error %.3g", worst));
  if (check.out.pass) check.out.detail = fmt("worst relative error %.3g over 100 models", worst);
  return check.out;
}

// --- 4 ---------------------------------------------------------------------

Outcome zero_model_loss() {
  Checker check;
  SynthConfig cfg;
  cfg.users = 2;
  cfg.taps_per_user = 200;
  const auto taps = generate_dataset(L(), cfg);
  std::vector<KeyId> y;
  for (const auto& t : taps) y.push_back(*t.label);
  double worst = 0.0;
  for (auto kind : {FeatureSetKind::C, FeatureSetKind::Hf, FeatureSetKind::CHf, FeatureSetKind::Ho,
                    FeatureSetKind::CHo}) {
    const Eigen::MatrixXd f = build_feature_matrix(L(), kind, taps);
    const auto r = loss_and_gradient(SpatialModel::zeros(kind, Normalizer()), f, y, 1.0);
    worst = std::max(worst, std::abs(r.loss - std::log(28.0)));
  }
  check(worst <= 1e-9, fmt("|L - ln 28| = %.3g", worst));
  if (check.out.pass) check.out.detail = fmt("|L - ln 28| = %.2g on %.0f taps, all feature sets", worst,
                                             static_cast<double>(taps.size()));
  return check.out;
}

// --- 5 ---------------------------------------------------------------------

Outcome trainability() {
  Checker check;
  check.out.limit_s = 10.0;
  SynthRng rng(5);
  std::vector<TapSample> taps;
  const char keys[] = {'a', 'g', 'l'};
  for (int i = 0; i < 500; ++i) {
    const char c = keys[i % 3];
    const Point p = L().key(key(c)).center();
    TapSample t;
    t.centroid = {p.x + 12.0 * rng.normal(), p.y + 12.0 * rng.normal()};
    t.label = key(c);
    t.user_id = "u";
    taps.push_back(t);
  }
  TrainConfig cfg;
  cfg.c_grid = {1.0};
  cfg.max_iterations = 1000;
  const SpatialModel m = train(L(), taps, taps, FeatureSetKind::C, cfg);
  std::size_t right = 0;
  for (const auto& t : taps) right += argmax_key(predict_tap(L(), m, t)) == *t.label;
  const double acc = static_cast<double>(right) / static_cast<double>(taps.size());
  check(acc >= 0.99, fmt("training accuracy %.4f", acc));
  check(m.meta.iterations <= 1000, "iteration cap exceeded");
  if (check.out.pass)
    check.out.detail = fmt("training accuracy %.4f after %.0f iterations", acc, m.meta.iterations);
  return check.out;
}

// --- 6 ---------------------------------------------------------------------

Outcome distance_baseline() {
  Checker check;
  check(kDefaultDistanceSigma == 0.03, "sigma is not 0.03");
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> ux(0.0, L().width()), uy(0.0, L().height());
  int bad = 0;
  for (int t = 0; t < 1000; ++t) {
    TapSample tap;
    tap.centroid = {ux(rng), uy(rng)};
    const KeyDistribution p = distance_proba(L(), tap);
    auto by_p = all_keys(), by_d = all_keys();
    std::stable_sort(by_p.begin(), by_p.end(),
                     [&](KeyId a, KeyId b) { return p(a.index()) > p(b.index()); });
    std::stable_sort(by_d.begin(), by_d.end(), [&](KeyId a, KeyId b) {
      return normalized_distance(L(), tap.centroid, a) < normalized_distance(L(), tap.centroid, b);
    });
    // Underflowed tails compare equal, so only the distinguishable prefix must agree.
    for (std::size_t i = 0; i + 1 < by_p.size(); ++i) {
      if (p(by_p[i].index()) == p(by_p[i + 1].index())) break;
      if (by_p[i] != by_d[i]) {
        ++bad;
        break;
      }
    }
  }
  check(bad == 0, fmt("%.0f taps ordered differently", bad));

  // SPACE: the normalized distance is zero over the inner interval and grows outside it
  const double y = L().key(KeyId::space()).center().y;
  const double left = L().key(KeyId::space()).box.left;
  check(normalized_distance(L(), {left + 67.5, y}, KeyId::space()) == 0.0, "inner edge 67.5");
  check(normalized_distance(L(), {left + 607.5, y}, KeyId::space()) == 0.0, "inner edge 607.5");
  check(normalized_distance(L(), {left + 67.0, y}, KeyId::space()) > 0.0, "below 67.5");
  check(normalized_distance(L(), {left + 608.0, y}, KeyId::space()) > 0.0, "above 607.5");
  if (check.out.pass) check.out.detail = "1000 taps ordered by distance; SPACE interval [67.5, 607.5]";
  return check.out;
}

// --- 7 ---------------------------------------------------------------------

struct FixedLM final : CharLM {
  KeyDistribution p;
  explicit FixedLM(KeyDistribution q) : p(std::move(q)) {}
  KeyDistribution next_key_probs(std::string_view) const override { return p; }
};

KeyDistribution peaked(std::initializer_list<std::pair<char, double>> mass) {
  KeyDistribution p = KeyDistribution::Constant(1e-12);
  for (auto [c, m] : mass) p(key(c).index()) = m;
  return p / p.sum();
}

SpatialModel constant_model(const KeyDistribution& p) {
  SpatialModel m = SpatialModel::zeros(
      FeatureSetKind::C, Normalizer(Eigen::VectorXd::Zero(56), Eigen::VectorXd::Ones(56)));
  m.bias = p.array().log().matrix();
  return m;
}

Outcome decoder_logic() {
  Checker check;
  TapSample t;
  t.centroid = {900.0, 360.0};  // on h, a third of a key off-center
  const SpatialModel hj = constant_model(peaked({{'h', 0.4}, {'j', 0.6}}));
  const FixedLM lm(peaked({{'h', 0.9}, {'j', 0.1}}));
  DecodeConfig cfg;
  cfg.use_lm = true;

  auto d = decode(L(), hj, &lm, t, "s", cfg);
  check(d.key == key('h') && d.trace.bucket == DecodeBucket::ModelWithLm, "product branch");
  d = decode(L(), hj, &lm, t, "the ", cfg);
  check(d.key == key('j') && d.trace.bucket == DecodeBucket::ModelWithoutLm, "word-start branch");
  const SpatialModel dot = constant_model(peaked({{'.', 0.6}, {'e', 0.4}}));
  d = decode(L(), dot, &lm, t, "th", cfg);
  check(d.key == KeyId::period() && d.trace.bucket == DecodeBucket::ModelWithoutLm, "period branch");

  const KeyGeometry& g = L().key(key('g'));
  const Point c = g.center();
  check(is_unambiguous(L(), c) == key('g'), "SUC at center");
  check(!is_unambiguous(L(), {c.x + 0.25 * g.box.width, c.y}), "SUC x boundary is strict");
  check(!is_unambiguous(L(), {c.x, c.y + 0.25 * g.box.height}), "SUC y boundary is strict");
  check(is_unambiguous(L(), {c.x + 0.2499 * g.box.width, c.y - 0.2499 * g.box.height}) == key('g'),
        "SUC inside the quarter box");
  cfg.use_suc = true;
  d = decode(L(), constant_model(peaked({{'q', 0.99}})), &lm, [&] {
    TapSample s;
    s.centroid = c;
    return s;
  }(), "s", cfg);
  check(d.key == key('g') && d.trace.bucket == DecodeBucket::NotAmbiguous, "SUC bypasses the model");

  const KeySet fig1 = candidate_filter(L(), {455.0, 548.0});
  std::string labels;
  for (KeyId k : all_keys())
    if (fig1.test(k.index())) labels += k.is_space() ? '_' : k.to_char();
  check(labels == "cdfsxz_", "candidate set " + labels);
  if (check.out.pass) check.out.detail = "3 branches, strict SUC quarter box, candidates {s,d,f,z,x,c,SPACE}";
  return check.out;
}

// --- 8 ---------------------------------------------------------------------

std::vector<std::string> all_strings(std::string_view alphabet, std::size_t max_len) {
  std::vector<std::string> out{""};
  for (std::size_t start = 0, len = 0; len < max_len; ++len) {
    const std::size_t end = out.size();
    for (std::size_t i = start; i < end; ++i)
      for (char c : alphabet) out.push_back(out[i] + c);
    start = end;
  }
  return out;
}

void enumerate_scripts(const std::string& ref, std::size_t i, std::string& hyp, int cost,
                       std::string_view alphabet, std::size_t max_len,
                       std::unordered_map<std::string, int>& best) {
  if (cost > static_cast<int>(max_len)) return;
  if (i == ref.size()) {
    auto [it, fresh] = best.emplace(hyp, cost);
    if (!fresh) it->second = std::min(it->second, cost);
  }
  if (hyp.size() < max_len)
    for (char c : alphabet) {
      hyp.push_back(c);
      enumerate_scripts(ref, i, hyp, cost + 1, alphabet, max_len, best);
      hyp.pop_back();
    }
  if (i == ref.size()) return;
  enumerate_scripts(ref, i + 1, hyp, cost + 1, alphabet, max_len, best);
  if (hyp.size() < max_len)
    for (char c : alphabet) {
      hyp.push_back(c);
      enumerate_scripts(ref, i + 1, hyp, cost + (c != ref[i]), alphabet, max_len, best);
      hyp.pop_back();
    }
  if (i + 1 < ref.size() && ref[i] != ref[i + 1] && hyp.size() + 2 <= max_len) {
    hyp.push_back(ref[i + 1]);
    hyp.push_back(ref[i]);
    enumerate_scripts(ref, i + 2, hyp, cost + 1, alphabet, max_len, best);
    hyp.resize(hyp.size() - 2);
  }
}

std::vector<TypingEvent> typed(std::string_view text) {
  std::vector<TypingEvent> ev;
  std::int64_t t = 0;
  for (char c : text) {
    TypingEvent e;
    e.t_ms = t += 100;
    e.user_id = "u";
    e.prompt_id = "p";
    if (c == '<') {
      e.kind = EventKind::Backspace;
    } else {
      e.kind = EventKind::Tap;
      TapSample s;
      s.centroid = L().key(key(c)).center();
      s.t_ms = t;
      s.user_id = "u";
      s.prompt_id = "p";
      e.tap = s;
      e.decoded = key(c);
    }
    ev.push_back(std::move(e));
  }
  return ev;
}

Outcome alignment() {
  Checker check;
  check.out.limit_s = 60.0;
  const std::string alphabet = "abcd";
  const auto strings = all_strings(alphabet, 5);
  long mismatches = 0;
  for (const auto& r : strings) {
    std::unordered_map<std::string, int> best;
    std::string hyp;
    enumerate_scripts(r, 0, hyp, 0, alphabet, 5, best);
    for (const auto& h : strings) {
      const auto it = best.find(h);
      if (it == best.end() || script_cost(align_strings(r, h)) != it->second) ++mismatches;
    }
  }
  check(mismatches == 0, fmt("%.0f string pairs disagree with exhaustive search", mismatches));

  check(replay_deleted("missed", typed("missd<ed")).pairs.empty(), "missd kept");
  check(replay_deleted("breathing", typed("be<reathing")).pairs.empty(), "Be kept");
  const auto iraq = align_committed("iraq", typed("iran")).pairs;
  check(iraq.size() == 4 && far_key_filter(L(), iraq).size() == 3, "Iraq/Iran not dropped");
  if (check.out.pass)
    check.out.detail = fmt("%.0f string pairs match exhaustive search; missd, Be and Iraq/Iran excluded",
                           static_cast<double>(strings.size() * strings.size()));
  return check.out;
}

// --- 9 ---------------------------------------------------------------------

double entropy_of(const std::vector<std::string>& texts) {
  CharDistribution c = CharDistribution::Zero();
  for (const auto& t : texts) c += char_counts(t);
  return char_entropy(c);
}

Outcome greedy_selection() {
  Checker check;
  const std::vector<std::string> toy = {
      "the quick fox", "a lazy dog",   "jump over",   "hello world", "zebra zone",
      "my watch fell", "big red box",  "queen bee",   "sad cat",     "pizza time",
      "extra jam",     "vivid sky",    "oak tree",    "wet grass",   "kind words",
      "yellow yak",    "mixed nuts",   "quiet night", "frozen lake", "the end."};
  PromptPool pool;
  for (const auto& t : toy) pool.prompts.push_back({t, PromptOrigin::Corpus});
  const auto picked = greedy_select(pool, toy.size());
  std::vector<std::string> chosen;
  for (const auto& p : picked) {
    chosen.push_back(p);
    const double h = entropy_of(chosen);
    for (const auto& r : toy) {
      if (std::find(chosen.begin(), chosen.end(), r) != chosen.end()) continue;
      auto trial = chosen;
      trial.back() = r;
      check(entropy_of(trial) <= h + 1e-12, "step " + std::to_string(chosen.size()) + " is not the argmax");
    }
  }
  const double uniform = char_entropy(CharDistribution::Ones());
  check(std::abs(uniform - std::log2(28.0)) <= 1e-12, fmt("uniform entropy %.15f", uniform));
  if (check.out.pass) check.out.detail = "20 steps match brute force; H(uniform) = log2 28";
  return check.out;
}

// --- 10 --------------------------------------------------------------------

Outcome end_to_end() {
  Checker check;
  check.out.limit_s = 600.0;
  SynthConfig cfg;
  cfg.seed = 2024;
  const auto taps = generate_dataset(L(), cfg);
  std::size_t min_taps = taps.size();
  for (const auto& u : users_of(taps))
    min_taps = std::min<std::size_t>(
        min_taps, std::count_if(taps.begin(), taps.end(), [&](const TapSample& t) { return t.user_id == u; }));
  check(users_of(taps).size() == 24 && min_taps >= 2000, "dataset shape");

  EvalOptions o;
  o.models = {"C", "CHo", "Hf"};
  o.train.c_grid = {1.0};
  o.train.gradient_tolerance = 1e-4;
  o.train.max_iterations = 1000;
  o.seed = 2024;
  const auto report = loocv(L(), taps, o).report;
  const double c = report.condition("C").mean_cer;
  const double cho = report.condition("CHo").mean_cer;
  const double hf = report.condition("Hf").mean_cer;
  check(cho <= 0.9 * c, fmt("CHo %.2f vs C %.2f", cho, c));
  check(hf <= 0.9 * c, fmt("Hf %.2f vs C %.2f", hf, c));
  check.out.detail = fmt("CER C %.2f%%, CHo %.2f%%, ", c, cho) +
                     fmt("Hf %.2f%% (relative reductions %.1f%%, %.1f%%)", hf, 100 * (1 - cho / c),
                         100 * (1 - hf / c)) +
                     (check.out.pass ? "" : "; " + check.out.detail);
  return check.out;
}

// --- 11 --------------------------------------------------------------------

Outcome lm_direction() {
  Checker check;
  const auto lm = NgramCharLM::train_file(std::string(HEATTAP_DATA_DIR) + "/english_corpus.txt");
  SynthConfig cfg;
  cfg.seed = 11;
  std::vector<std::string> english(default_prompts().begin(), default_prompts().begin() + 20);
  std::vector<std::string> random;
  SynthRng rng(1111);
  for (std::size_t i = 0; i < english.size(); ++i) {
    std::string s;
    for (int w = 0; w < 4; ++w) {
      if (w) s += ' ';
      for (int j = 0; j < 5; ++j) s += static_cast<char>('a' + rng.uniform_int(0, 25));
    }
    random.push_back(s);
  }
  auto cer_of = [&](const std::vector<std::string>& texts, bool use_lm) {
    const auto taps = generate_for_texts(L(), cfg, texts);
    DecodeConfig d;
    d.use_lm = use_lm;
    const auto s = decode_stream(L(), DistanceBaseline{}, &lm, taps, d, ContextSource::Decoded);
    std::vector<KeyId> ref;
    for (const auto& t : taps) ref.push_back(*t.label);
    return cer(ref, s.predictions);
  };
  const double en_off = cer_of(english, false), en_on = cer_of(english, true);
  const double rnd_off = cer_of(random, false), rnd_on = cer_of(random, true);
  check(en_on < en_off, "English: LM does not help");
  check(rnd_on > rnd_off, "random strings: LM does not hurt");
  check.out.detail = fmt("English %.2f%% -> %.2f%%, ", en_off, en_on) +
                     fmt("random %.2f%% -> %.2f%% (LM off -> on)", rnd_off, rnd_on) +
                     (check.out.pass ? "" : "; " + check.out.detail);
  return check.out;
}

// --- 12 --------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome cli_determinism() {
  Checker check;
  const fs::path dir = fs::temp_directory_path() / ("heattap_accept_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::string data = HEATTAP_DATA_DIR;
  const auto p = [&](const std::string& name) { return (dir / name).string(); };
  std::ofstream(p("synth.json")) << R"({"users": 5, "taps_per_user": 150})";
  std::ofstream(p("train.json")) << R"({"c_grid": [1.0], "gradient_tolerance": 1e-3})";
  std::ofstream(p("eval.json")) << R"({"models": ["distance", "CHo"], "train": {"c_grid": [1.0], "gradient_tolerance": 1e-3}})";
  std::ofstream(p("texts.txt")) << "my watch fell in the water.\nthe cat sat on the warm mat.\n";

  // Each step writes into a per-run directory; {r} is replaced by the run index.
  const std::vector<std::pair<std::string, std::vector<std::string>>> steps = {
      {"gen --seed 7 --config " + p("synth.json") + " --out {r}taps.jsonl", {"taps.jsonl"}},
      {"gen --seed 7 --config " + p("synth.json") + " --typing-log " + p("texts.txt") +
           " --out {r}events.jsonl",
       {"events.jsonl"}},
      {"select-prompts --corpus " + data + "/prompts/corpus_phrases.txt --added " + data +
           "/prompts/added_phrases.txt --common-words " + data + "/prompts/common_words.txt -n 10 --out {r}prompts.txt",
       {"prompts.txt"}},
      {"lm-train --corpus " + data + "/english_corpus.txt --out {r}lm.json", {"lm.json"}},
      {"train --seed 7 --kind CHo --config " + p("train.json") + " --taps {r}taps.jsonl --out {r}model.json",
       {"model.json"}},
      {"decode --use-lm --use-suc --use-filter --model {r}model.json --lm {r}lm.json --taps {r}taps.jsonl"
       " --out {r}pred.jsonl --traces {r}traces.jsonl",
       {"pred.jsonl", "traces.jsonl"}},
      {"align --far-key-filter --events {r}events.jsonl --prompts " + p("texts.txt") +
           " --out {r}pairs.jsonl --labeled-taps {r}labeled.jsonl",
       {"pairs.jsonl", "labeled.jsonl"}},
      {"eval --seed 7 --mode loocv --use-lm --config " + p("eval.json") +
           " --taps {r}taps.jsonl --lm {r}lm.json --out {r}report.json --traces {r}eval_traces.jsonl",
       {"report.json", "eval_traces.jsonl"}},
  };
  std::size_t compared = 0;
  for (int run = 0; run < 2; ++run) {
    const std::string prefix = p("run" + std::to_string(run)) + "/";
    fs::create_directories(prefix);
    for (const auto& [args, _] : steps) {
      std::string cmd = args;
      for (std::size_t at; (at = cmd.find("{r}")) != std::string::npos;) cmd.replace(at, 3, prefix);
      const int status = std::system((std::string(HEATTAP_CLI) + " " + cmd + " >/dev/null 2>&1").c_str());
      check(WIFEXITED(status) && WEXITSTATUS(status) == 0, "failed: heattap " + cmd);
    }
  }
  for (const auto& [_, outputs] : steps)
    for (const auto& name : outputs) {
      const std::string a = slurp(p("run0/" + name)), b = slurp(p("run1/" + name));
      check(!a.empty(), name + " is empty");
      check(a == b, name + " differs between runs");
      ++compared;
    }
  fs::remove_all(dir);
  if (check.out.pass) check.out.detail = fmt("%.0f outputs byte-identical across reruns", compared);
  return check.out;
}

}  // namespace

int main(int argc, char** argv) {
  // optional arguments select criteria by number
  std::set<std::size_t> only;
  for (int a = 1; a < argc; ++a) only.insert(std::stoul(argv[a]));
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"feature dimensionalities", feature_dims},
      {"overlap weights", overlap_weights},
      {"gradient check", gradient_check},
      {"zero-model loss", zero_model_loss},
      {"trainability", trainability},
      {"distance baseline", distance_baseline},
      {"decoder logic", decoder_logic},
      {"alignment", alignment},
      {"greedy selection", greedy_selection},
      {"end-to-end heatmap effect", end_to_end},
      {"LM direction", lm_direction},
      {"CLI determinism", cli_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && !only.count(i + 1)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (o.limit_s > 0.0 && secs >= o.limit_s) {
      o.pass = false;
      o.detail += fmt(" (runtime %.1f s over the %.0f s limit)", secs, o.limit_s);
    }
    failed += !o.pass;
    std::printf("%s %2zu %s [%.2f s]: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                secs, o.detail.c_str());
    std::fflush(stdout);
  }
  const std::size_t ran = only.empty() ? criteria.size() : only.size();
  std::printf("%d of %zu criteria passed\n", static_cast<int>(ran) - failed, ran);
  return failed == 0 ? 0 : 1;
}
