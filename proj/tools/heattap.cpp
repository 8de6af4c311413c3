#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "heattap/align.hpp"
#include "heattap/decoder.hpp"
#include "heattap/harness.hpp"
#include "heattap/layout.hpp"
#include "heattap/lm.hpp"
#include "heattap/prompts.hpp"
#include "heattap/spatial.hpp"
#include "heattap/synth.hpp"

using namespace heattap;

namespace {

struct Common {
  std::optional<std::uint64_t> seed;
  std::string layout;
  std::string config;
  std::vector<std::string> kinds;
  std::optional<bool> use_lm;
  bool use_suc = false;
  bool use_filter = false;
};

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cannot parse " + path + ": " + e.what());
  }
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  std::vector<std::string> lines;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

KeyboardLayout load_layout(const Common& c) {
  return c.layout.empty() ? default_layout() : KeyboardLayout::load(c.layout);
}

std::vector<TapSample> read_taps(const std::string& path) { return load_taps(path); }

DecodeConfig decode_config(const Common& c, DecodeConfig base) {
  if (c.use_lm) base.use_lm = *c.use_lm;
  if (c.use_suc) base.use_suc = true;
  if (c.use_filter) base.use_filter = true;
  base.validate();
  return base;
}

std::optional<NgramCharLM> maybe_lm(const std::string& path) {
  if (path.empty()) return std::nullopt;
  return NgramCharLM::load(path);
}

std::string prompt_id(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%03zu", index);
  return buf;
}

void add_common(CLI::App* app, Common& c, bool kinds, bool decode_flags) {
  app->add_option("--seed", c.seed, "root seed");
  app->add_option("--layout", c.layout, "layout JSON (default: built-in 1440x854 QWERTY)");
  app->add_option("--config", c.config, "config JSON");
  if (kinds)
    app->add_option("--kind", c.kinds, "feature set(s): C, Hf, CHf, Ho, CHo, or distance/onkey")
        ->check(CLI::IsMember({"C", "Hf", "CHf", "Ho", "CHo", "distance", "onkey"}));
  if (decode_flags) {
    app->add_flag_callback("--use-lm", [&c] { c.use_lm = true; }, "fuse the language model");
    app->add_flag_callback("--no-lm", [&c] { c.use_lm = false; }, "spatial model only");
    app->add_flag("--use-suc", c.use_suc, "skip unambiguous taps");
    app->add_flag("--use-filter", c.use_filter, "restrict to neighbor keys");
  }
}

int run_gen(const Common& c, const std::string& out, const std::string& log_texts,
            double correction) {
  const KeyboardLayout layout = load_layout(c);
  SynthConfig cfg = c.config.empty() ? SynthConfig{} : SynthConfig::from_json(read_json(c.config));
  if (c.seed) cfg.seed = *c.seed;
  auto stream = open_out(out);
  if (log_texts.empty()) {
    write_taps_jsonl(stream, generate_dataset(layout, cfg));
  } else {
    write_events_jsonl(stream, generate_typing_log(layout, cfg, read_lines(log_texts), correction));
  }
  return 0;
}

int run_select(const std::string& corpus, const std::string& added, const std::string& words,
               std::size_t n, const std::string& out) {
  const PromptPool pool = filter_pool(load_pool(corpus, added, words));
  const auto chosen = greedy_select(pool, n);
  auto stream = open_out(out);
  for (const auto& p : chosen) stream << p << '\n';
  CharDistribution total = CharDistribution::Zero();
  for (const auto& p : chosen) total += char_counts(p);
  std::cerr << "selected " << chosen.size() << " of " << pool.prompts.size()
            << " prompts, entropy " << char_entropy(total) << " bits\n";
  return 0;
}

/// Splits `taps` into training and validation users with a seeded draw.
std::pair<std::vector<TapSample>, std::vector<TapSample>> split_validation(
    std::span<const TapSample> taps, std::uint64_t seed, std::size_t count) {
  auto users = users_of(taps);
  if (users.size() <= count) throw DataError("not enough users for a validation split");
  SynthRng rng(seed);
  for (std::size_t i = users.size(); i-- > 1;)
    std::swap(users[i], users[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i)))]);
  std::set<std::string> val(users.begin(), users.begin() + static_cast<long>(count));
  std::pair<std::vector<TapSample>, std::vector<TapSample>> split;
  for (const auto& t : taps) (val.count(t.user_id) ? split.second : split.first).push_back(t);
  return split;
}

int run_train(const Common& c, const std::string& taps_path, const std::string& val_path,
              std::size_t val_users, const std::vector<double>& grid, const std::string& out) {
  if (c.kinds.size() != 1 || !is_trained_model(c.kinds.front()))
    throw CLI::ValidationError("--kind", "train needs exactly one feature set");
  const KeyboardLayout layout = load_layout(c);
  TrainConfig cfg = c.config.empty() ? TrainConfig{} : TrainConfig::from_json(read_json(c.config));
  if (c.seed) cfg.seed = *c.seed;
  if (!grid.empty()) cfg.c_grid = grid;
  cfg.validate();
  auto taps = read_taps(taps_path);
  std::vector<TapSample> train_set, val_set;
  if (val_path.empty()) {
    std::tie(train_set, val_set) = split_validation(taps, cfg.seed, val_users);
  } else {
    train_set = std::move(taps);
    val_set = read_taps(val_path);
  }
  const SpatialModel model =
      train(layout, train_set, val_set, parse_feature_kind(c.kinds.front()), cfg);
  model.save(out);
  std::cerr << "C=" << model.inv_reg << " val_acc=" << model.meta.val_accuracy
            << " iters=" << model.meta.iterations << '\n';
  return 0;
}

int run_decode(const Common& c, const std::string& model_path, const std::string& taps_path,
               const std::string& lm_path, const std::string& context, const std::string& out,
               const std::string& traces_out) {
  const KeyboardLayout layout = load_layout(c);
  DecodeConfig base = c.config.empty() ? DecodeConfig{} : DecodeConfig::from_json(read_json(c.config));
  const DecodeConfig cfg = decode_config(c, base);
  SpatialScorer scorer = DistanceBaseline{};
  if (!model_path.empty()) {
    scorer = SpatialModel::load(model_path, layout);
  } else if (!c.kinds.empty() && c.kinds.front() == "onkey") {
    scorer = OnKeyBaseline{};
  } else if (!c.kinds.empty() && c.kinds.front() != "distance") {
    throw CLI::ValidationError("--model", "a trained feature set needs --model");
  }
  const auto lm = maybe_lm(lm_path);
  if (cfg.use_lm && !lm) throw CLI::ValidationError("--lm", "--use-lm needs --lm");
  const auto taps = read_taps(taps_path);
  const auto stream = decode_stream(layout, scorer, lm ? &*lm : nullptr, taps, cfg,
                                    parse_context_source(context));
  auto pred = open_out(out);
  for (std::size_t i = 0; i < taps.size(); ++i) {
    nlohmann::json j{{"tap_ref", tap_ref(taps[i])},
                     {"decoded", std::string(1, stream.predictions[i].to_char())}};
    if (taps[i].label) j["label"] = std::string(1, taps[i].label->to_char());
    pred << j.dump() << '\n';
  }
  if (!traces_out.empty()) {
    auto tr = open_out(traces_out);
    for (const auto& t : stream.traces) tr << t.to_json().dump() << '\n';
  }
  return 0;
}

int run_align(const Common& c, const std::string& events_path, const std::string& prompts_path,
              bool far_filter, const std::string& out, const std::string& taps_out) {
  const KeyboardLayout layout = load_layout(c);
  const auto prompts = read_lines(prompts_path);
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < prompts.size(); ++i) index[prompt_id(i)] = i;

  std::ifstream in(events_path);
  if (!in) throw DataError("cannot open " + events_path);
  const auto events = read_events_jsonl(in);

  std::vector<AlignedPair> pairs;
  std::size_t warnings = 0;
  for (std::size_t i = 0; i < events.size();) {
    std::size_t j = i;
    while (j < events.size() && events[j].user_id == events[i].user_id &&
           events[j].prompt_id == events[i].prompt_id)
      ++j;
    auto it = index.find(events[i].prompt_id);
    if (it == index.end()) throw DataError("unknown prompt id " + events[i].prompt_id);
    auto r = align_trial(prompts[it->second], std::span(events).subspan(i, j - i));
    for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';
    warnings += r.warnings.size();
    pairs.insert(pairs.end(), r.pairs.begin(), r.pairs.end());
    i = j;
  }
  const std::size_t before = pairs.size();
  if (far_filter) pairs = far_key_filter(layout, pairs);
  auto stream = open_out(out);
  write_pairs_jsonl(stream, pairs);
  if (!taps_out.empty()) {
    std::vector<TapSample> labeled;
    for (const auto& p : pairs) {
      labeled.push_back(p.tap);
      labeled.back().label = p.reference;
    }
    save_taps(taps_out, labeled);
  }
  std::cerr << pairs.size() << " pairs (" << before - pairs.size() << " far-key drops, "
            << warnings << " warnings)\n";
  return 0;
}

int run_eval(const Common& c, const std::string& mode, const std::string& taps_path,
             const std::string& train_path, const std::string& val_path,
             const std::string& test_path, const std::string& lm_path, const std::string& out,
             const std::string& traces_out, const std::string& context) {
  const KeyboardLayout layout = load_layout(c);
  EvalOptions opts = c.config.empty() ? EvalOptions{} : EvalOptions::from_json(read_json(c.config));
  if (c.seed) opts.seed = *c.seed;
  if (!c.kinds.empty()) opts.models = c.kinds;
  if (!context.empty()) opts.context = parse_context_source(context);
  opts.decode = decode_config(c, opts.decode);
  opts.keep_traces = !traces_out.empty();
  opts.validate();
  const auto lm = maybe_lm(lm_path);
  if (opts.decode.use_lm && !lm) throw CLI::ValidationError("--lm", "--use-lm needs --lm");
  const CharLM* lmp = lm ? &*lm : nullptr;

  EvalResult result;
  if (mode == "loocv") {
    if (taps_path.empty()) throw CLI::ValidationError("--taps", "loocv needs --taps");
    result = loocv(layout, read_taps(taps_path), opts, lmp);
  } else if (mode == "fixed") {
    if (train_path.empty() || val_path.empty() || test_path.empty())
      throw CLI::ValidationError("--train", "fixed needs --train, --val and --test");
    result = fixed_split(layout, read_taps(train_path), read_taps(val_path), read_taps(test_path),
                         opts, lmp);
  } else {
    if (train_path.empty() || test_path.empty())
      throw CLI::ValidationError("--train", "ensemble needs --train and --test");
    result = ensemble(layout, read_taps(train_path), read_taps(test_path), opts, lmp);
  }
  write_json(out, result.report.to_json());
  if (!traces_out.empty()) {
    auto tr = open_out(traces_out);
    for (const auto& ct : result.traces)
      for (const auto& t : ct.traces) {
        auto j = t.to_json();
        j["condition"] = ct.condition;
        tr << j.dump() << '\n';
      }
  }
  for (const auto& cond : result.report.conditions)
    std::cerr << cond.name << ": CER " << cond.mean_cer << " +- " << cond.std_cer << '\n';
  return 0;
}

int run_lm_train(const std::string& corpus, int order, double add_k, const std::string& out) {
  NgramCharLM::train_file(corpus, order, add_k).save(out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Touch-heatmap tap decoding for soft keyboards"};
  app.require_subcommand(1);
  Common common;

  auto* gen = app.add_subcommand("gen", "generate synthetic labeled taps or a typing log");
  std::string gen_out, gen_log;
  double correction = 0.8;
  add_common(gen, common, false, false);
  gen->add_option("--out,-o", gen_out, "output JSONL")->required();
  gen->add_option("--typing-log", gen_log,
                  "texts file (one per line); writes typing events instead of taps");
  gen->add_option("--correction", correction, "probability of correcting a wrong key")
      ->check(CLI::Range(0.0, 1.0));

  auto* sel = app.add_subcommand("select-prompts", "filter a prompt pool and pick a greedy set");
  std::string corpus, added, words, sel_out;
  std::size_t count = 90;
  add_common(sel, common, false, false);
  sel->add_option("--corpus", corpus, "corpus phrases")->required();
  sel->add_option("--added", added, "added phrases")->required();
  sel->add_option("--common-words", words, "common word list")->required();
  sel->add_option("-n,--count", count, "prompts to select");
  sel->add_option("--out,-o", sel_out)->required();

  auto* tr = app.add_subcommand("train", "train a spatial model");
  std::string tr_taps, tr_val, tr_out;
  std::size_t val_users = 3;
  std::vector<double> grid;
  add_common(tr, common, true, false);
  tr->add_option("--taps", tr_taps, "labeled taps")->required();
  tr->add_option("--val", tr_val, "validation taps (default: seeded user split)");
  tr->add_option("--validation-users", val_users, "users held out when --val is absent");
  tr->add_option("--c-grid", grid, "inverse regularization grid");
  tr->add_option("--out,-o", tr_out)->required();

  auto* dec = app.add_subcommand("decode", "decode taps");
  std::string dec_model, dec_taps, dec_lm, dec_out, dec_traces, dec_context = "decoded";
  add_common(dec, common, true, true);
  dec->add_option("--model", dec_model, "trained model JSON (default: distance baseline)");
  dec->add_option("--taps", dec_taps)->required();
  dec->add_option("--lm", dec_lm, "language model JSON");
  dec->add_option("--context", dec_context, "LM context source")
      ->check(CLI::IsMember({"reference", "decoded"}));
  dec->add_option("--out,-o", dec_out, "predictions JSONL")->required();
  dec->add_option("--traces", dec_traces, "decode traces JSONL");

  auto* al = app.add_subcommand("align", "label taps of a typing log");
  std::string al_events, al_prompts, al_out, al_taps;
  bool far = false;
  add_common(al, common, false, false);
  al->add_option("--events", al_events)->required();
  al->add_option("--prompts", al_prompts, "prompt file; line i is prompt id p<i>")->required();
  al->add_flag("--far-key-filter", far, "drop pairs whose reference is not a neighbor key");
  al->add_option("--out,-o", al_out, "pairs JSONL")->required();
  al->add_option("--labeled-taps", al_taps, "also write labeled taps JSONL");

  auto* ev = app.add_subcommand("eval", "cross-validated or fixed-split evaluation");
  std::string mode = "loocv", ev_taps, ev_train, ev_val, ev_test, ev_lm, ev_out, ev_traces,
              ev_context;
  add_common(ev, common, true, true);
  ev->add_option("--mode", mode)->check(CLI::IsMember({"loocv", "fixed", "ensemble"}));
  ev->add_option("--taps", ev_taps, "labeled taps (loocv)");
  ev->add_option("--train", ev_train);
  ev->add_option("--val", ev_val);
  ev->add_option("--test", ev_test);
  ev->add_option("--lm", ev_lm, "language model JSON");
  ev->add_option("--context", ev_context, "LM context source")
      ->check(CLI::IsMember({"reference", "decoded"}));
  ev->add_option("--out,-o", ev_out, "report JSON")->required();
  ev->add_option("--traces", ev_traces, "decode traces JSONL");

  auto* lmt = app.add_subcommand("lm-train", "train a character n-gram model");
  std::string lm_corpus, lm_out;
  int order = 5;
  double add_k = 0.1;
  add_common(lmt, common, false, false);
  lmt->add_option("--corpus", lm_corpus)->required();
  lmt->add_option("--order", order)->check(CLI::PositiveNumber);
  lmt->add_option("--add-k", add_k)->check(CLI::PositiveNumber);
  lmt->add_option("--out,-o", lm_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) return run_gen(common, gen_out, gen_log, correction);
    if (*sel) return run_select(corpus, added, words, count, sel_out);
    if (*tr) return run_train(common, tr_taps, tr_val, val_users, grid, tr_out);
    if (*dec)
      return run_decode(common, dec_model, dec_taps, dec_lm, dec_context, dec_out, dec_traces);
    if (*al) return run_align(common, al_events, al_prompts, far, al_out, al_taps);
    if (*ev)
      return run_eval(common, mode, ev_taps, ev_train, ev_val, ev_test, ev_lm, ev_out, ev_traces,
                      ev_context);
    if (*lmt) return run_lm_train(lm_corpus, order, add_k, lm_out);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "heattap: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "heattap: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
