#include "heattap/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <map>
#include <numeric>
#include <mutex>
#include <stdexcept>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include "heattap/metrics.hpp"
#include "heattap/synth.hpp"

namespace heattap {

std::vector<std::string> users_of(std::span<const TapSample> taps) {
  std::vector<std::string> users;
  std::unordered_set<std::string> seen;
  for (const auto& t : taps)
    if (seen.insert(t.user_id).second) users.push_back(t.user_id);
  return users;
}

std::vector<Fold> make_fold_plan(std::span<const std::string> users, std::uint64_t seed,
                                 std::size_t validation_count) {
  if (users.size() < validation_count + 2)
    throw DataError("need at least " + std::to_string(validation_count + 2) + " users, got " +
                    std::to_string(users.size()));
  std::vector<Fold> plan;
  for (std::size_t f = 0; f < users.size(); ++f) {
    std::vector<std::string> rest;
    for (std::size_t u = 0; u < users.size(); ++u)
      if (u != f) rest.push_back(users[u]);
    SynthRng rng(derive_seed(seed, f));
    for (std::size_t i = rest.size(); i-- > 1;)
      std::swap(rest[i], rest[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i)))]);
    Fold fold;
    fold.test_user = users[f];
    fold.validation_users.assign(rest.begin(), rest.begin() + static_cast<long>(validation_count));
    fold.training_users.assign(rest.begin() + static_cast<long>(validation_count), rest.end());
    std::sort(fold.validation_users.begin(), fold.validation_users.end());
    std::sort(fold.training_users.begin(), fold.training_users.end());
    plan.push_back(std::move(fold));
  }
  return plan;
}

std::string to_string(ContextSource source) {
  return source == ContextSource::Reference ? "reference" : "decoded";
}

ContextSource parse_context_source(std::string_view name) {
  if (name == "reference") return ContextSource::Reference;
  if (name == "decoded") return ContextSource::Decoded;
  throw DataError("unknown context source '" + std::string(name) + "'");
}

bool is_trained_model(std::string_view name) { return name != "onkey" && name != "distance"; }

void EvalOptions::validate() const {
  if (models.empty()) throw std::invalid_argument("no models to evaluate");
  for (const auto& m : models)
    if (is_trained_model(m)) parse_feature_kind(m);
  decode.validate();
  train.validate();
}

nlohmann::json EvalOptions::to_json() const {
  return {{"models", models},
          {"decode", decode.to_json()},
          {"lm_toggle", lm_toggle},
          {"train", train.to_json()},
          {"seed", seed},
          {"context", to_string(context)},
          {"validation_users", validation_users}};
}

EvalOptions EvalOptions::from_json(const nlohmann::json& j) {
  EvalOptions o;
  try {
    o.models = j.value("models", o.models);
    if (j.contains("decode")) o.decode = DecodeConfig::from_json(j.at("decode"));
    o.lm_toggle = j.value("lm_toggle", o.lm_toggle);
    if (j.contains("train")) o.train = TrainConfig::from_json(j.at("train"));
    o.seed = j.value("seed", o.seed);
    o.context = parse_context_source(j.value("context", to_string(o.context)));
    o.validation_users = j.value("validation_users", o.validation_users);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid evaluation options: ") + e.what());
  }
  return o;
}

const ConditionReport& EvalReport::condition(std::string_view name) const {
  for (const auto& c : conditions)
    if (c.name == name) return c;
  throw std::out_of_range("no condition '" + std::string(name) + "' in report");
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json conds = nlohmann::json::array();
  for (const auto& c : conditions) {
    nlohmann::json users = nlohmann::json::array();
    for (const auto& u : c.users)
      users.push_back({{"user_id", u.user_id},
                       {"cer", u.cer},
                       {"taps", u.taps},
                       {"errors", u.errors},
                       {"wer", u.wer},
                       {"wpm", u.wpm}});
    conds.push_back({{"name", c.name},
                     {"model", c.model},
                     {"lm", c.lm},
                     {"mean_cer", c.mean_cer},
                     {"std_cer", c.std_cer},
                     {"mean_wer", c.mean_wer},
                     {"mean_wpm", c.mean_wpm},
                     {"buckets",
                      {{"not_ambiguous", c.buckets.not_ambiguous},
                       {"model_without_lm", c.buckets.model_without_lm},
                       {"model_with_lm", c.buckets.model_with_lm}}},
                     {"users", users}});
  }
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : comparisons) comps.push_back({{"a", c.a}, {"b", c.b}, {"stats", c.stats.to_json()}});
  return {{"mode", mode}, {"options", options}, {"conditions", conds}, {"comparisons", comps}};
}

EvalReport EvalReport::from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    r.mode = j.at("mode").get<std::string>();
    r.options = j.at("options");
    for (const auto& c : j.at("conditions")) {
      ConditionReport cr;
      cr.name = c.at("name").get<std::string>();
      cr.model = c.at("model").get<std::string>();
      cr.lm = c.at("lm").get<bool>();
      cr.mean_cer = c.at("mean_cer").get<double>();
      cr.std_cer = c.at("std_cer").get<double>();
      cr.mean_wer = c.at("mean_wer").get<double>();
      cr.mean_wpm = c.at("mean_wpm").get<double>();
      const auto& b = c.at("buckets");
      cr.buckets = {b.at("not_ambiguous").get<double>(), b.at("model_without_lm").get<double>(),
                    b.at("model_with_lm").get<double>()};
      for (const auto& u : c.at("users"))
        cr.users.push_back({u.at("user_id").get<std::string>(), u.at("cer").get<double>(),
                            u.at("taps").get<std::size_t>(), u.at("errors").get<std::size_t>(),
                            u.at("wer").get<double>(), u.at("wpm").get<double>()});
      r.conditions.push_back(std::move(cr));
    }
    for (const auto& c : j.at("comparisons"))
      r.comparisons.push_back({c.at("a").get<std::string>(), c.at("b").get<std::string>(),
                               PairedStats::from_json(c.at("stats"))});
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid report: ") + e.what());
  }
  if (r.conditions.size() > 0)
    for (const auto& c : r.conditions)
      if (c.users.size() != r.conditions.front().users.size())
        throw DataError("conditions report different user counts");
  return r;
}

DecodedStream decode_stream(const KeyboardLayout& layout, const SpatialScorer& scorer,
                            const CharLM* lm, std::span<const TapSample> taps,
                            const DecodeConfig& config, ContextSource context) {
  DecodedStream out;
  out.predictions.reserve(taps.size());
  out.traces.reserve(taps.size());
  std::string text;
  for (std::size_t i = 0; i < taps.size(); ++i) {
    const auto& tap = taps[i];
    if (i == 0 || tap.user_id != taps[i - 1].user_id || tap.prompt_id != taps[i - 1].prompt_id)
      text.clear();
    Decoded d = decode(layout, scorer, lm, tap, text, config);
    if (context == ContextSource::Reference) {
      if (!tap.label) throw DataError("tap " + tap_ref(tap) + " has no label");
      text.push_back(tap.label->to_char());
    } else {
      text.push_back(d.key.to_char());
    }
    out.predictions.push_back(d.key);
    out.traces.push_back(std::move(d.trace));
  }
  return out;
}

namespace {

struct ConditionPlan {
  std::string name;
  std::string model;
  bool lm;
  DecodeConfig decode;
};

std::vector<ConditionPlan> plan_conditions(const EvalOptions& o, const CharLM* lm) {
  if (o.decode.use_lm && !lm) throw std::invalid_argument("use_lm is set but no LM was given");
  std::vector<ConditionPlan> plan;
  for (const auto& m : o.models) {
    DecodeConfig off = o.decode;
    off.use_lm = false;
    if (!o.decode.use_lm || o.lm_toggle) plan.push_back({m, m, false, off});
    if (o.decode.use_lm) plan.push_back({m + "+lm", m, true, o.decode});
  }
  return plan;
}

std::vector<KeyId> labels_of(std::span<const TapSample> taps) {
  std::vector<KeyId> out;
  out.reserve(taps.size());
  for (const auto& t : taps) {
    if (!t.label) throw DataError("tap " + tap_ref(t) + " has no label");
    out.push_back(*t.label);
  }
  return out;
}

/// Per-trial WER averaged over the user's trials, and WPM from tap times.
void text_metrics(std::span<const TapSample> taps, std::span<const KeyId> predicted,
                  UserResult& r) {
  std::vector<TrialTiming> timings;
  double wer_sum = 0.0;
  std::size_t trials = 0;
  std::string ref, hyp;
  TrialTiming timing;
  auto flush = [&] {
    if (ref.empty()) return;
    if (!split_words(ref).empty()) {
      wer_sum += wer(ref, hyp);
      ++trials;
    }
    timings.push_back(timing);
    ref.clear();
    hyp.clear();
  };
  for (std::size_t i = 0; i < taps.size(); ++i) {
    if (i > 0 && (taps[i].user_id != taps[i - 1].user_id ||
                  taps[i].prompt_id != taps[i - 1].prompt_id))
      flush();
    if (ref.empty()) timing = {0, taps[i].t_ms, taps[i].t_ms};
    ref.push_back(taps[i].label->to_char());
    hyp.push_back(predicted[i].to_char());
    timing.characters = ref.size();
    timing.last_tap_ms = taps[i].t_ms;
  }
  flush();
  r.wer = trials ? wer_sum / static_cast<double>(trials) : 0.0;
  try {
    r.wpm = wpm(timings);
  } catch (const DataError&) {
    r.wpm = 0.0;
  }
}

struct ConditionAccumulator {
  ConditionReport report;
  std::size_t bucket_counts[3] = {0, 0, 0};
  std::size_t decoded = 0;
  std::vector<DecodeTrace> traces;
};

void count_buckets(ConditionAccumulator& acc, const std::vector<DecodeTrace>& traces,
                   bool keep) {
  for (const auto& t : traces) ++acc.bucket_counts[static_cast<int>(t.bucket)];
  acc.decoded += traces.size();
  if (keep) acc.traces.insert(acc.traces.end(), traces.begin(), traces.end());
}

EvalResult finish(std::string mode, const EvalOptions& options,
                  std::vector<ConditionAccumulator>& accs) {
  EvalResult out;
  out.report.mode = std::move(mode);
  out.report.options = options.to_json();
  for (auto& acc : accs) {
    ConditionReport& c = acc.report;
    const double n = static_cast<double>(c.users.size());
    double sum = 0.0, wer_sum = 0.0, wpm_sum = 0.0;
    for (const auto& u : c.users) {
      sum += u.cer;
      wer_sum += u.wer;
      wpm_sum += u.wpm;
    }
    c.mean_cer = n > 0 ? sum / n : 0.0;
    c.mean_wer = n > 0 ? wer_sum / n : 0.0;
    c.mean_wpm = n > 0 ? wpm_sum / n : 0.0;
    double ss = 0.0;
    for (const auto& u : c.users) ss += (u.cer - c.mean_cer) * (u.cer - c.mean_cer);
    c.std_cer = c.users.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    if (acc.decoded > 0) {
      const double total = static_cast<double>(acc.decoded);
      c.buckets = {100.0 * static_cast<double>(acc.bucket_counts[0]) / total,
                   100.0 * static_cast<double>(acc.bucket_counts[1]) / total,
                   100.0 * static_cast<double>(acc.bucket_counts[2]) / total};
    }
    out.report.conditions.push_back(c);
    if (options.keep_traces) out.traces.push_back({c.name, std::move(acc.traces)});
  }
  const auto& conds = out.report.conditions;
  for (std::size_t i = 0; i < conds.size(); ++i)
    for (std::size_t j = i + 1; j < conds.size(); ++j) {
      if (conds[i].users.size() < 2) continue;
      std::vector<double> a, b;
      for (const auto& u : conds[i].users) a.push_back(u.cer);
      for (const auto& u : conds[j].users) b.push_back(u.cer);
      out.report.comparisons.push_back({conds[i].name, conds[j].name, paired_stats(a, b)});
    }
  return out;
}

std::vector<TapSample> select_users(const std::map<std::string, std::vector<TapSample>>& by_user,
                                    const std::vector<std::string>& users) {
  std::vector<TapSample> out;
  for (const auto& u : users) {
    const auto& v = by_user.at(u);
    out.insert(out.end(), v.begin(), v.end());
  }
  return out;
}

std::map<std::string, std::vector<TapSample>> group_by_user(std::span<const TapSample> taps) {
  std::map<std::string, std::vector<TapSample>> by_user;
  for (const auto& t : taps) by_user[t.user_id].push_back(t);
  return by_user;
}

SpatialScorer make_scorer(const KeyboardLayout& layout, const std::string& model,
                          std::span<const TapSample> train_set,
                          std::span<const TapSample> val_set, const TrainConfig& config) {
  if (model == "onkey") return OnKeyBaseline{};
  if (model == "distance") return DistanceBaseline{};
  return train(layout, train_set, val_set, parse_feature_kind(model), config);
}

UserResult score_user(const std::string& user, std::span<const TapSample> taps,
                      const DecodedStream& stream) {
  UserResult r;
  r.user_id = user;
  const auto labels = labels_of(taps);
  r.taps = taps.size();
  for (std::size_t i = 0; i < taps.size(); ++i)
    if (labels[i] != stream.predictions[i]) ++r.errors;
  r.cer = cer(labels, stream.predictions);
  text_metrics(taps, stream.predictions, r);
  return r;
}

std::vector<ConditionAccumulator> make_accumulators(const std::vector<ConditionPlan>& plan) {
  std::vector<ConditionAccumulator> accs(plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i) {
    accs[i].report.name = plan[i].name;
    accs[i].report.model = plan[i].model;
    accs[i].report.lm = plan[i].lm;
  }
  return accs;
}

/// Decodes every test user under each condition of `model` with `scorer`.
void evaluate_model(const KeyboardLayout& layout, const SpatialScorer& scorer,
                    const std::string& model, const std::vector<ConditionPlan>& plan,
                    std::vector<ConditionAccumulator>& accs,
                    const std::map<std::string, std::vector<TapSample>>& test_by_user,
                    const std::vector<std::string>& test_users, const EvalOptions& o,
                    const CharLM* lm) {
  for (std::size_t c = 0; c < plan.size(); ++c) {
    if (plan[c].model != model) continue;
    for (const auto& u : test_users) {
      const auto& taps = test_by_user.at(u);
      if (taps.empty()) throw DataError("user " + u + " has no taps");
      DecodedStream s = decode_stream(layout, scorer, plan[c].lm ? lm : nullptr, taps,
                                      plan[c].decode, o.context);
      accs[c].report.users.push_back(score_user(u, taps, s));
      count_buckets(accs[c], s.traces, o.keep_traces);
    }
  }
}

/// Runs body(i) for every i < n on up to `threads` workers (0: one per core).
/// The first exception thrown by any call is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& body) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i; (i = next++) < n;) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

void merge_into(std::vector<ConditionAccumulator>& into, std::vector<ConditionAccumulator>& part) {
  for (std::size_t c = 0; c < into.size(); ++c) {
    auto& users = into[c].report.users;
    users.insert(users.end(), part[c].report.users.begin(), part[c].report.users.end());
    for (int b = 0; b < 3; ++b) into[c].bucket_counts[b] += part[c].bucket_counts[b];
    into[c].decoded += part[c].decoded;
    into[c].traces.insert(into[c].traces.end(), std::make_move_iterator(part[c].traces.begin()),
                          std::make_move_iterator(part[c].traces.end()));
  }
}

}  // namespace

EvalResult loocv(const KeyboardLayout& layout, std::span<const TapSample> taps,
                 const EvalOptions& options, const CharLM* lm) {
  options.validate();
  const auto plan = plan_conditions(options, lm);
  const auto users = users_of(taps);
  const auto folds = make_fold_plan(users, options.seed, options.validation_users);
  const auto by_user = group_by_user(taps);
  std::vector<std::vector<ConditionAccumulator>> per_fold(folds.size(), make_accumulators(plan));
  parallel_for(folds.size(), options.threads, [&](std::size_t f) {
    const auto train_set = select_users(by_user, folds[f].training_users);
    const auto val_set = select_users(by_user, folds[f].validation_users);
    for (const auto& model : options.models) {
      const SpatialScorer scorer = make_scorer(layout, model, train_set, val_set, options.train);
      evaluate_model(layout, scorer, model, plan, per_fold[f], by_user, {folds[f].test_user},
                     options, lm);
    }
  });
  auto accs = make_accumulators(plan);
  for (auto& part : per_fold) merge_into(accs, part);
  return finish("loocv", options, accs);
}

EvalResult fixed_split(const KeyboardLayout& layout, std::span<const TapSample> train_set,
                       std::span<const TapSample> validation, std::span<const TapSample> test,
                       const EvalOptions& options, const CharLM* lm) {
  options.validate();
  if (test.empty()) throw DataError("test split is empty");
  const auto plan = plan_conditions(options, lm);
  const auto test_by_user = group_by_user(test);
  const auto test_users = users_of(test);
  auto accs = make_accumulators(plan);
  for (const auto& model : options.models) {
    const SpatialScorer scorer = make_scorer(layout, model, train_set, validation, options.train);
    evaluate_model(layout, scorer, model, plan, accs, test_by_user, test_users, options, lm);
  }
  return finish("fixed", options, accs);
}

EvalResult ensemble(const KeyboardLayout& layout, std::span<const TapSample> train_taps,
                    std::span<const TapSample> test, const EvalOptions& options,
                    const CharLM* lm) {
  options.validate();
  if (test.empty()) throw DataError("test split is empty");
  const auto plan = plan_conditions(options, lm);
  const auto folds =
      make_fold_plan(users_of(train_taps), options.seed, options.validation_users);
  const auto by_user = group_by_user(train_taps);
  const auto test_by_user = group_by_user(test);
  const auto test_users = users_of(test);
  auto accs = make_accumulators(plan);

  for (const auto& model : options.models) {
    const std::size_t runs = is_trained_model(model) ? folds.size() : 1;
    std::vector<std::vector<ConditionAccumulator>> parts(runs, make_accumulators(plan));
    parallel_for(runs, options.threads, [&](std::size_t f) {
      const auto train_set = select_users(by_user, folds[f].training_users);
      const auto val_set = select_users(by_user, folds[f].validation_users);
      const SpatialScorer scorer = make_scorer(layout, model, train_set, val_set, options.train);
      evaluate_model(layout, scorer, model, plan, parts[f], test_by_user, test_users, options,
                     lm);
    });
    std::vector<ConditionAccumulator> per_run = make_accumulators(plan);
    for (auto& part : parts) merge_into(per_run, part);
    for (std::size_t c = 0; c < plan.size(); ++c) {
      if (plan[c].model != model) continue;
      // per_run[c].users holds runs x users results, run-major.
      for (std::size_t u = 0; u < test_users.size(); ++u) {
        UserResult avg = per_run[c].report.users[u];
        double cer_sum = 0.0, wer_sum = 0.0;
        std::size_t errors = 0;
        for (std::size_t f = 0; f < runs; ++f) {
          const auto& r = per_run[c].report.users[f * test_users.size() + u];
          cer_sum += r.cer;
          wer_sum += r.wer;
          errors += r.errors;
        }
        avg.cer = cer_sum / static_cast<double>(runs);
        avg.wer = wer_sum / static_cast<double>(runs);
        avg.errors = (errors + runs / 2) / runs;
        accs[c].report.users.push_back(avg);
      }
      for (int b = 0; b < 3; ++b) accs[c].bucket_counts[b] = per_run[c].bucket_counts[b];
      accs[c].decoded = per_run[c].decoded;
      accs[c].traces = std::move(per_run[c].traces);
    }
  }
  return finish("ensemble", options, accs);
}

}  // namespace heattap
