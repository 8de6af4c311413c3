#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "heattap/decoder.hpp"
#include "heattap/stats.hpp"

namespace heattap {

struct Fold {
  std::string test_user;
  std::vector<std::string> validation_users;
  std::vector<std::string> training_users;
};

/// Distinct user ids in first-appearance order.
std::vector<std::string> users_of(std::span<const TapSample> taps);

/// One fold per user: that user is the test set, `validation_count` of the
/// others are drawn by a seeded shuffle, the rest train. Needs at least
/// validation_count + 2 users.
std::vector<Fold> make_fold_plan(std::span<const std::string> users, std::uint64_t seed,
                                 std::size_t validation_count = 3);

/// Where the LM context of a tap comes from: the reference labels of the
/// earlier taps in the trial, or what the decoder produced for them.
enum class ContextSource { Reference, Decoded };

std::string to_string(ContextSource source);
ContextSource parse_context_source(std::string_view name);

/// "onkey", "distance", or a feature-set name (trained).
bool is_trained_model(std::string_view name);

struct EvalOptions {
  std::vector<std::string> models{"distance", "C"};
  DecodeConfig decode;
  /// With decode.use_lm and an LM, also report every model with the LM off.
  bool lm_toggle = true;
  TrainConfig train;
  std::uint64_t seed = 1;
  ContextSource context = ContextSource::Reference;
  std::size_t validation_users = 3;
  bool keep_traces = false;
  /// Worker threads for folds; 0 uses one per core. Results do not depend on it.
  std::size_t threads = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static EvalOptions from_json(const nlohmann::json& j);
};

struct UserResult {
  std::string user_id;
  double cer = 0.0;
  std::size_t taps = 0;
  std::size_t errors = 0;
  double wer = 0.0;  ///< mean over the user's trials
  double wpm = 0.0;  ///< from tap times, independent of the decoder
};

struct BucketShares {
  double not_ambiguous = 0.0;  ///< percent of decoded taps
  double model_without_lm = 0.0;
  double model_with_lm = 0.0;
};

struct ConditionReport {
  std::string name;
  std::string model;
  bool lm = false;
  std::vector<UserResult> users;
  double mean_cer = 0.0;
  double std_cer = 0.0;  ///< sample standard deviation over users
  double mean_wer = 0.0;
  double mean_wpm = 0.0;
  BucketShares buckets;
};

struct Comparison {
  std::string a;
  std::string b;
  PairedStats stats;  ///< per-user CER of a minus b
};

struct EvalReport {
  std::string mode;  ///< loocv, fixed or ensemble
  nlohmann::json options;
  std::vector<ConditionReport> conditions;
  std::vector<Comparison> comparisons;

  const ConditionReport& condition(std::string_view name) const;
  nlohmann::json to_json() const;
  static EvalReport from_json(const nlohmann::json& j);
};

struct ConditionTraces {
  std::string condition;
  std::vector<DecodeTrace> traces;
};

struct EvalResult {
  EvalReport report;
  std::vector<ConditionTraces> traces;  ///< filled when keep_traces is set
};

/// Leave-one-user-out evaluation of every model in `options`.
EvalResult loocv(const KeyboardLayout& layout, std::span<const TapSample> taps,
                 const EvalOptions& options, const CharLM* lm = nullptr);

/// Train on `train`, select C on `validation`, report on `test`.
EvalResult fixed_split(const KeyboardLayout& layout, std::span<const TapSample> train,
                       std::span<const TapSample> validation, std::span<const TapSample> test,
                       const EvalOptions& options, const CharLM* lm = nullptr);

/// Each test user's CER averaged over the models of every LOOCV fold of
/// `train` (validation users drawn from the fold's remaining users).
EvalResult ensemble(const KeyboardLayout& layout, std::span<const TapSample> train,
                    std::span<const TapSample> test, const EvalOptions& options,
                    const CharLM* lm = nullptr);

/// Decodes `taps` in order, trial by trial (runs of equal user and prompt id).
struct DecodedStream {
  std::vector<KeyId> predictions;
  std::vector<DecodeTrace> traces;
};
DecodedStream decode_stream(const KeyboardLayout& layout, const SpatialScorer& scorer,
                            const CharLM* lm, std::span<const TapSample> taps,
                            const DecodeConfig& config,
                            ContextSource context = ContextSource::Reference);

}  // namespace heattap
