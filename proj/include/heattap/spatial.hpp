#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

#include "heattap/features.hpp"
#include "heattap/keys.hpp"
#include "heattap/layout.hpp"
#include "heattap/lbfgs.hpp"

namespace heattap {

/// How the inverse regularization strength C scales the L2 term.
enum class RegularizationScale {
  /// loss = mean CE + (1/C) * 0.5 ||W||^2
  Mean,
  /// loss = mean CE + (1/(C N)) * 0.5 ||W||^2, i.e. C * sum CE + 0.5 ||W||^2 up to a factor
  /// of C N; the scikit-learn convention.
  PerSample,
};

std::string to_string(RegularizationScale scale);
RegularizationScale parse_regularization_scale(std::string_view name);

struct TrainConfig {
  std::vector<double> c_grid{0.5, 1.0, 1.5, 2.0};
  int max_iterations = 1000;
  double gradient_tolerance = 1e-6;
  RegularizationScale regularization = RegularizationScale::PerSample;
  std::uint64_t seed = 0;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainConfig from_json(const nlohmann::json& j);
};

struct TrainingMeta {
  int iterations = 0;
  bool converged = false;
  double train_loss = 0.0;
  double train_cross_entropy = 0.0;
  double val_cross_entropy = 0.0;
  double val_accuracy = 0.0;
  std::uint64_t seed = 0;
  std::size_t train_size = 0;
  std::size_t val_size = 0;
};

/// Multinomial logistic regression over one feature set: p = softmax(W f + b)
/// with f normalized by the model's own normalizer.
struct SpatialModel {
  FeatureSetKind kind = FeatureSetKind::C;
  Eigen::MatrixXd weights;  ///< 28 x d
  Eigen::VectorXd bias;     ///< 28
  Normalizer normalizer;
  double inv_reg = 1.0;  ///< C
  std::string layout_fingerprint;
  TrainingMeta meta;

  Eigen::Index dim() const { return weights.cols(); }

  /// Zero-initialized parameters for `kind`.
  static SpatialModel zeros(FeatureSetKind kind, Normalizer normalizer,
                            std::string layout_fingerprint = {});

  nlohmann::json to_json() const;
  static SpatialModel from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  /// Rejects files whose layout fingerprint differs from `layout`.
  static SpatialModel load(const std::filesystem::path& path, const KeyboardLayout& layout);
};

/// softmax(W f + b) for an already-normalized feature vector.
KeyDistribution predict_proba(const SpatialModel& model,
                              const Eigen::Ref<const Eigen::VectorXd>& features);

/// Builds and normalizes the tap's features, then predicts.
KeyDistribution predict_tap(const KeyboardLayout& layout, const SpatialModel& model,
                            const TapSample& tap);

/// Loss and gradient of the model parameters on a normalized batch with
/// regularization coefficient `reg` multiplying 0.5 ||W||^2.
struct LossGradient {
  double loss = 0.0;
  double cross_entropy = 0.0;
  double l2 = 0.0;
  Eigen::MatrixXd grad_weights;
  Eigen::VectorXd grad_bias;
};
LossGradient loss_and_gradient(const SpatialModel& model,
                               const Eigen::Ref<const Eigen::MatrixXd>& features,
                               std::span<const KeyId> labels, double reg);

/// Coefficient on 0.5 ||W||^2 for inverse strength C over n examples.
double regularization_coefficient(RegularizationScale scale, double inv_reg, std::size_t n);

/// Fits one model per C in the grid (normalizer fitted on `train` only) and
/// returns the one with the best validation accuracy, smaller C on ties.
SpatialModel train(const KeyboardLayout& layout, std::span<const TapSample> train_set,
                   std::span<const TapSample> val_set, FeatureSetKind kind,
                   const TrainConfig& config);

/// Fits a single model with fixed C on normalized features, starting from
/// zero or from `warm_start`. Exposed for tests.
SpatialModel fit_logistic(const Eigen::Ref<const Eigen::MatrixXd>& features,
                          std::span<const KeyId> labels, FeatureSetKind kind, double inv_reg,
                          const TrainConfig& config, Normalizer normalizer,
                          LbfgsResult* trace = nullptr, const SpatialModel* warm_start = nullptr);

// Training-free baselines.

KeyId onkey_predict(const KeyboardLayout& layout, const TapSample& tap);

inline constexpr double kDefaultDistanceSigma = 0.03;

/// Gaussian scores of the normalized key distances, normalized over all keys.
KeyDistribution distance_proba(const KeyboardLayout& layout, const TapSample& tap,
                               double sigma = kDefaultDistanceSigma);

struct OnKeyBaseline {};
struct DistanceBaseline {
  double sigma = kDefaultDistanceSigma;
};

/// Anything that turns a tap into p^SM.
using SpatialScorer = std::variant<OnKeyBaseline, DistanceBaseline, SpatialModel>;

/// p^SM for any scorer. On-key yields a one-hot distribution.
KeyDistribution spatial_proba(const KeyboardLayout& layout, const SpatialScorer& scorer,
                              const TapSample& tap);

std::string scorer_name(const SpatialScorer& scorer);

}  // namespace heattap
