#pragma once

#include <cstddef>
#include <optional>
#include <span>

#include <json.hpp>

namespace heattap {

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double incomplete_beta(double a, double b, double x);

/// Two-tailed p-value of Student's t with `df` degrees of freedom.
double student_t_two_tailed(double t, double df);

/// Standard normal CDF.
double normal_cdf(double z);

struct WilcoxonResult {
  double w = 0.0;        ///< min(W+, W-)
  double w_plus = 0.0;
  double w_minus = 0.0;
  std::size_t n = 0;     ///< non-zero differences
  double p = 1.0;        ///< two-sided
  bool exact = true;     ///< exact null distribution (n <= 25) or normal approximation
};

/// Signed-rank test on the differences; zero differences are dropped and tied
/// magnitudes share their average rank.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences);

struct PairedStats {
  std::size_t n = 0;
  double mean_diff = 0.0;
  double sd_diff = 0.0;
  double t = 0.0;  ///< infinite when all differences are equal and non-zero
  double p_t = 1.0;
  std::optional<double> cohens_d;  ///< undefined when the differences have zero spread
  WilcoxonResult wilcoxon;

  nlohmann::json to_json() const;
  static PairedStats from_json(const nlohmann::json& j);
};

/// Paired comparison of a and b (differences a - b).
PairedStats paired_stats(std::span<const double> a, std::span<const double> b);

}  // namespace heattap
