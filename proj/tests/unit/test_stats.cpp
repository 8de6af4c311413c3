#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "heattap/stats.hpp"

using namespace heattap;

namespace {

// Two-sided exact p by listing all 2^n sign patterns over averaged ranks.
double enumerated_p(const std::vector<double>& d) {
  const std::size_t n = d.size();
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      less += std::abs(d[j]) < std::abs(d[i]);
      equal += std::abs(d[j]) == std::abs(d[i]);
    }
    rank[i] = less + (equal + 1.0) / 2.0;
  }
  double plus = 0, minus = 0;
  for (std::size_t i = 0; i < n; ++i) (d[i] > 0 ? plus : minus) += rank[i];
  const double w = std::min(plus, minus);
  std::size_t hits = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << n); ++mask) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1) s += rank[i];
    hits += s <= w + 1e-9;
  }
  return std::min(1.0, 2.0 * static_cast<double>(hits) / std::ldexp(1.0, static_cast<int>(n)));
}

}  // namespace

TEST_CASE("special functions") {
  CHECK(incomplete_beta(2.5, 1.5, 0.3) == doctest::Approx(0.08894372317066562).epsilon(1e-10));
  CHECK(incomplete_beta(2.0, 3.0, 0.0) == 0.0);
  CHECK(incomplete_beta(2.0, 3.0, 1.0) == 1.0);
  CHECK(incomplete_beta(1.0, 1.0, 0.37) == doctest::Approx(0.37).epsilon(1e-12));
  CHECK(incomplete_beta(3.0, 4.0, 0.6) + incomplete_beta(4.0, 3.0, 0.4) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(student_t_two_tailed(2.1, 7) == doctest::Approx(0.0738711962129226).epsilon(1e-10));
  CHECK(student_t_two_tailed(-2.1, 7) == doctest::Approx(0.0738711962129226).epsilon(1e-10));
  CHECK(student_t_two_tailed(0.0, 7) == doctest::Approx(1.0));
  CHECK(normal_cdf(-1.3) == doctest::Approx(0.09680048458561036).epsilon(1e-12));
  CHECK(normal_cdf(0.0) == 0.5);
}

TEST_CASE("paired statistics match reference values") {
  const std::vector<double> a{4.1, 3.8, 5.2, 2.9, 4.4}, b{3.6, 3.9, 4.1, 2.5, 3.7};
  const auto s = paired_stats(a, b);
  CHECK(s.n == 5);
  CHECK(s.t == doctest::Approx(2.653613888015108).epsilon(1e-12));
  CHECK(s.p_t == doctest::Approx(0.05676723381232183).epsilon(1e-10));
  REQUIRE(s.cohens_d.has_value());
  CHECK(*s.cohens_d == doctest::Approx(1.1867322079278593).epsilon(1e-12));
  CHECK(s.wilcoxon.w == 1.0);
  CHECK(s.wilcoxon.exact);
  CHECK(s.wilcoxon.p == doctest::Approx(0.125).epsilon(1e-12));

  const auto back = PairedStats::from_json(s.to_json());
  CHECK(back.t == s.t);
  CHECK(back.wilcoxon.p == s.wilcoxon.p);
}

TEST_CASE("wilcoxon normal approximation with ties and a zero") {
  const std::vector<double> d{0.3, 0.6, 0.0, -0.6, -0.2, -0.7, 0.4, 1.6, -0.2, -0.3,
                              0.8, 0.7, 0.4, -0.6, 0.3, 1.0, -1.0, -0.2, -1.6, -1.0,
                              -1.5, 0.1, -1.0, 0.6, 0.5, 0.1, -2.2, -0.2, 0.3, 0.4};
  const auto r = wilcoxon_signed_rank(d);
  CHECK(r.n == 29);
  CHECK_FALSE(r.exact);
  CHECK(r.w == 203.0);
  CHECK(r.p == doctest::Approx(0.7535453903350631).epsilon(1e-10));
}

TEST_CASE("exact wilcoxon matches sign enumeration") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> mag(1, 4), len(1, 14);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> d(static_cast<std::size_t>(len(rng)));
    for (double& x : d) x = (rng() & 1 ? 1.0 : -1.0) * mag(rng);
    const auto r = wilcoxon_signed_rank(d);
    CHECK(r.exact);
    CHECK(r.w_plus + r.w_minus == doctest::Approx(d.size() * (d.size() + 1) / 2.0));
    CHECK(r.p == doctest::Approx(enumerated_p(d)).epsilon(1e-12));
  }
}

TEST_CASE("statistics edge cases") {
  CHECK_THROWS(paired_stats(std::vector<double>{1.0}, std::vector<double>{2.0}));
  CHECK_THROWS(paired_stats(std::vector<double>{1.0, 2.0}, std::vector<double>{2.0}));

  const auto same = paired_stats(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3});
  CHECK(same.t == 0.0);
  CHECK(same.p_t == 1.0);
  CHECK(same.wilcoxon.n == 0);
  CHECK(same.wilcoxon.p == 1.0);

  const auto shifted = paired_stats(std::vector<double>{2, 3, 4}, std::vector<double>{1, 2, 3});
  CHECK(std::isinf(shifted.t));
  CHECK_FALSE(shifted.cohens_d.has_value());
  const auto back = PairedStats::from_json(shifted.to_json());
  CHECK(std::isinf(back.t));
  CHECK_FALSE(back.cohens_d.has_value());
}
