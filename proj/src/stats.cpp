#include "heattap/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace heattap {

namespace {

double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 500;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("incomplete beta needs a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double front = std::exp(std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                                a * std::log(x) + b * std::log1p(-x));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_two_tailed(double t, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("degrees of freedom must be positive");
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  return incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

WilcoxonResult wilcoxon_signed_rank(std::span<const double> differences) {
  WilcoxonResult r;
  std::vector<double> d;
  for (double x : differences)
    if (x != 0.0) d.push_back(x);
  r.n = d.size();
  if (d.empty()) return r;

  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return std::abs(d[i]) < std::abs(d[j]); });
  // Doubled average ranks stay integral.
  std::vector<long> rank2(d.size());
  double tie_term = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const long doubled = static_cast<long>(i + j + 2);  // 2 * mean of ranks i+1..j+1
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = doubled;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  long plus2 = 0, minus2 = 0;
  for (std::size_t i = 0; i < d.size(); ++i) (d[i] > 0 ? plus2 : minus2) += rank2[i];
  r.w_plus = plus2 / 2.0;
  r.w_minus = minus2 / 2.0;
  r.w = std::min(r.w_plus, r.w_minus);

  const double n = static_cast<double>(r.n);
  if (r.n <= 25) {
    r.exact = true;
    const long total = plus2 + minus2;
    std::vector<double> ways(static_cast<std::size_t>(total) + 1, 0.0);
    ways[0] = 1.0;
    for (long v : rank2)
      for (long s = total; s >= v; --s) ways[s] += ways[s - v];
    const long w2 = std::min(plus2, minus2);
    double below = 0.0;
    for (long s = 0; s <= w2; ++s) below += ways[s];
    r.p = std::min(1.0, 2.0 * below / std::ldexp(1.0, static_cast<int>(r.n)));
  } else {
    r.exact = false;
    const double mean = n * (n + 1.0) / 4.0;
    const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    const double z = (r.w - mean) / std::sqrt(var);
    r.p = std::min(1.0, 2.0 * normal_cdf(-std::abs(z)));
  }
  return r;
}

PairedStats paired_stats(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("paired samples differ in length");
  if (a.size() < 2) throw std::invalid_argument("paired statistics need at least two pairs");
  PairedStats s;
  s.n = a.size();
  std::vector<double> diff(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) diff[i] = a[i] - b[i];
  const double n = static_cast<double>(s.n);
  s.mean_diff = std::accumulate(diff.begin(), diff.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : diff) ss += (x - s.mean_diff) * (x - s.mean_diff);
  s.sd_diff = std::sqrt(ss / (n - 1.0));
  if (s.sd_diff > 0.0) {
    s.t = s.mean_diff / (s.sd_diff / std::sqrt(n));
    s.p_t = student_t_two_tailed(s.t, n - 1.0);
    s.cohens_d = s.mean_diff / s.sd_diff;
  } else if (s.mean_diff == 0.0) {
    s.t = 0.0;
    s.p_t = 1.0;
    s.cohens_d = 0.0;
  } else {
    s.t = s.mean_diff > 0 ? INFINITY : -INFINITY;
    s.p_t = 0.0;
  }
  s.wilcoxon = wilcoxon_signed_rank(diff);
  return s;
}

namespace {

nlohmann::json number(double x) {
  if (std::isnan(x)) return "NaN";
  if (std::isinf(x)) return x > 0 ? "Infinity" : "-Infinity";
  return x;
}

double read_number(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "NaN") return std::numeric_limits<double>::quiet_NaN();
    if (s == "Infinity") return INFINITY;
    if (s == "-Infinity") return -INFINITY;
  }
  return j.get<double>();
}

}  // namespace

nlohmann::json PairedStats::to_json() const {
  return {{"n", n},
          {"mean_diff", number(mean_diff)},
          {"sd_diff", number(sd_diff)},
          {"t", number(t)},
          {"p_t", number(p_t)},
          {"cohens_d", cohens_d ? number(*cohens_d) : nlohmann::json(nullptr)},
          {"wilcoxon",
           {{"w", wilcoxon.w},
            {"w_plus", wilcoxon.w_plus},
            {"w_minus", wilcoxon.w_minus},
            {"n", wilcoxon.n},
            {"p", number(wilcoxon.p)},
            {"exact", wilcoxon.exact}}}};
}

PairedStats PairedStats::from_json(const nlohmann::json& j) {
  PairedStats s;
  s.n = j.at("n").get<std::size_t>();
  s.mean_diff = read_number(j.at("mean_diff"));
  s.sd_diff = read_number(j.at("sd_diff"));
  s.t = read_number(j.at("t"));
  s.p_t = read_number(j.at("p_t"));
  if (!j.at("cohens_d").is_null()) s.cohens_d = read_number(j.at("cohens_d"));
  const auto& w = j.at("wilcoxon");
  s.wilcoxon.w = w.at("w").get<double>();
  s.wilcoxon.w_plus = w.at("w_plus").get<double>();
  s.wilcoxon.w_minus = w.at("w_minus").get<double>();
  s.wilcoxon.n = w.at("n").get<std::size_t>();
  s.wilcoxon.p = read_number(w.at("p"));
  s.wilcoxon.exact = w.at("exact").get<bool>();
  return s;
}

}  // namespace heattap
