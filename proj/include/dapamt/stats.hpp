#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace dapamt {

namespace detail {

inline double log_beta(double a, double b) {
  return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
}

// Continued fraction for the regularized incomplete beta (modified Lentz).
inline double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 400;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace detail

/// Regularized incomplete beta function I_x(a, b).
inline double reg_inc_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0) throw std::invalid_argument("reg_inc_beta: a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double front =
      std::exp(a * std::log(x) + b * std::log1p(-x) - detail::log_beta(a, b));
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_cf(a, b, x) / a;
  return 1.0 - front * detail::beta_cf(b, a, 1.0 - x) / b;
}

/// Two-tailed tail mass of Student's t with df degrees of freedom:
/// P(|T| >= |t|).
inline double t_two_tailed_p(double t, double df) {
  if (df <= 0.0) throw std::invalid_argument("t_two_tailed_p: df > 0");
  if (std::isinf(t)) return 0.0;
  return reg_inc_beta(df / 2.0, 0.5, df / (df + t * t));
}

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  int df = 0;
};

/// Equal-variance two-sample t-test (two-tailed). With zero pooled variance
/// the statistic degenerates: equal means give (0, 1), unequal means give
/// (+-inf, 0).
inline TTestResult unpaired_ttest(const std::vector<double>& a,
                                  const std::vector<double>& b) {
  if (a.size() < 2 || b.size() < 2)
    throw std::invalid_argument("unpaired_ttest: need at least 2 values per sample");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  double ma = 0.0, mb = 0.0;
  for (double x : a) ma += x;
  for (double x : b) mb += x;
  ma /= na;
  mb /= nb;
  double ssa = 0.0, ssb = 0.0;
  for (double x : a) ssa += (x - ma) * (x - ma);
  for (double x : b) ssb += (x - mb) * (x - mb);

  TTestResult r;
  r.df = static_cast<int>(na + nb) - 2;
  const double pooled = (ssa + ssb) / static_cast<double>(r.df);
  if (pooled == 0.0) {
    if (ma == mb) return r;  // t = 0, p = 1
    r.t = ma > mb ? std::numeric_limits<double>::infinity()
                  : -std::numeric_limits<double>::infinity();
    r.p = 0.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(pooled * (1.0 / na + 1.0 / nb));
  r.p = t_two_tailed_p(r.t, static_cast<double>(r.df));
  return r;
}

}  // namespace dapamt
