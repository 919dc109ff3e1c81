#pragma once

// Special functions and variate generators used by the analytic models and
// the perfect sampler. Everything here is pure; RNG state is owned by the
// caller.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>

namespace dynns {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();
inline constexpr double kPosInf = std::numeric_limits<double>::infinity();

namespace detail {

inline void require_domain(bool ok, const char* what) {
  if (!ok) throw std::domain_error(what);
}

// log(exp(a) + exp(b)) without overflow; -inf is the additive identity.
inline double log_add_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

// log(1 - exp(x)) for x <= 0.
inline double log1m_exp(double x) {
  if (x == 0.0) return kNegInf;
  return x > -std::numbers::ln2 ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x));
}

// Lanczos approximation, g = 7, 9 terms. Valid for x >= 0.5.
inline double lanczos_log_gamma(double x) {
  static constexpr std::array<double, 9> kCoef = {
      0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
      771.32342877765313,      -176.61502916214059,   12.507343278686905,
      -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};
  constexpr double kG = 7.0;
  const double z = x - 1.0;
  double sum = kCoef[0];
  for (int i = 1; i < 9; ++i) sum += kCoef[i] / (z + i);
  const double t = z + kG + 0.5;
  return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) - t + std::log(sum);
}

constexpr int kMaxSeriesTerms = 100000;
constexpr double kSeriesEps = 1e-17;

// log of sum_{k>=0} x^k / ((a+1)...(a+k)), the series part of P(a, x).
inline double log_lower_gamma_series(double a, double x) {
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < kMaxSeriesTerms; ++k) {
    term *= x / (a + k);
    sum += term;
    if (term < sum * kSeriesEps) break;
  }
  return std::log(sum);
}

// log of the Lentz continued fraction for Q(a, x) without its prefactor.
inline double log_upper_gamma_cf(double a, double x) {
  constexpr double kTiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxSeriesTerms; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < 1e-16) break;
  }
  return std::log(h);
}

}  // namespace detail

/// ln Γ(x) for x > 0.
inline double log_gamma(double x) {
  detail::require_domain(std::isfinite(x) && x > 0.0, "log_gamma: x must be positive and finite");
  if (x < 0.5) return detail::lanczos_log_gamma(x + 1.0) - std::log(x);
  return detail::lanczos_log_gamma(x);
}

/// ln P(a, x), the log of the regularized lower incomplete gamma function.
/// Series for x < a + 1, continued fraction for the complement otherwise.
/// Stays accurate when P itself underflows.
inline double log_reg_lower_inc_gamma(double a, double x) {
  detail::require_domain(std::isfinite(a) && a > 0.0, "reg_lower_inc_gamma: a must be positive");
  detail::require_domain(!std::isnan(x) && x >= 0.0, "reg_lower_inc_gamma: x must be non-negative");
  if (x == 0.0) return kNegInf;
  if (x == kPosInf) return 0.0;
  if (x < a + 1.0) {
    return a * std::log(x) - x - log_gamma(a + 1.0) + detail::log_lower_gamma_series(a, x);
  }
  const double log_q = a * std::log(x) - x - log_gamma(a) + detail::log_upper_gamma_cf(a, x);
  return detail::log1m_exp(log_q);
}

/// P(a, x) = γ(a, x) / Γ(a).
inline double reg_lower_inc_gamma(double a, double x) {
  return std::exp(log_reg_lower_inc_gamma(a, x));
}

/// ln Q(a, x) = ln(1 - P(a, x)), accurate when Q itself underflows.
inline double log_reg_upper_inc_gamma(double a, double x) {
  detail::require_domain(std::isfinite(a) && a > 0.0, "reg_upper_inc_gamma: a must be positive");
  detail::require_domain(!std::isnan(x) && x >= 0.0, "reg_upper_inc_gamma: x must be non-negative");
  if (x == 0.0) return 0.0;
  if (x == kPosInf) return kNegInf;
  if (x < a + 1.0) return detail::log1m_exp(log_reg_lower_inc_gamma(a, x));
  return a * std::log(x) - x - log_gamma(a) + detail::log_upper_gamma_cf(a, x);
}

namespace detail {

// Solves g(u) = target for a monotone g of u = ln x by Newton steps inside a
// maintained bracket, falling back to bisection when a step leaves it.
// `eval` returns {g(u), dg/du}; `increasing` gives the direction.
template <class F>
double solve_log_x(F eval, double target, double u, bool increasing) {
  double lo = kNegInf;
  double hi = kPosInf;
  for (int iter = 0; iter < 200; ++iter) {
    const auto [g, slope] = eval(u);
    const double f = increasing ? g - target : target - g;
    if (f < 0.0) {
      lo = u;
    } else if (f > 0.0) {
      hi = u;
    } else {
      return u;
    }
    double next = u - (g - target) / slope;
    const bool bracketed = std::isfinite(lo) && std::isfinite(hi);
    if (!std::isfinite(next) || (std::isfinite(lo) && next <= lo) || (std::isfinite(hi) && next >= hi)) {
      if (bracketed) {
        next = 0.5 * (lo + hi);
      } else if (!std::isfinite(lo)) {
        next = u - std::max(1.0, std::fabs(u));
      } else {
        next = u + std::max(1.0, std::fabs(u));
      }
    }
    const double step = next - u;
    u = next;
    if (std::fabs(step) <= 1e-15 * std::max(1.0, std::fabs(u))) break;
    if (bracketed && hi - lo <= 1e-15 * std::max(1.0, std::fabs(u))) break;
  }
  return u;
}

}  // namespace detail

/// Solves ln P(a, x) = log_p for x >= 0.
///
/// Works on u = ln x. Below p = 1/2 it solves for ln P, which is increasing
/// and concave in u; above it solves for ln Q = ln(1 - p), which keeps full
/// precision as p approaches one.
inline double inv_log_reg_lower_inc_gamma(double a, double log_p) {
  detail::require_domain(std::isfinite(a) && a > 0.0, "inv_reg_lower_inc_gamma: a must be positive");
  detail::require_domain(!std::isnan(log_p) && log_p <= 0.0,
                         "inv_reg_lower_inc_gamma: log p must be <= 0");
  if (log_p == kNegInf) return 0.0;
  if (log_p == 0.0) return kPosInf;

  const double lg_a = log_gamma(a);
  // d ln P / d ln x = x^a e^{-x} / (Γ(a) P), and likewise for Q with a sign.
  auto density = [&](double u, double log_tail) { return std::exp(a * u - std::exp(u) - lg_a - log_tail); };

  if (log_p < -std::numbers::ln2) {
    // Leading-order small-x guess: ln P ~ a ln x - ln Γ(a+1).
    double u = (log_p + lg_a + std::log(a)) / a;
    if (log_p > -1.0) u = std::max(u, std::log(a));
    auto eval = [&](double v) {
      const double lp = log_reg_lower_inc_gamma(a, std::exp(v));
      return std::pair{lp, density(v, lp)};
    };
    return std::exp(detail::solve_log_x(eval, log_p, u, true));
  }
  const double log_q = std::log(-std::expm1(log_p));
  // Large-x guess: ln Q ~ (a - 1) ln x - x - ln Γ(a), solved roughly for x.
  double x = std::max(a, -log_q);
  for (int k = 0; k < 5; ++k) x = std::max(a, -log_q + (a - 1.0) * std::log(x) - lg_a);
  auto eval = [&](double v) {
    const double lq = log_reg_upper_inc_gamma(a, std::exp(v));
    return std::pair{lq, -density(v, lq)};
  };
  return std::exp(detail::solve_log_x(eval, log_q, std::log(x), false));
}

/// Inverse of reg_lower_inc_gamma in x for p in [0, 1).
inline double inv_reg_lower_inc_gamma(double a, double p) {
  detail::require_domain(!std::isnan(p) && p >= 0.0 && p < 1.0,
                         "inv_reg_lower_inc_gamma: p must lie in [0, 1)");
  if (p == 0.0) return 0.0;
  return inv_log_reg_lower_inc_gamma(a, std::log(p));
}

/// Uniform draw on the open interval (0, 1).
template <class Rng>
double open_unit_uniform(Rng& rng) {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (;;) {
    const double u = dist(rng);
    if (u > 0.0 && u < 1.0) return u;
  }
}

/// First coordinate of a point drawn uniformly on the unit (d-1)-sphere.
///
/// Uses u1^2 ~ Beta(1/2, (d-1)/2) with a random sign, so the cost does not
/// depend on d.
template <class Rng>
double sample_beta_first_coordinate(int dim, Rng& rng) {
  detail::require_domain(dim >= 1, "sample_beta_first_coordinate: dimension must be >= 1");
  std::bernoulli_distribution coin(0.5);
  const double sign = coin(rng) ? 1.0 : -1.0;
  if (dim == 1) return sign;
  std::gamma_distribution<double> ga(0.5, 1.0);
  std::gamma_distribution<double> gb(0.5 * (dim - 1), 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  const double s = x + y;
  if (s <= 0.0) return 0.0;
  return sign * std::sqrt(x / s);
}

}  // namespace dynns
