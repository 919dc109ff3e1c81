#pragma once

// Spherically symmetric likelihoods under a co-centred spherical Gaussian
// prior. Every quantity is a function of the radius |theta|, so the model
// reduces to three monotone maps: radius <-> log-likelihood <-> log prior
// volume.

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dynns/specialfn.hpp"

namespace dynns {

enum class Family { Gaussian, ExpPower, Cauchy };

inline std::string_view family_name(Family f) {
  switch (f) {
    case Family::Gaussian: return "gaussian";
    case Family::ExpPower: return "exp_power";
    case Family::Cauchy: return "cauchy";
  }
  return "unknown";
}

inline Family parse_family(std::string_view s) {
  if (s == "gaussian") return Family::Gaussian;
  if (s == "exp_power") return Family::ExpPower;
  if (s == "cauchy") return Family::Cauchy;
  throw std::invalid_argument("unknown likelihood family: " + std::string(s));
}

struct ModelSpec {
  Family family = Family::Gaussian;
  int dim = 10;
  double shape_b = 1.0;  // exponential power only
  double prior_sigma = 10.0;

  void validate() const {
    if (dim < 1) throw std::invalid_argument("ModelSpec: dim must be >= 1");
    if (!(prior_sigma > 0.0) || !std::isfinite(prior_sigma))
      throw std::invalid_argument("ModelSpec: prior_sigma must be positive");
    if (family == Family::ExpPower && (!(shape_b > 0.0) || !std::isfinite(shape_b)))
      throw std::invalid_argument("ModelSpec: exp_power shape b must be positive");
  }

  friend bool operator==(const ModelSpec& a, const ModelSpec& b) {
    if (a.family != b.family || a.dim != b.dim || a.prior_sigma != b.prior_sigma) return false;
    return a.family != Family::ExpPower || a.shape_b == b.shape_b;
  }
};

inline ModelSpec gaussian_model(int dim, double prior_sigma) {
  return {Family::Gaussian, dim, 1.0, prior_sigma};
}
inline ModelSpec exp_power_model(int dim, double b, double prior_sigma) {
  return {Family::ExpPower, dim, b, prior_sigma};
}
inline ModelSpec cauchy_model(int dim, double prior_sigma) {
  return {Family::Cauchy, dim, 1.0, prior_sigma};
}

/// Log-likelihood at the origin (the normalisation constant).
inline double peak_log_likelihood(const ModelSpec& m) {
  const double d = m.dim;
  switch (m.family) {
    case Family::Gaussian:
      return -0.5 * d * std::log(2.0 * std::numbers::pi);
    case Family::ExpPower: {
      // Normalised so that b = 1 reproduces the Gaussian exactly.
      const double k = d / (2.0 * m.shape_b);
      return std::log(d) + log_gamma(0.5 * d) - 0.5 * d * std::log(std::numbers::pi) -
             (1.0 + k) * std::numbers::ln2 - log_gamma(1.0 + k);
    }
    case Family::Cauchy:
      return log_gamma(0.5 * (d + 1.0)) - 0.5 * (d + 1.0) * std::log(std::numbers::pi);
  }
  return kNegInf;
}

inline double log_likelihood_at_radius(const ModelSpec& m, double r) {
  detail::require_domain(!std::isnan(r) && r >= 0.0, "log_likelihood_at_radius: radius must be >= 0");
  if (r == kPosInf) return kNegInf;
  const double c = peak_log_likelihood(m);
  switch (m.family) {
    case Family::Gaussian: return c - 0.5 * r * r;
    case Family::ExpPower: return c - 0.5 * std::pow(r, 2.0 * m.shape_b);
    case Family::Cauchy: return c - 0.5 * (m.dim + 1.0) * std::log1p(r * r);
  }
  return kNegInf;
}

inline double radius_from_log_likelihood(const ModelSpec& m, double log_l) {
  const double c = peak_log_likelihood(m);
  detail::require_domain(!std::isnan(log_l) && log_l <= c,
                         "radius_from_log_likelihood: log-likelihood above the peak");
  if (log_l == kNegInf) return kPosInf;
  const double drop = c - log_l;
  switch (m.family) {
    case Family::Gaussian: return std::sqrt(2.0 * drop);
    case Family::ExpPower: return std::pow(2.0 * drop, 1.0 / (2.0 * m.shape_b));
    case Family::Cauchy: return std::sqrt(std::expm1(2.0 * drop / (m.dim + 1.0)));
  }
  return kPosInf;
}

/// ln X(r): log of the prior mass inside radius r.
inline double log_x_from_radius(const ModelSpec& m, double r) {
  detail::require_domain(!std::isnan(r) && r >= 0.0, "log_x_from_radius: radius must be >= 0");
  if (r == kPosInf) return 0.0;
  const double s = r / m.prior_sigma;
  return log_reg_lower_inc_gamma(0.5 * m.dim, 0.5 * s * s);
}

inline double radius_from_log_x(const ModelSpec& m, double log_x) {
  detail::require_domain(!std::isnan(log_x) && log_x <= 0.0, "radius_from_log_x: log X must be <= 0");
  const double x = inv_log_reg_lower_inc_gamma(0.5 * m.dim, log_x);
  return m.prior_sigma * std::sqrt(2.0 * x);
}

inline double log_likelihood_from_log_x(const ModelSpec& m, double log_x) {
  detail::require_domain(!std::isnan(log_x) && log_x <= 0.0,
                         "log_likelihood_from_log_x: log X must be <= 0");
  return log_likelihood_at_radius(m, radius_from_log_x(m, log_x));
}

inline double log_x_from_log_likelihood(const ModelSpec& m, double log_l) {
  if (log_l == kNegInf) return 0.0;
  return log_x_from_radius(m, radius_from_log_likelihood(m, log_l));
}

inline double log_x_quadrature_floor(const ModelSpec& m) { return -(40.0 * m.dim + 100.0); }

/// ln[L(X) X], the unnormalised posterior mass per unit ln X.
inline double log_relative_posterior_mass(const ModelSpec& m, double log_x) {
  return log_likelihood_from_log_x(m, log_x) + log_x;
}

inline double relative_posterior_mass(const ModelSpec& m, double log_x) {
  return std::exp(log_relative_posterior_mass(m, log_x));
}

/// Log of the trapezoid-rule integral of L(X) X d(ln X) over [lo, hi] on a
/// uniform grid with `nodes` points.
inline double log_trapezoid_posterior_mass(const ModelSpec& m, double lo, double hi, int nodes) {
  if (nodes < 2) throw std::invalid_argument("quadrature needs at least two nodes");
  if (!(hi > lo)) return kNegInf;
  const double h = (hi - lo) / (nodes - 1);
  // Accumulate in a running log-sum-exp with a rescaled linear accumulator.
  double ref = kNegInf;
  double acc = 0.0;
  for (int i = 0; i < nodes; ++i) {
    const double u = (i == nodes - 1) ? hi : lo + h * i;
    double term = log_relative_posterior_mass(m, u);
    if (i == 0 || i == nodes - 1) term -= std::numbers::ln2;
    if (term == kNegInf) continue;
    if (term > ref) {
      acc = (ref == kNegInf) ? 1.0 : acc * std::exp(ref - term) + 1.0;
      ref = term;
    } else {
      acc += std::exp(term - ref);
    }
  }
  if (ref == kNegInf) return kNegInf;
  return ref + std::log(acc) + std::log(h);
}

/// ln Z by trapezoid quadrature of Z = ∫ L(X) X d(ln X).
inline double quadrature_log_evidence(const ModelSpec& m, int nodes = 1'000'000) {
  return log_trapezoid_posterior_mass(m, log_x_quadrature_floor(m), 0.0, nodes);
}

/// Closed form for the Gaussian family; quadrature otherwise.
inline double analytic_log_evidence(const ModelSpec& m) {
  m.validate();
  if (m.family == Family::Gaussian) {
    const double s2 = m.prior_sigma * m.prior_sigma;
    return -0.5 * m.dim * std::log(2.0 * std::numbers::pi * (1.0 + s2));
  }
  return quadrature_log_evidence(m);
}

/// ln of ∫_{-inf}^{log_x} L(X') X' d(ln X').
inline double log_posterior_mass_remaining(const ModelSpec& m, double log_x, int nodes = 1'000'000) {
  detail::require_domain(!std::isnan(log_x) && log_x <= 0.0,
                         "posterior_mass_remaining: log X must be <= 0");
  const double lo = std::min(log_x_quadrature_floor(m), log_x - 100.0);
  return log_trapezoid_posterior_mass(m, lo, log_x, nodes);
}

inline double posterior_mass_remaining(const ModelSpec& m, double log_x, int nodes = 1'000'000) {
  return std::exp(log_posterior_mass_remaining(m, log_x, nodes));
}

/// Tabulated ln[L(X) X] and its running integral on a uniform ln X grid.
/// Used for plot overlays and for posterior expectations of radial
/// quantities.
class PosteriorMassTable {
 public:
  PosteriorMassTable(const ModelSpec& m, double lo, double hi, int nodes)
      : lo_(lo), hi_(hi), step_((hi - lo) / (nodes - 1)) {
    if (nodes < 2 || !(hi > lo)) throw std::invalid_argument("PosteriorMassTable: bad grid");
    log_x_.resize(nodes);
    radius_.resize(nodes);
    log_mass_.resize(nodes);
    log_cumulative_.resize(nodes);
    for (int i = 0; i < nodes; ++i) {
      const double u = (i == nodes - 1) ? hi : lo + step_ * i;
      log_x_[i] = u;
      radius_[i] = radius_from_log_x(m, u);
      log_mass_[i] = log_likelihood_at_radius(m, radius_[i]) + u;
    }
    log_cumulative_[0] = kNegInf;
    for (int i = 1; i < nodes; ++i) {
      const double seg = detail::log_add_exp(log_mass_[i - 1], log_mass_[i]) - std::numbers::ln2 +
                         std::log(step_);
      log_cumulative_[i] = detail::log_add_exp(log_cumulative_[i - 1], seg);
    }
  }

  explicit PosteriorMassTable(const ModelSpec& m, int nodes = 200'001)
      : PosteriorMassTable(m, log_x_quadrature_floor(m), 0.0, nodes) {}

  const std::vector<double>& log_x() const { return log_x_; }
  const std::vector<double>& radius() const { return radius_; }
  const std::vector<double>& log_mass() const { return log_mass_; }
  const std::vector<double>& log_cumulative() const { return log_cumulative_; }
  double log_total() const { return log_cumulative_.back(); }
  double step() const { return step_; }

  /// Posterior expectation of f(radius) by trapezoid quadrature.
  template <class F>
  double expectation_of_radius(F&& f) const {
    const double lz = log_total();
    double acc = 0.0;
    for (std::size_t i = 0; i < log_x_.size(); ++i) {
      const double w = (i == 0 || i + 1 == log_x_.size()) ? 0.5 : 1.0;
      if (log_mass_[i] == kNegInf) continue;
      acc += w * f(radius_[i]) * std::exp(log_mass_[i] - lz);
    }
    return acc * step_;
  }

  /// Radius below which a fraction q of the posterior mass lies.
  double radius_quantile(double q) const {
    const double target = log_total() + std::log(q);
    for (std::size_t i = 1; i < log_cumulative_.size(); ++i) {
      if (log_cumulative_[i] >= target) {
        const double c0 = std::exp(log_cumulative_[i - 1] - log_total());
        const double c1 = std::exp(log_cumulative_[i] - log_total());
        const double t = (c1 > c0) ? (q - c0) / (c1 - c0) : 0.0;
        return radius_[i - 1] + t * (radius_[i] - radius_[i - 1]);
      }
    }
    return radius_.back();
  }

 private:
  double lo_;
  double hi_;
  double step_;
  std::vector<double> log_x_;
  std::vector<double> radius_;
  std::vector<double> log_mass_;
  std::vector<double> log_cumulative_;
};

}  // namespace dynns
