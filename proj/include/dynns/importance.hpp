#pragma once

// Point importances that steer where dynamic nested sampling adds live
// points. All profiles are normalised to sum to one.

#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dynns/run.hpp"

namespace dynns {

enum class ImportanceVariant { Standard, Exact, Tuned };

inline std::string_view importance_name(ImportanceVariant v) {
  switch (v) {
    case ImportanceVariant::Standard: return "standard";
    case ImportanceVariant::Exact: return "exact";
    case ImportanceVariant::Tuned: return "tuned";
  }
  return "unknown";
}

inline ImportanceVariant parse_importance(std::string_view s) {
  if (s == "standard") return ImportanceVariant::Standard;
  if (s == "exact") return ImportanceVariant::Exact;
  if (s == "tuned") return ImportanceVariant::Tuned;
  throw std::invalid_argument("unknown importance variant: " + std::string(s));
}

/// Which per-point value a tuned importance targets.
enum class TunedTarget { Theta1, Radius };

struct GoalConfig {
  double goal = 1.0;
  ImportanceVariant variant = ImportanceVariant::Standard;
  TunedTarget tuned_target = TunedTarget::Theta1;

  void validate() const {
    if (!(goal >= 0.0 && goal <= 1.0)) throw std::invalid_argument("GoalConfig: G must lie in [0, 1]");
  }
};

struct ImportanceProfile {
  std::vector<double> imp_z;
  std::vector<double> imp_param;
  std::vector<double> combined;
};

namespace detail {

inline void normalise_in_place(std::vector<double>& v, const char* what) {
  double s = 0.0;
  for (double x : v) {
    if (!(x >= 0.0)) throw std::domain_error(std::string(what) + ": negative or NaN importance");
    s += x;
  }
  if (!(s > 0.0) || !std::isfinite(s)) throw std::domain_error(std::string(what) + ": importance sums to zero");
  for (double& x : v) x /= s;
}

// exp(lm_i - max) and suffix sums S_i = sum_{k>=i}; both share one scale.
struct ScaledMasses {
  std::vector<double> mass;
  std::vector<double> tail;  // tail[i] = sum_{k>=i} mass[k], tail[N] = 0
};

inline ScaledMasses scaled_masses(const std::vector<double>& log_mass) {
  double m = kNegInf;
  for (double x : log_mass) m = std::max(m, x);
  if (m == kNegInf) throw std::domain_error("importance: all posterior masses vanish");
  ScaledMasses s;
  s.mass.resize(log_mass.size());
  s.tail.assign(log_mass.size() + 1, 0.0);
  for (std::size_t i = 0; i < log_mass.size(); ++i) s.mass[i] = std::exp(log_mass[i] - m);
  for (std::size_t i = log_mass.size(); i-- > 0;) s.tail[i] = s.tail[i + 1] + s.mass[i];
  return s;
}

}  // namespace detail

/// I_Z(i) ∝ Z_{>=i} / n_i.
inline std::vector<double> importance_evidence(const std::vector<double>& log_mass,
                                               const std::vector<int>& counts) {
  if (log_mass.empty()) throw std::invalid_argument("importance_evidence: empty run");
  auto s = detail::scaled_masses(log_mass);
  std::vector<double> out(log_mass.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s.tail[i] / counts[i];
  detail::normalise_in_place(out, "importance_evidence");
  return out;
}

inline std::vector<double> importance_evidence(const NestedRun& run) {
  if (run.empty()) throw std::invalid_argument("importance_evidence: empty run");
  return importance_evidence(log_posterior_masses(run), live_point_counts(run));
}

/// Magnitude of the evidence-error reduction per extra sample at point i,
/// without the large-n approximation.
inline std::vector<double> importance_evidence_exact(const std::vector<double>& log_mass,
                                                     const std::vector<int>& counts) {
  if (log_mass.empty()) throw std::invalid_argument("importance_evidence_exact: empty run");
  auto s = detail::scaled_masses(log_mass);
  std::vector<double> out(log_mass.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double n = counts[i];
    const double np2 = std::pow(n + 2.0, 1.5);
    out[i] = (n + 1.0) / (std::sqrt(n) * np2) * s.tail[i + 1] + std::sqrt(n) / np2 * s.mass[i];
  }
  detail::normalise_in_place(out, "importance_evidence_exact");
  return out;
}

inline std::vector<double> importance_evidence_exact(const NestedRun& run) {
  if (run.empty()) throw std::invalid_argument("importance_evidence_exact: empty run");
  return importance_evidence_exact(log_posterior_masses(run), live_point_counts(run));
}

/// I_param(i) ∝ L_i w_i, i.e. the posterior weights.
inline std::vector<double> importance_param(const std::vector<double>& log_mass) {
  if (log_mass.empty()) throw std::invalid_argument("importance_param: empty run");
  auto s = detail::scaled_masses(log_mass);
  detail::normalise_in_place(s.mass, "importance_param");
  return s.mass;
}

inline std::vector<double> importance_param(const NestedRun& run) {
  if (run.empty()) throw std::invalid_argument("importance_param: empty run");
  return importance_param(log_posterior_masses(run));
}

/// I_param(i) ∝ |f_i - E[f]| L_i w_i. Throws std::domain_error when every
/// point sits exactly at the mean.
inline std::vector<double> importance_tuned(const std::vector<double>& log_mass,
                                            const std::vector<double>& target_values,
                                            double global_mean) {
  if (log_mass.empty()) throw std::invalid_argument("importance_tuned: empty run");
  if (target_values.size() != log_mass.size())
    throw std::invalid_argument("importance_tuned: target values do not match the run");
  auto s = detail::scaled_masses(log_mass);
  for (std::size_t i = 0; i < s.mass.size(); ++i) s.mass[i] *= std::fabs(target_values[i] - global_mean);
  detail::normalise_in_place(s.mass, "importance_tuned");
  return s.mass;
}

inline std::vector<double> tuned_target_values(const NestedRun& run, TunedTarget target) {
  std::vector<double> v(run.size());
  for (std::size_t i = 0; i < v.size(); ++i)
    v[i] = target == TunedTarget::Theta1 ? run[i].theta1 : run[i].radius;
  return v;
}

inline std::vector<double> importance_tuned(const NestedRun& run, const std::vector<double>& target_values,
                                            double global_mean) {
  return importance_tuned(log_posterior_masses(run), target_values, global_mean);
}

/// I(G, i) = (1 - G) I_Z / sum I_Z + G I_param / sum I_param. Tuned
/// importance falls back to the untuned parameter importance when it is
/// identically zero.
inline ImportanceProfile combined_importance(const std::vector<double>& log_mass,
                                             const std::vector<int>& counts,
                                             const std::vector<double>& target_values,
                                             const GoalConfig& goal) {
  goal.validate();
  ImportanceProfile prof;
  prof.imp_z = goal.variant == ImportanceVariant::Exact ? importance_evidence_exact(log_mass, counts)
                                                        : importance_evidence(log_mass, counts);
  prof.imp_param = importance_param(log_mass);
  if (goal.variant == ImportanceVariant::Tuned) {
    double mean = 0.0;
    for (std::size_t i = 0; i < target_values.size(); ++i) mean += prof.imp_param[i] * target_values[i];
    try {
      prof.imp_param = importance_tuned(log_mass, target_values, mean);
    } catch (const std::domain_error&) {
      // keep the untuned profile
    }
  }
  prof.combined.resize(log_mass.size());
  for (std::size_t i = 0; i < log_mass.size(); ++i)
    prof.combined[i] = (1.0 - goal.goal) * prof.imp_z[i] + goal.goal * prof.imp_param[i];
  return prof;
}

inline ImportanceProfile combined_importance(const NestedRun& run, const GoalConfig& goal) {
  if (run.empty()) throw std::invalid_argument("combined_importance: empty run");
  std::vector<double> targets;
  if (goal.variant == ImportanceVariant::Tuned) targets = tuned_target_values(run, goal.tuned_target);
  return combined_importance(log_posterior_masses(run), live_point_counts(run), targets, goal);
}

}  // namespace dynns
