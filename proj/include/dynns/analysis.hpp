#pragma once

// Estimators on weighted nested sampling samples, thread bootstrap error
// estimates and efficiency-gain statistics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dynns/model.hpp"
#include "dynns/run.hpp"
#include "dynns/sampler.hpp"
#include "dynns/specialfn.hpp"

namespace dynns {

enum class EstimatorKind {
  LogZ,
  MeanTheta1,
  MedianTheta1,
  CredibleTheta1,
  SecondMomentTheta1,
  MeanRadius,
  MedianRadius,
};

struct EstimatorId {
  EstimatorKind kind = EstimatorKind::LogZ;
  double q = 0.5;  // CredibleTheta1 only

  std::string name() const {
    switch (kind) {
      case EstimatorKind::LogZ: return "log_z";
      case EstimatorKind::MeanTheta1: return "mean_theta1";
      case EstimatorKind::MedianTheta1: return "median_theta1";
      case EstimatorKind::CredibleTheta1: {
        std::string s = std::to_string(q);
        s.erase(s.find_last_not_of('0') + 1);
        return "ci_theta1:" + s;
      }
      case EstimatorKind::SecondMomentTheta1: return "second_moment_theta1";
      case EstimatorKind::MeanRadius: return "mean_radius";
      case EstimatorKind::MedianRadius: return "median_radius";
    }
    return "unknown";
  }

  static EstimatorId parse(std::string_view s) {
    if (s == "log_z") return {EstimatorKind::LogZ};
    if (s == "mean_theta1") return {EstimatorKind::MeanTheta1};
    if (s == "median_theta1") return {EstimatorKind::MedianTheta1};
    if (s == "second_moment_theta1") return {EstimatorKind::SecondMomentTheta1};
    if (s == "mean_radius") return {EstimatorKind::MeanRadius};
    if (s == "median_radius") return {EstimatorKind::MedianRadius};
    constexpr std::string_view kCi = "ci_theta1:";
    if (s.substr(0, kCi.size()) == kCi) {
      const std::string rest(s.substr(kCi.size()));
      std::size_t used = 0;
      double q = std::numeric_limits<double>::quiet_NaN();
      try {
        q = std::stod(rest, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != rest.size() || !(q > 0.0 && q < 1.0))
        throw std::invalid_argument("credible interval level must lie in (0, 1): " + std::string(s));
      return {EstimatorKind::CredibleTheta1, q};
    }
    throw std::invalid_argument("unknown estimator: " + std::string(s));
  }

  friend bool operator==(const EstimatorId& a, const EstimatorId& b) {
    return a.kind == b.kind && (a.kind != EstimatorKind::CredibleTheta1 || a.q == b.q);
  }
};

/// Log evidence and six posterior summaries of theta1 and the radius.
inline std::vector<EstimatorId> default_estimators() {
  return {{EstimatorKind::LogZ},         {EstimatorKind::MeanTheta1},
          {EstimatorKind::MedianTheta1}, {EstimatorKind::CredibleTheta1, 0.84},
          {EstimatorKind::SecondMomentTheta1}, {EstimatorKind::MeanRadius},
          {EstimatorKind::MedianRadius}};
}

/// Quantile of weighted values. Each value sits at the midpoint of its
/// cumulative-weight interval; between midpoints the quantile is linear and
/// outside them it is clamped. Equal weights give the ordinary midpoint
/// sample quantile. Ties keep their input order.
inline double weighted_quantile(const std::vector<double>& values, const std::vector<double>& weights, double q) {
  if (values.empty() || values.size() != weights.size())
    throw std::invalid_argument("weighted_quantile: need matching non-empty inputs");
  if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("weighted_quantile: q must lie in [0, 1]");
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw std::invalid_argument("weighted_quantile: weights sum to zero");
  double cum = 0.0;
  double prev_pos = 0.0;
  double prev_val = 0.0;
  bool have_prev = false;
  for (std::size_t idx : order) {
    const double w = weights[idx] / total;
    if (w <= 0.0) continue;
    const double pos = cum + 0.5 * w;
    cum += w;
    const double v = values[idx];
    if (q <= pos) {
      if (!have_prev) return v;
      const double t = (q - prev_pos) / (pos - prev_pos);
      return prev_val + t * (v - prev_val);
    }
    prev_pos = pos;
    prev_val = v;
    have_prev = true;
  }
  return prev_val;
}

/// H = exp(-sum p log p), the effective number of samples.
inline double information_content(const std::vector<double>& p) {
  if (p.empty()) throw std::invalid_argument("information_content: empty weights");
  double h = 0.0;
  for (double x : p)
    if (x > 0.0) h -= x * std::log(x);
  return std::exp(h);
}

inline double information_content(const NestedRun& run) {
  if (run.empty()) throw std::invalid_argument("information_content: empty run");
  return information_content(posterior_weights(run));
}

/// Per-point inputs every estimator needs, in run order.
struct WeightedSamples {
  std::vector<double> log_l;
  std::vector<double> theta1;
  std::vector<double> radius;
  std::vector<int> counts;
};

inline WeightedSamples weighted_samples(const NestedRun& run) {
  WeightedSamples s;
  s.counts = live_point_counts(run);
  s.log_l.reserve(run.size());
  s.theta1.reserve(run.size());
  s.radius.reserve(run.size());
  for (const auto& p : run.points()) {
    s.log_l.push_back(p.log_l);
    s.theta1.push_back(p.theta1);
    s.radius.push_back(p.radius);
  }
  return s;
}

/// Evaluates several estimators, sharing the weight computation.
inline std::vector<double> estimate_all(const WeightedSamples& s, const std::vector<EstimatorId>& ids) {
  if (s.log_l.empty()) throw std::invalid_argument("estimate: empty run");
  auto lm = point_log_weights(s.counts);
  for (std::size_t i = 0; i < lm.size(); ++i) lm[i] += s.log_l[i];
  const double log_z = log_sum_exp(lm);
  if (!std::isfinite(log_z)) throw std::domain_error("estimate: all weights vanish");
  std::vector<double> p(lm.size());
  double total = 0.0;
  for (std::size_t i = 0; i < lm.size(); ++i) total += (p[i] = std::exp(lm[i] - log_z));
  for (double& x : p) x /= total;

  std::vector<double> out;
  out.reserve(ids.size());
  for (const auto& id : ids) {
    switch (id.kind) {
      case EstimatorKind::LogZ: out.push_back(log_z); break;
      case EstimatorKind::MeanTheta1:
        out.push_back(std::inner_product(p.begin(), p.end(), s.theta1.begin(), 0.0));
        break;
      case EstimatorKind::MedianTheta1: out.push_back(weighted_quantile(s.theta1, p, 0.5)); break;
      case EstimatorKind::CredibleTheta1: out.push_back(weighted_quantile(s.theta1, p, id.q)); break;
      case EstimatorKind::SecondMomentTheta1: {
        double acc = 0.0;
        for (std::size_t i = 0; i < p.size(); ++i) acc += p[i] * s.theta1[i] * s.theta1[i];
        out.push_back(acc);
        break;
      }
      case EstimatorKind::MeanRadius:
        out.push_back(std::inner_product(p.begin(), p.end(), s.radius.begin(), 0.0));
        break;
      case EstimatorKind::MedianRadius: out.push_back(weighted_quantile(s.radius, p, 0.5)); break;
    }
  }
  return out;
}

inline std::vector<double> estimate_all(const NestedRun& run, const std::vector<EstimatorId>& ids) {
  if (run.empty()) throw std::invalid_argument("estimate: empty run");
  return estimate_all(weighted_samples(run), ids);
}

inline double estimate(const NestedRun& run, const EstimatorId& id) { return estimate_all(run, {id}).front(); }

/// ln Z = log-sum-exp of ln(L_i w_i).
inline double log_evidence_estimate(const NestedRun& run) {
  if (run.empty()) throw std::invalid_argument("log_evidence_estimate: empty run");
  return log_sum_exp(log_posterior_masses(run));
}

namespace detail {

// Draws thread multiplicities: all threads as one class, or initial and
// added threads as two classes each keeping its size.
template <class R>
std::vector<int> bootstrap_multiplicities(const std::vector<std::int64_t>& thread_ids, R& rng, bool separate_initial,
                                          int n_initial) {
  const std::size_t k = thread_ids.size();
  std::vector<int> mult(k, 0);
  if (k == 0) return mult;
  if (!separate_initial) {
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    for (std::size_t i = 0; i < k; ++i) ++mult[pick(rng)];
    return mult;
  }
  // thread_ids is sorted, so the initial class is a prefix.
  const auto split = static_cast<std::size_t>(
      std::lower_bound(thread_ids.begin(), thread_ids.end(), static_cast<std::int64_t>(n_initial)) -
      thread_ids.begin());
  if (split > 0) {
    std::uniform_int_distribution<std::size_t> pick(0, split - 1);
    for (std::size_t i = 0; i < split; ++i) ++mult[pick(rng)];
  }
  if (split < k) {
    std::uniform_int_distribution<std::size_t> pick(split, k - 1);
    for (std::size_t i = split; i < k; ++i) ++mult[pick(rng)];
  }
  return mult;
}

inline void require_initial_threads(const NestedRun& run) {
  if (run.provenance().n_initial_threads < 1)
    throw std::invalid_argument("bootstrap: separate_initial needs the initial thread count in the provenance");
}

}  // namespace detail

/// Resamples threads with replacement and recombines them. With
/// separate_initial, threads of the initial run (ids below
/// provenance.n_initial_threads) are resampled as their own class.
template <class R>
NestedRun bootstrap_resample(const NestedRun& run, R& rng, bool separate_initial) {
  if (separate_initial) detail::require_initial_threads(run);
  const auto threads = split_into_threads(run);
  std::vector<std::int64_t> ids;
  ids.reserve(threads.size());
  for (const auto& t : threads) ids.push_back(t.thread_id);
  const auto mult = detail::bootstrap_multiplicities(ids, rng, separate_initial, run.provenance().n_initial_threads);
  std::vector<Thread> picked;
  for (std::size_t t = 0; t < threads.size(); ++t)
    for (int c = 0; c < mult[t]; ++c) picked.push_back(threads[t]);
  return run_from_threads(picked, run.model(), run.provenance());
}

/// Repeated bootstrap estimates without materialising resampled runs.
/// Copies of a point are emitted consecutively, each with its own live-point
/// count, which is exactly the layout of the recombined run.
class ThreadBootstrap {
 public:
  ThreadBootstrap(const NestedRun& run, bool separate_initial) : run_(&run), separate_(separate_initial) {
    if (run.empty()) throw std::invalid_argument("bootstrap: empty run");
    if (separate_initial) detail::require_initial_threads(run);
    for (const auto& p : run.points()) ids_.push_back(p.thread_id);
    for (const auto& o : run.open_threads()) ids_.push_back(o.thread_id);
    std::sort(ids_.begin(), ids_.end());
    ids_.erase(std::unique(ids_.begin(), ids_.end()), ids_.end());
    auto dense = [&](std::int64_t id) {
      return static_cast<int>(std::lower_bound(ids_.begin(), ids_.end(), id) - ids_.begin());
    };
    for (const auto& p : run.points()) {
      point_thread_.push_back(dense(p.thread_id));
      births_.push_back({p.birth_log_l, dense(p.thread_id)});
    }
    for (const auto& o : run.open_threads()) births_.push_back({o.birth_log_l, dense(o.thread_id)});
    std::sort(births_.begin(), births_.end(),
              [](const Birth& a, const Birth& b) { return a.log_l < b.log_l; });
  }

  std::size_t thread_count() const { return ids_.size(); }

  template <class R>
  std::vector<double> replicate(const std::vector<EstimatorId>& ids, R& rng) {
    const auto mult =
        detail::bootstrap_multiplicities(ids_, rng, separate_, run_->provenance().n_initial_threads);
    WeightedSamples s;
    const auto& pts = run_->points();
    std::size_t b = 0;
    std::int64_t births_below = 0;
    std::int64_t position = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const int m = mult[point_thread_[i]];
      if (m == 0) continue;
      while (b < births_.size() && births_[b].log_l < pts[i].log_l) births_below += mult[births_[b++].thread];
      for (int c = 0; c < m; ++c) {
        s.log_l.push_back(pts[i].log_l);
        s.theta1.push_back(pts[i].theta1);
        s.radius.push_back(pts[i].radius);
        s.counts.push_back(static_cast<int>(births_below - position));
        ++position;
      }
    }
    return estimate_all(s, ids);
  }

 private:
  struct Birth {
    double log_l;
    int thread;
  };
  const NestedRun* run_;
  bool separate_;
  std::vector<std::int64_t> ids_;
  std::vector<int> point_thread_;
  std::vector<Birth> births_;
};

inline double sample_mean(const std::vector<double>& v) {
  if (v.empty()) throw std::invalid_argument("sample_mean: empty input");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

/// Unbiased (n - 1) sample variance.
inline double sample_variance(const std::vector<double>& v) {
  if (v.size() < 2) throw std::invalid_argument("sample_variance: need at least two values");
  const double m = sample_mean(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return acc / static_cast<double>(v.size() - 1);
}

inline double sample_std(const std::vector<double>& v) { return std::sqrt(sample_variance(v)); }

/// Ordinary midpoint quantile of unweighted values.
inline double empirical_quantile(const std::vector<double>& v, double q) {
  return weighted_quantile(v, std::vector<double>(v.size(), 1.0), q);
}

struct BootstrapError {
  double std = 0.0;
  double credible_upper = 0.0;  // q-quantile of the replications
};

inline BootstrapError summarise_replications(const std::vector<double>& reps, double q) {
  return {sample_std(reps), empirical_quantile(reps, q)};
}

/// Per-estimator bootstrap replications: result[e][r].
template <class R>
std::vector<std::vector<double>> bootstrap_replications(const NestedRun& run, const std::vector<EstimatorId>& ids,
                                                        int n_reps, R& rng, bool separate_initial) {
  if (n_reps < 2) throw std::invalid_argument("bootstrap: need at least two replications");
  ThreadBootstrap boot(run, separate_initial);
  std::vector<std::vector<double>> out(ids.size(), std::vector<double>(n_reps));
  for (int r = 0; r < n_reps; ++r) {
    const auto est = boot.replicate(ids, rng);
    for (std::size_t e = 0; e < ids.size(); ++e) out[e][r] = est[e];
  }
  return out;
}

template <class R>
BootstrapError bootstrap_error(const NestedRun& run, const EstimatorId& id, int n_reps, R& rng,
                               bool separate_initial = false, double q = 0.95) {
  return summarise_replications(bootstrap_replications(run, {id}, n_reps, rng, separate_initial).front(), q);
}

/// Standard deviation together with its jackknife standard error.
struct StdWithError {
  double std = 0.0;
  double error = 0.0;
};

inline StdWithError jackknife_std(const std::vector<double>& v) {
  const std::size_t n = v.size();
  if (n < 3) throw std::invalid_argument("jackknife_std: need at least three values");
  const double s1 = std::accumulate(v.begin(), v.end(), 0.0);
  double s2 = 0.0;
  for (double x : v) s2 += x * x;
  const double full = sample_std(v);
  std::vector<double> loo(n);
  const double m = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = s1 - v[i];
    const double b = s2 - v[i] * v[i];
    loo[i] = std::sqrt(std::max(0.0, (b - a * a / m) / (m - 1.0)));
  }
  const double mean_loo = sample_mean(loo);
  double acc = 0.0;
  for (double x : loo) acc += (x - mean_loo) * (x - mean_loo);
  return {full, std::sqrt(acc * (m / static_cast<double>(n)))};
}

struct Gain {
  double gain = 0.0;
  double sigma = 0.0;
};

/// (Var_std / Var_dyn) * (mean samples std / mean samples dyn), with a
/// 1-sigma uncertainty from resampling each arm's results.
inline Gain efficiency_gain(const std::vector<double>& std_results, const std::vector<double>& dyn_results,
                            double mean_samples_std, double mean_samples_dyn, std::uint64_t seed = 0,
                            int n_boot = 1000) {
  if (std_results.size() < 2 || dyn_results.size() < 2)
    throw std::invalid_argument("efficiency_gain: need at least two results per arm");
  if (!(mean_samples_std > 0.0 && mean_samples_dyn > 0.0))
    throw std::invalid_argument("efficiency_gain: mean sample counts must be positive");
  const double var_dyn = sample_variance(dyn_results);
  if (!(var_dyn > 0.0)) throw std::domain_error("efficiency_gain: dynamic results have zero variance");
  const double ratio = mean_samples_std / mean_samples_dyn;
  Gain g;
  g.gain = sample_variance(std_results) / var_dyn * ratio;
  Rng rng = make_rng(seed, 0x9a17);
  std::vector<double> gains;
  gains.reserve(n_boot);
  std::vector<double> a(std_results.size()), b(dyn_results.size());
  std::uniform_int_distribution<std::size_t> pa(0, a.size() - 1), pb(0, b.size() - 1);
  for (int r = 0; r < n_boot; ++r) {
    for (auto& x : a) x = std_results[pa(rng)];
    for (auto& x : b) x = dyn_results[pb(rng)];
    const double vb = sample_variance(b);
    if (vb > 0.0) gains.push_back(sample_variance(a) / vb * ratio);
  }
  g.sigma = gains.size() >= 2 ? sample_std(gains) : 0.0;
  return g;
}

inline double root_mean_square_error(const std::vector<double>& v, double truth) {
  if (v.empty()) throw std::invalid_argument("rmse: empty input");
  double acc = 0.0;
  for (double x : v) acc += (x - truth) * (x - truth);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

/// Standard normal quantile.
inline double normal_quantile(double q) {
  detail::require_domain(q > 0.0 && q < 1.0, "normal_quantile: q must lie in (0, 1)");
  if (q == 0.5) return 0.0;
  // P(1/2, z^2 / 2) = erf(z / sqrt 2) = 2 Phi(z) - 1 for z > 0.
  const double z = std::sqrt(2.0 * inv_reg_lower_inc_gamma(0.5, std::fabs(2.0 * q - 1.0)));
  return q > 0.5 ? z : -z;
}

/// Exact posterior value of an estimator, or NaN when no closed form or
/// quadrature is provided.
inline double true_value(const ModelSpec& m, const EstimatorId& id) {
  m.validate();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double d = m.dim;
  if (m.family == Family::Gaussian) {
    // The posterior is an isotropic normal with variance s^2.
    const double s2 = m.prior_sigma * m.prior_sigma / (1.0 + m.prior_sigma * m.prior_sigma);
    const double s = std::sqrt(s2);
    switch (id.kind) {
      case EstimatorKind::LogZ: return analytic_log_evidence(m);
      case EstimatorKind::MeanTheta1:
      case EstimatorKind::MedianTheta1: return 0.0;
      case EstimatorKind::CredibleTheta1: return s * normal_quantile(id.q);
      case EstimatorKind::SecondMomentTheta1: return s2;
      case EstimatorKind::MeanRadius:
        return s * std::sqrt(2.0) * std::exp(log_gamma(0.5 * (d + 1.0)) - log_gamma(0.5 * d));
      case EstimatorKind::MedianRadius: return s * std::sqrt(2.0 * inv_reg_lower_inc_gamma(0.5 * d, 0.5));
    }
    return nan;
  }
  switch (id.kind) {
    case EstimatorKind::LogZ: return analytic_log_evidence(m);
    case EstimatorKind::MeanTheta1:
    case EstimatorKind::MedianTheta1: return 0.0;
    case EstimatorKind::CredibleTheta1: return nan;
    default: break;
  }
  const PosteriorMassTable table(m);
  switch (id.kind) {
    case EstimatorKind::SecondMomentTheta1:
      return table.expectation_of_radius([](double r) { return r * r; }) / d;
    case EstimatorKind::MeanRadius: return table.expectation_of_radius([](double r) { return r; });
    case EstimatorKind::MedianRadius: return table.radius_quantile(0.5);
    default: return nan;
  }
}

}  // namespace dynns
