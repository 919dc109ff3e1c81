#pragma once

// Perfect nested sampling: exact uniform draws from the prior inside any
// likelihood contour, so every shrinkage is an independent uniform.

#include <cmath>
#include <cstdint>
#include <queue>
#include <random>
#include <stdexcept>
#include <vector>

#include "dynns/model.hpp"
#include "dynns/run.hpp"
#include "dynns/specialfn.hpp"

namespace dynns {

using Rng = std::mt19937_64;

/// Independent stream for (seed, stream index).
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x6a09e667u};
  return Rng(seq);
}

struct SamplerConfig {
  int n_live = 500;
  double termination_fraction = 1e-3;
  bool keep_final_live = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (n_live < 1) throw std::invalid_argument("SamplerConfig: n_live must be >= 1");
    if (!(termination_fraction > 0.0 && termination_fraction < 1.0))
      throw std::invalid_argument("SamplerConfig: termination_fraction must lie in (0, 1)");
  }
};

/// Uniform prior draw inside the contour whose enclosed mass is exp(log_x_upper).
template <class R>
SamplePoint draw_point_above(const ModelSpec& m, double log_x_upper, R& rng) {
  detail::require_domain(!std::isnan(log_x_upper) && log_x_upper <= 0.0,
                         "draw_point_above: log X must be <= 0");
  SamplePoint p;
  p.true_log_x = log_x_upper + std::log(open_unit_uniform(rng));
  p.radius = radius_from_log_x(m, p.true_log_x);
  p.log_l = log_likelihood_at_radius(m, p.radius);
  p.theta1 = p.radius * sample_beta_first_coordinate(m.dim, rng);
  return p;
}

namespace detail {

// Draws strictly above the contour (start_log_l, start_log_x). Rounding can
// map a volume just inside the contour to the contour's own likelihood, so
// such draws are repeated.
template <class R>
SamplePoint draw_strictly_above(const ModelSpec& m, double start_log_l, double start_log_x,
                                R& rng) {
  for (int attempt = 0; attempt < 1000; ++attempt) {
    SamplePoint p = draw_point_above(m, start_log_x, rng);
    if (p.log_l > start_log_l) {
      p.birth_log_l = start_log_l;
      return p;
    }
  }
  throw std::runtime_error("draw_strictly_above: contour is numerically degenerate");
}

}  // namespace detail

/// One thread started on the contour (start_log_l, start_log_x). It stops
/// after the first point above end_log_l, which is kept; with
/// end_log_l = +inf it stops after exactly one point.
template <class R>
Thread sample_thread(const ModelSpec& m, double start_log_l, double start_log_x, double end_log_l,
                     R& rng, std::int64_t thread_id) {
  if (!(start_log_l < end_log_l)) throw std::invalid_argument("sample_thread: start must be below end");
  Thread t;
  t.start_log_l = start_log_l;
  t.thread_id = thread_id;
  double log_l = start_log_l;
  double log_x = start_log_x;
  // Nothing lies above the peak, so a thread that rounds onto it is done.
  const double peak = peak_log_likelihood(m);
  for (;;) {
    SamplePoint p = detail::draw_strictly_above(m, log_l, log_x, rng);
    p.thread_id = thread_id;
    log_l = p.log_l;
    log_x = p.true_log_x;
    t.points.push_back(p);
    if (end_log_l == kPosInf || log_l > end_log_l || log_l >= peak) break;
  }
  return t;
}

template <class R>
Thread sample_thread(const ModelSpec& m, double start_log_l, double end_log_l, R& rng,
                     std::int64_t thread_id) {
  return sample_thread(m, start_log_l, log_x_from_log_likelihood(m, start_log_l), end_log_l, rng,
                       thread_id);
}

namespace detail {

struct LivePoint {
  SamplePoint point;
  bool operator>(const LivePoint& o) const { return point_less(o.point, point); }
};

using LiveHeap = std::priority_queue<LivePoint, std::vector<LivePoint>, std::greater<LivePoint>>;

// Running sum of exp(log_l - ref) over the live set.
class LiveLikelihoodSum {
 public:
  void reset(const std::vector<double>& log_ls) {
    ref_ = kNegInf;
    for (double v : log_ls) ref_ = std::max(ref_, v);
    sum_ = 0.0;
    if (ref_ == kNegInf) return;
    for (double v : log_ls) sum_ += std::exp(v - ref_);
  }
  void add(double v) { sum_ += std::exp(v - ref_); }
  void remove(double v) { sum_ = std::max(0.0, sum_ - std::exp(v - ref_)); }
  bool needs_rebase(double v) const { return ref_ == kNegInf || v > ref_ + 30.0; }
  double log_sum() const { return sum_ > 0.0 ? ref_ + std::log(sum_) : kNegInf; }

 private:
  double ref_ = kNegInf;
  double sum_ = 0.0;
};

template <class R>
std::vector<SamplePoint> standard_run_points(const ModelSpec& m, const SamplerConfig& cfg, R& rng,
                                             std::vector<OpenThread>* open) {
  cfg.validate();
  m.validate();
  const int n = cfg.n_live;
  LiveHeap heap;
  std::vector<double> live_log_ls;
  for (int k = 0; k < n; ++k) {
    SamplePoint p = draw_point_above(m, 0.0, rng);
    p.birth_log_l = kNegInf;
    p.thread_id = k;
    heap.push({p});
    live_log_ls.push_back(p.log_l);
  }
  LiveLikelihoodSum live_sum;
  live_sum.reset(live_log_ls);

  std::vector<SamplePoint> dead;
  double log_z_dead = kNegInf;
  double log_x = 0.0;
  const double log_frac = std::log(cfg.termination_fraction);
  const double log_n = std::log(static_cast<double>(n));
  const double log_shell = log1m_exp(-1.0 / n);  // ln(1 - e^{-1/n})
  const double peak = peak_log_likelihood(m);
  for (std::int64_t i = 1;; ++i) {
    LivePoint top = heap.top();
    heap.pop();
    dead.push_back(top.point);
    live_sum.remove(top.point.log_l);
    // Running evidence uses the simple rectangle weight X_{i-1} - X_i.
    log_z_dead = log_add_exp(log_z_dead, top.point.log_l + log_x + log_shell);
    log_x -= 1.0 / n;
    // Every live point has rounded onto the peak; none can replace it.
    if (top.point.log_l >= peak) break;

    SamplePoint q = draw_strictly_above(m, top.point.log_l, top.point.true_log_x, rng);
    q.thread_id = top.point.thread_id;
    heap.push({q});
    // Each thread owns exactly one live point, so thread ids index the set.
    live_log_ls[q.thread_id] = q.log_l;
    if (live_sum.needs_rebase(q.log_l) || i % n == 0) {
      live_sum.reset(live_log_ls);
    } else {
      live_sum.add(q.log_l);
    }

    const double log_z_live = live_sum.log_sum() - log_n + log_x;
    if (log_z_live < log_frac + log_z_dead) break;
  }

  if (cfg.keep_final_live) {
    while (!heap.empty()) {
      dead.push_back(heap.top().point);
      heap.pop();
    }
  } else if (open != nullptr) {
    while (!heap.empty()) {
      const auto& p = heap.top().point;
      open->push_back({p.birth_log_l, p.thread_id});
      heap.pop();
    }
  }
  return dead;
}

}  // namespace detail

/// Standard nested sampling with a constant number of live points. Threads
/// are labelled 0..n-1 and all start from the whole prior.
template <class R>
NestedRun standard_run(const ModelSpec& m, const SamplerConfig& cfg, R& rng, Provenance prov = {}) {
  std::vector<OpenThread> open;
  auto pts = detail::standard_run_points(m, cfg, rng, &open);
  prov.algorithm = "standard";
  prov.n_live = cfg.n_live;
  prov.n_initial_threads = cfg.n_live;
  prov.seed = cfg.seed;
  return NestedRun(std::move(pts), m, std::move(prov), std::move(open));
}

inline NestedRun standard_run(const ModelSpec& m, const SamplerConfig& cfg) {
  Rng rng = make_rng(cfg.seed);
  return standard_run(m, cfg, rng);
}

}  // namespace dynns
