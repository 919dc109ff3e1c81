#pragma once

// Dynamic nested sampling: an iterative thread-adding loop driven by point
// importances, and a single-pass variant that fixes the live-point profile
// from the initial run alone.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynns/importance.hpp"
#include "dynns/run.hpp"
#include "dynns/sampler.hpp"
#include "dynns/savitzky_golay.hpp"

namespace dynns {

struct AlgorithmOneConfig {
  int n_init = 50;
  double fraction = 0.9;
  int n_batch = 1;
  std::int64_t sample_budget = 0;

  void validate() const {
    if (n_init < 1) throw std::invalid_argument("AlgorithmOneConfig: n_init must be >= 1");
    if (!(fraction > 0.0 && fraction <= 1.0))
      throw std::invalid_argument("AlgorithmOneConfig: fraction must lie in (0, 1]");
    if (n_batch < 1) throw std::invalid_argument("AlgorithmOneConfig: n_batch must be >= 1");
    if (sample_budget < 1) throw std::invalid_argument("AlgorithmOneConfig: sample budget must be positive");
  }
};

struct AlgorithmTwoConfig {
  int n_init = 100;
  std::int64_t total_budget = 0;
  int smooth_window = 0;  // 0 selects 2 * n_init + 1
  int smooth_order = 3;

  int window() const { return smooth_window > 0 ? smooth_window : 2 * n_init + 1; }

  void validate() const {
    if (n_init < 1) throw std::invalid_argument("AlgorithmTwoConfig: n_init must be >= 1");
    if (total_budget < 1) throw std::invalid_argument("AlgorithmTwoConfig: total budget must be positive");
    const int w = window();
    if (w % 2 == 0 || w <= smooth_order || smooth_order < 0)
      throw std::invalid_argument("AlgorithmTwoConfig: window must be odd and exceed the order");
  }
};

/// Likelihood range selected for new threads: the first and last points with
/// importance above fraction * max.
struct ThreadRange {
  std::size_t first = 0;
  std::size_t last = 0;
};

inline ThreadRange select_thread_range(const std::vector<double>& importance, double fraction) {
  if (importance.empty()) throw std::invalid_argument("select_thread_range: empty importance");
  const double top = *std::max_element(importance.begin(), importance.end());
  const double cut = fraction * top;
  ThreadRange r{importance.size(), 0};
  for (std::size_t i = 0; i < importance.size(); ++i) {
    if (importance[i] > cut || (fraction == 1.0 && importance[i] == top)) {
      r.first = std::min(r.first, i);
      r.last = i;
    }
  }
  return r;
}

namespace detail {

// Sorted point list of a growing dynamic run. Live-point counts follow from
// per-point birth tallies: n_0 = prior births, n_{i+1} = n_i - 1 + b_i.
class DynamicWorkspace {
 public:
  struct Entry {
    double log_l;
    double target;  // value used by tuned importance
    std::int32_t index;  // into the point pool
    std::int32_t births;  // threads born on this contour
  };

  DynamicWorkspace(const NestedRun& initial, const GoalConfig& goal) : goal_(goal) {
    if (!initial.open_threads().empty())
      throw std::invalid_argument("dynamic run: the initial run must keep its final live points");
    pool_ = initial.points();
    entries_.reserve(pool_.size() * 4);
    for (std::size_t i = 0; i < pool_.size(); ++i)
      entries_.push_back({pool_[i].log_l, target_of(pool_[i]), static_cast<std::int32_t>(i), 0});
    for (const auto& p : pool_) add_birth(p.birth_log_l, 1);
    std::int64_t max_id = -1;
    for (const auto& p : pool_) max_id = std::max(max_id, p.thread_id);
    next_thread_ = max_id + 1;
  }

  std::size_t size() const { return entries_.size(); }
  std::int64_t next_thread_id() const { return next_thread_; }
  const std::vector<SamplePoint>& pool() const { return pool_; }
  const std::vector<Entry>& entries() const { return entries_; }

  const std::vector<int>& counts() {
    counts_.resize(entries_.size());
    int n = prior_births_;
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      counts_[i] = n;
      n += entries_[i].births - 1;
    }
    return counts_;
  }

  /// ln(L_i w_i) from the current counts; also refreshes counts().
  const std::vector<double>& log_masses() {
    const std::size_t n = entries_.size();
    counts_.resize(n);
    log_mass_.resize(n);
    top_ = kNegInf;
    // No count can exceed the number of threads.
    grow(static_cast<int>(n) + prior_births_);
    const double* inv = inv_.data();
    const double* same = same_.data();
    const double* down = down_.data();
    double log_x_prev = 0.0;
    int ni = prior_births_;
    for (std::size_t i = 0; i < n; ++i) {
      const int next = ni + entries_[i].births - 1;
      counts_[i] = ni;
      double lw = log_x_prev - std::numbers::ln2;
      if (i + 1 < n) {
        if (next == ni) {
          lw += same[ni];
        } else if (next == ni - 1) {
          lw += down[ni];
        } else {
          lw += log1m_exp(-(inv[ni] + inv[next]));
        }
      }
      const double lm = entries_[i].log_l + lw;
      log_mass_[i] = lm;
      top_ = std::max(top_, lm);
      log_x_prev -= inv[ni];
      ni = next;
    }
    return log_mass_;
  }

  /// Normalised combined importance, as a value per point.
  std::vector<double> importance() {
    const auto& lm = log_masses();
    std::vector<double> targets;
    if (goal_.variant == ImportanceVariant::Tuned) {
      targets.resize(entries_.size());
      for (std::size_t i = 0; i < entries_.size(); ++i) targets[i] = entries_[i].target;
    }
    return combined_importance(lm, counts_, targets, goal_).combined;
  }

  /// Same selection as select_thread_range(importance()), computed in reused
  /// buffers. Masses more than e^-60 below the largest are treated as zero.
  ThreadRange select(double fraction) {
    if (goal_.variant == ImportanceVariant::Tuned) return select_thread_range(importance(), fraction);
    const auto& lm = log_masses();
    const std::size_t n = lm.size();
    if (goal_.goal == 1.0) {
      // The parameter importance is monotone in ln(L w).
      const double cut = top_ + std::log(fraction);
      ThreadRange r{n, 0};
      for (std::size_t i = 0; i < n; ++i) {
        if (lm[i] > cut || (fraction == 1.0 && lm[i] == top_)) {
          r.first = std::min(r.first, i);
          r.last = i;
        }
      }
      return r;
    }
    mass_.resize(n);
    tail_.resize(n + 1);
    tail_[n] = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double rel = lm[i] - top_;
      mass_[i] = rel > -60.0 ? std::exp(rel) : 0.0;
    }
    for (std::size_t i = n; i-- > 0;) tail_[i] = tail_[i + 1] + mass_[i];
    const bool exact = goal_.variant == ImportanceVariant::Exact;
    double sum_z = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = counts_[i];
      double v;
      if (exact) {
        const double np2 = (c + 2.0) * std::sqrt(c + 2.0);
        v = (c + 1.0) / (std::sqrt(c) * np2) * tail_[i + 1] + std::sqrt(c) / np2 * mass_[i];
      } else {
        v = tail_[i] / c;
      }
      tail_[i] = v;  // reuse as the evidence importance
      sum_z += v;
    }
    const double sum_m = std::accumulate(mass_.begin(), mass_.end(), 0.0);
    const double wz = (1.0 - goal_.goal) / sum_z;
    const double wm = goal_.goal / sum_m;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      mass_[i] = wz * tail_[i] + wm * mass_[i];
      best = std::max(best, mass_[i]);
    }
    const double cut = fraction * best;
    ThreadRange r{n, 0};
    for (std::size_t i = 0; i < n; ++i) {
      if (mass_[i] > cut || (fraction == 1.0 && mass_[i] == best)) {
        r.first = std::min(r.first, i);
        r.last = i;
      }
    }
    return r;
  }

  double contour_log_l(std::size_t pos) const { return entries_[pos].log_l; }
  double contour_log_x(std::size_t pos) const { return pool_[entries_[pos].index].true_log_x; }

  /// Adds threads that all start on the contour of point `start_pos`
  /// (or the whole prior when start_pos is npos).
  void add_threads(std::vector<Thread> threads, std::size_t start_pos) {
    std::vector<Entry> fresh;
    for (auto& t : threads) {
      if (start_pos == npos) {
        ++prior_births_;
      } else {
        ++entries_[start_pos].births;
      }
      for (std::size_t k = 0; k < t.points.size(); ++k) {
        const auto& p = t.points[k];
        const auto idx = static_cast<std::int32_t>(pool_.size());
        pool_.push_back(p);
        fresh.push_back({p.log_l, target_of(p), idx, k + 1 < t.points.size() ? 1 : 0});
      }
      next_thread_ = std::max(next_thread_, t.thread_id + 1);
    }
    auto less = [this](const Entry& a, const Entry& b) {
      if (a.log_l != b.log_l) return a.log_l < b.log_l;
      return pool_[a.index].thread_id < pool_[b.index].thread_id;
    };
    std::sort(fresh.begin(), fresh.end(), less);
    merged_.clear();
    merged_.reserve(entries_.size() + fresh.size());
    std::merge(entries_.begin(), entries_.end(), fresh.begin(), fresh.end(), std::back_inserter(merged_), less);
    entries_.swap(merged_);
  }

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  double target_of(const SamplePoint& p) const {
    return goal_.tuned_target == TunedTarget::Theta1 ? p.theta1 : p.radius;
  }

  void add_birth(double birth, int count) {
    if (birth == kNegInf) {
      prior_births_ += count;
      return;
    }
    // The last point on this contour, so the new thread counts strictly above it.
    auto it = std::upper_bound(entries_.begin(), entries_.end(), birth,
                               [](double v, const Entry& e) { return v < e.log_l; });
    if (it == entries_.begin() || std::prev(it)->log_l != birth)
      throw std::invalid_argument("dynamic run: a birth contour matches no point");
    std::prev(it)->births += count;
  }

  void grow(int n) {
    if (n < static_cast<int>(inv_.size())) return;
    const int old = static_cast<int>(inv_.size());
    const int size = std::max(n + 1, 2 * old);
    inv_.resize(size);
    same_.resize(size);
    down_.resize(size);
    for (int k = old; k < size; ++k) {
      inv_[k] = k > 0 ? 1.0 / k : 0.0;
      same_[k] = k > 0 ? log1m_exp(-2.0 / k) : 0.0;
      down_[k] = k > 1 ? log1m_exp(-(1.0 / k + 1.0 / (k - 1))) : 0.0;
    }
  }

  GoalConfig goal_;
  std::vector<SamplePoint> pool_;
  std::vector<Entry> entries_;
  std::vector<Entry> merged_;
  std::vector<int> counts_;
  std::vector<double> log_mass_;
  std::vector<double> mass_, tail_;
  double top_ = kNegInf;
  std::vector<double> inv_, same_, down_;
  int prior_births_ = 0;
  std::int64_t next_thread_ = 0;
};

}  // namespace detail

/// Iterative dynamic nested sampling. Starts from a standard run with n_init
/// live points and adds n_batch threads per iteration over the range of high
/// importance until the sample budget is reached; the initial run counts
/// towards the budget and the last batch may overshoot it.
template <class R>
NestedRun dynamic_run_algorithm1(const ModelSpec& m, const GoalConfig& goal, const AlgorithmOneConfig& cfg,
                                 R& rng, Provenance prov = {}) {
  cfg.validate();
  goal.validate();
  SamplerConfig init_cfg;
  init_cfg.n_live = cfg.n_init;
  init_cfg.seed = prov.seed;
  const NestedRun initial = standard_run(m, init_cfg, rng);

  detail::DynamicWorkspace ws(initial, goal);
  auto total = static_cast<std::int64_t>(ws.size());
  while (total < cfg.sample_budget) {
    const ThreadRange r = ws.select(cfg.fraction);
    const bool from_prior = r.first == 0;
    const double start_l = from_prior ? kNegInf : ws.contour_log_l(r.first - 1);
    const double start_x = from_prior ? 0.0 : ws.contour_log_x(r.first - 1);
    const double end_l = r.last + 1 == ws.size() ? ws.contour_log_l(r.last) : ws.contour_log_l(r.last + 1);
    std::vector<Thread> batch;
    batch.reserve(cfg.n_batch);
    for (int b = 0; b < cfg.n_batch; ++b) {
      batch.push_back(sample_thread(m, start_l, start_x, end_l, rng, ws.next_thread_id() + b));
      total += static_cast<std::int64_t>(batch.back().points.size());
    }
    ws.add_threads(std::move(batch), from_prior ? detail::DynamicWorkspace::npos : r.first - 1);
  }

  prov.algorithm = "dyn1";
  prov.n_live = cfg.n_init;
  prov.goal = goal.goal;
  prov.importance = std::string(importance_name(goal.variant));
  prov.budget = cfg.sample_budget;
  prov.n_initial_threads = cfg.n_init;
  return NestedRun(ws.pool(), m, std::move(prov));
}

/// Supplementary live-point targets for the single-pass variant: the
/// smoothed importance of the initial run scaled by K, minus n_init, with K
/// chosen so the expected extra samples match the budget. Each initial step
/// spans an expected 1/n_i in ln X, which costs target/n_i samples.
struct SupplementPlan {
  std::vector<int> targets;
  double scale_k = 0.0;
  double expected_extra = 0.0;
};

inline SupplementPlan plan_supplement(const std::vector<double>& smoothed, const std::vector<int>& counts,
                                      int n_init, double extra_samples) {
  SupplementPlan plan;
  plan.targets.assign(smoothed.size(), 0);
  if (extra_samples <= 0.0) return plan;
  const double top = *std::max_element(smoothed.begin(), smoothed.end());
  if (!(top > 0.0)) throw std::domain_error("plan_supplement: smoothed importance is not positive");
  auto cost = [&](double k) {
    double c = 0.0;
    for (std::size_t i = 0; i < smoothed.size(); ++i) {
      const double s = k * smoothed[i] - n_init;
      if (s > 0.0) c += s / counts[i];
    }
    return c;
  };
  double lo = n_init / top;  // cost(lo) == 0
  double hi = 2.0 * lo;
  while (cost(hi) < extra_samples) hi *= 2.0;
  for (int it = 0; it < 200 && hi - lo > 1e-12 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (cost(mid) < extra_samples ? lo : hi) = mid;
  }
  plan.scale_k = 0.5 * (lo + hi);
  plan.expected_extra = cost(plan.scale_k);
  for (std::size_t i = 0; i < smoothed.size(); ++i) {
    const double s = plan.scale_k * smoothed[i] - n_init;
    plan.targets[i] = s > 0.0 ? static_cast<int>(std::lround(s)) : 0;
  }
  return plan;
}

/// Realises supplementary live-point targets alongside an initial run.
/// Threads are spawned on initial contours where the target rises and are
/// not replaced on death while the supplement is above target.
template <class R>
NestedRun realise_supplement(const NestedRun& initial, const std::vector<int>& targets, R& rng,
                             std::int64_t first_thread_id) {
  const ModelSpec& m = initial.model();
  detail::LiveHeap heap;
  std::vector<SamplePoint> out;
  std::int64_t next_id = first_thread_id;
  const std::size_t n = initial.size();
  const double peak = peak_log_likelihood(m);
  for (std::size_t i = 0; i < n; ++i) {
    const auto target = static_cast<std::size_t>(targets[i]);
    // No thread can start on a contour that has rounded onto the peak.
    while (heap.size() < target && (i == 0 || initial[i - 1].log_l < peak)) {
      const double start_l = i == 0 ? kNegInf : initial[i - 1].log_l;
      const double start_x = i == 0 ? 0.0 : initial[i - 1].true_log_x;
      SamplePoint p = detail::draw_strictly_above(m, start_l, start_x, rng);
      p.thread_id = next_id++;
      heap.push({p});
    }
    while (!heap.empty() && heap.top().point.log_l < initial[i].log_l) {
      const SamplePoint dead = heap.top().point;
      heap.pop();
      out.push_back(dead);
      if (heap.size() < target) {
        SamplePoint q = detail::draw_strictly_above(m, dead.log_l, dead.true_log_x, rng);
        q.thread_id = dead.thread_id;
        heap.push({q});
      }
    }
  }
  while (!heap.empty()) {
    out.push_back(heap.top().point);
    heap.pop();
  }
  return NestedRun(std::move(out), m);
}

/// Single-pass dynamic nested sampling: importances come from the initial
/// run only and the whole supplement is generated in one sweep.
template <class R>
NestedRun dynamic_run_algorithm2(const ModelSpec& m, const GoalConfig& goal, const AlgorithmTwoConfig& cfg,
                                 R& rng, Provenance prov = {}) {
  cfg.validate();
  goal.validate();
  SamplerConfig init_cfg;
  init_cfg.n_live = cfg.n_init;
  init_cfg.seed = prov.seed;
  const NestedRun initial = standard_run(m, init_cfg, rng);
  const auto n_init_samples = static_cast<std::int64_t>(initial.size());
  if (cfg.total_budget < n_init_samples)
    throw std::domain_error("dynamic_run_algorithm2: budget " + std::to_string(cfg.total_budget) +
                            " is below the initial run's " + std::to_string(n_init_samples) + " samples");

  prov.algorithm = "dyn2";
  prov.n_live = cfg.n_init;
  prov.goal = goal.goal;
  prov.importance = std::string(importance_name(goal.variant));
  prov.budget = cfg.total_budget;
  prov.n_initial_threads = cfg.n_init;
  if (cfg.total_budget == n_init_samples) return initial.with_provenance(prov);

  const auto counts = live_point_counts(initial);
  const auto imp = combined_importance(initial, goal).combined;
  const auto smoothed = savitzky_golay_smooth(imp, cfg.window(), cfg.smooth_order);
  const auto plan =
      plan_supplement(smoothed, counts, cfg.n_init, static_cast<double>(cfg.total_budget - n_init_samples));
  const NestedRun supplement = realise_supplement(initial, plan.targets, rng, cfg.n_init);
  return combine_runs({initial, supplement}, prov);
}

}  // namespace dynns
