#pragma once

// Nested sampling run data model. Live-point counts are never stored: they
// are derived from birth contours, which makes combining runs and threads a
// plain merge.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dynns/model.hpp"
#include "dynns/specialfn.hpp"

namespace dynns {

struct SamplePoint {
  double log_l = 0.0;
  double birth_log_l = kNegInf;  // -inf: sampled from the whole prior
  double theta1 = 0.0;
  double radius = 0.0;
  double true_log_x = 0.0;  // generator's volume; never used by estimators
  std::int64_t thread_id = 0;

  friend bool operator==(const SamplePoint&, const SamplePoint&) = default;
};

/// A live point that was still alive when the run stopped and was not
/// recorded. It keeps contributing to counts above its birth contour.
struct OpenThread {
  double birth_log_l = kNegInf;
  std::int64_t thread_id = 0;

  friend bool operator==(const OpenThread&, const OpenThread&) = default;
};

struct Provenance {
  std::uint64_t seed = 0;
  std::string algorithm = "standard";
  int n_live = 0;  // n for standard runs, n_init for dynamic runs
  double goal = 0.0;
  std::string importance = "standard";
  std::int64_t budget = 0;
  int n_initial_threads = 0;  // threads [0, n_initial_threads) form the initial run
  std::int64_t run_index = 0;

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// Points of one thread in likelihood order. Each point's birth is the
/// previous point's log-likelihood; the first is born at start_log_l.
struct Thread {
  std::vector<SamplePoint> points;
  double start_log_l = kNegInf;
  std::int64_t thread_id = 0;
  bool open_end = false;  // live point dropped at termination
};

namespace detail {

inline bool point_less(const SamplePoint& a, const SamplePoint& b) {
  if (a.log_l != b.log_l) return a.log_l < b.log_l;
  return a.thread_id < b.thread_id;
}

}  // namespace detail

class NestedRun {
 public:
  NestedRun() = default;

  NestedRun(std::vector<SamplePoint> points, ModelSpec model, Provenance provenance = {},
            std::vector<OpenThread> open_threads = {})
      : points_(std::move(points)),
        open_(std::move(open_threads)),
        model_(model),
        provenance_(std::move(provenance)) {
    std::stable_sort(points_.begin(), points_.end(), detail::point_less);
    std::sort(open_.begin(), open_.end(), [](const OpenThread& a, const OpenThread& b) {
      return a.thread_id < b.thread_id;
    });
    validate();
  }

  const std::vector<SamplePoint>& points() const { return points_; }
  const std::vector<OpenThread>& open_threads() const { return open_; }
  const ModelSpec& model() const { return model_; }
  const Provenance& provenance() const { return provenance_; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const SamplePoint& operator[](std::size_t i) const { return points_[i]; }

  NestedRun with_provenance(Provenance p) const {
    NestedRun r = *this;
    r.provenance_ = std::move(p);
    return r;
  }

 private:
  void validate() const {
    for (const auto& p : points_) {
      if (std::isnan(p.log_l) || !(p.log_l > p.birth_log_l))
        throw std::invalid_argument("NestedRun: every point needs log_l > birth_log_l");
      if (!(p.radius >= 0.0) || std::fabs(p.theta1) > p.radius * (1.0 + 1e-12) + 1e-300)
        throw std::invalid_argument("NestedRun: theta1 must lie in [-radius, radius]");
    }
    // Each thread is a chain: births follow the previous point's likelihood.
    std::map<std::int64_t, double> last;
    for (const auto& p : points_) {
      auto it = last.find(p.thread_id);
      if (it != last.end()) {
        if (p.birth_log_l != it->second)
          throw std::invalid_argument("NestedRun: thread " + std::to_string(p.thread_id) +
                                      " is not a birth chain");
        it->second = p.log_l;
      } else {
        last.emplace(p.thread_id, p.log_l);
      }
    }
    for (const auto& o : open_) {
      auto it = last.find(o.thread_id);
      if (it != last.end() && it->second != o.birth_log_l)
        throw std::invalid_argument("NestedRun: open thread must continue its last point");
    }
  }

  std::vector<SamplePoint> points_;
  std::vector<OpenThread> open_;
  ModelSpec model_{};
  Provenance provenance_{};
};

/// n_i = #{threads alive at the death of point i}: births strictly below
/// L_i, minus the points already dead before i in run order.
inline std::vector<int> live_point_counts(const NestedRun& run) {
  const auto& pts = run.points();
  const std::size_t n = pts.size();
  std::vector<int> counts(n);
  if (n == 0) return counts;
  std::vector<double> births;
  births.reserve(n + run.open_threads().size());
  for (const auto& p : pts) births.push_back(p.birth_log_l);
  for (const auto& o : run.open_threads()) births.push_back(o.birth_log_l);
  std::sort(births.begin(), births.end());
  std::size_t b = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (b < births.size() && births[b] < pts[i].log_l) ++b;
    const auto c = static_cast<std::int64_t>(b) - static_cast<std::int64_t>(i);
    if (c < 1) throw std::logic_error("live_point_counts: orphan sample");
    counts[i] = static_cast<int>(c);
  }
  return counts;
}

/// E[ln X_i] = -sum_{k<=i} 1/n_k.
inline std::vector<double> log_prior_volumes(const std::vector<int>& counts) {
  std::vector<double> out(counts.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    acc -= 1.0 / counts[i];
    out[i] = acc;
  }
  return out;
}

inline std::vector<double> log_prior_volumes(const NestedRun& run) {
  return log_prior_volumes(live_point_counts(run));
}

/// Trapezium weights w_i = (X_{i-1} - X_{i+1}) / 2 with X_0 = 1, X_{N+1} = 0.
inline std::vector<double> point_log_weights(const std::vector<int>& counts) {
  const std::size_t n = counts.size();
  if (n == 0) throw std::invalid_argument("point_log_weights: empty run");
  std::vector<double> out(n);
  double log_x_prev = 0.0;  // ln X_{i-1}
  for (std::size_t i = 0; i < n; ++i) {
    if (i + 1 < n) {
      // X_{i+1} / X_{i-1} = exp(-(1/n_i + 1/n_{i+1}))
      const double gap = 1.0 / counts[i] + 1.0 / counts[i + 1];
      out[i] = -std::numbers::ln2 + log_x_prev + detail::log1m_exp(-gap);
    } else {
      out[i] = -std::numbers::ln2 + log_x_prev;
    }
    log_x_prev -= 1.0 / counts[i];
  }
  return out;
}

inline std::vector<double> point_log_weights(const NestedRun& run) {
  return point_log_weights(live_point_counts(run));
}

inline double log_sum_exp(const std::vector<double>& v) {
  double m = kNegInf;
  for (double x : v) m = std::max(m, x);
  if (m == kNegInf) return kNegInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// ln(L_i w_i) for every point.
inline std::vector<double> log_posterior_masses(const NestedRun& run) {
  auto lw = point_log_weights(run);
  for (std::size_t i = 0; i < lw.size(); ++i) lw[i] += run[i].log_l;
  return lw;
}

/// p_i = L_i w_i / Z.
inline std::vector<double> posterior_weights(const NestedRun& run) {
  auto lm = log_posterior_masses(run);
  const double lz = log_sum_exp(lm);
  if (!std::isfinite(lz)) throw std::domain_error("posterior_weights: all weights vanish");
  std::vector<double> p(lm.size());
  double s = 0.0;
  for (std::size_t i = 0; i < lm.size(); ++i) s += (p[i] = std::exp(lm[i] - lz));
  for (double& x : p) x /= s;
  return p;
}

/// Merges runs into one. Thread ids are relabelled densely in order of
/// (run position, original id), so the first run's threads keep their
/// relative order and come first.
inline NestedRun combine_runs(const std::vector<NestedRun>& runs,
                              std::optional<Provenance> provenance = std::nullopt) {
  std::vector<const NestedRun*> nonempty;
  for (const auto& r : runs)
    if (!r.empty() || !r.open_threads().empty()) nonempty.push_back(&r);
  if (runs.empty()) throw std::invalid_argument("combine_runs: no runs given");
  const ModelSpec& model = (nonempty.empty() ? runs.front() : *nonempty.front()).model();
  for (const auto* r : nonempty)
    if (!(r->model() == model)) throw std::invalid_argument("combine_runs: model mismatch");

  std::vector<SamplePoint> pts;
  std::vector<OpenThread> open;
  std::int64_t offset = 0;
  for (const auto* r : nonempty) {
    std::vector<std::int64_t> ids;
    for (const auto& p : r->points()) ids.push_back(p.thread_id);
    for (const auto& o : r->open_threads()) ids.push_back(o.thread_id);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    auto relabel = [&](std::int64_t id) {
      return offset + (std::lower_bound(ids.begin(), ids.end(), id) - ids.begin());
    };
    for (auto p : r->points()) {
      p.thread_id = relabel(p.thread_id);
      pts.push_back(p);
    }
    for (auto o : r->open_threads()) {
      o.thread_id = relabel(o.thread_id);
      open.push_back(o);
    }
    offset += static_cast<std::int64_t>(ids.size());
  }
  Provenance prov = provenance ? *provenance
                               : (nonempty.empty() ? runs.front().provenance()
                                                   : nonempty.front()->provenance());
  return NestedRun(std::move(pts), model, std::move(prov), std::move(open));
}

/// Partition into single-live-point threads, ordered by thread id.
inline std::vector<Thread> split_into_threads(const NestedRun& run) {
  std::map<std::int64_t, Thread> by_id;
  for (const auto& p : run.points()) {
    auto [it, fresh] = by_id.try_emplace(p.thread_id);
    if (fresh) {
      it->second.thread_id = p.thread_id;
      it->second.start_log_l = p.birth_log_l;
    }
    it->second.points.push_back(p);
  }
  for (const auto& o : run.open_threads()) {
    auto [it, fresh] = by_id.try_emplace(o.thread_id);
    if (fresh) {
      it->second.thread_id = o.thread_id;
      it->second.start_log_l = o.birth_log_l;
    }
    it->second.open_end = true;
  }
  std::vector<Thread> out;
  out.reserve(by_id.size());
  for (auto& [id, t] : by_id) out.push_back(std::move(t));
  return out;
}

/// Builds a run from threads, relabelling them 0..k-1 in the given order.
inline NestedRun run_from_threads(const std::vector<Thread>& threads, const ModelSpec& model,
                                  Provenance provenance = {}) {
  std::vector<SamplePoint> pts;
  std::vector<OpenThread> open;
  std::size_t total = 0;
  for (const auto& t : threads) total += t.points.size();
  pts.reserve(total);
  std::int64_t id = 0;
  for (const auto& t : threads) {
    for (auto p : t.points) {
      p.thread_id = id;
      pts.push_back(p);
    }
    if (t.open_end) {
      const double birth = t.points.empty() ? t.start_log_l : t.points.back().log_l;
      open.push_back({birth, id});
    }
    ++id;
  }
  return NestedRun(std::move(pts), model, std::move(provenance), std::move(open));
}

}  // namespace dynns
