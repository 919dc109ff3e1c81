// Acceptance harness: one PASS/FAIL line per criterion. Criteria 1-7 run the
// experiment configs in configs/; criterion 8 runs property checks in place.
// Pass criterion numbers as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dynns/experiment.hpp"
#include "dynns/savitzky_golay.hpp"

using namespace dynns;

namespace {

int worker_count() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

ExperimentConfig config(const std::string& name) {
  auto cfg = load_config(std::string(DYNNS_CONFIG_DIR) + "/" + name + ".json");
  cfg.workers = worker_count();
  return cfg;
}

struct Outcome {
  ExperimentConfig cfg;
  std::vector<ArmResults> results;
  ExperimentReport report;

  std::size_t column(const std::string& estimator) const {
    const auto& n = report.estimator_names;
    const auto it = std::find(n.begin(), n.end(), estimator);
    if (it == n.end()) throw std::out_of_range("no estimator " + estimator);
    return static_cast<std::size_t>(it - n.begin());
  }
  double value(const std::string& kind, const std::string& arm, const std::string& estimator) const {
    return report.row(kind, arm).value[column(estimator)];
  }
  double unc(const std::string& kind, const std::string& arm, const std::string& estimator) const {
    return report.row(kind, arm).unc[column(estimator)];
  }
  double gain(const std::string& arm, const std::string& estimator) const { return value("gain", arm, estimator); }
};

Outcome run_config(const std::string& name) {
  Outcome o;
  o.cfg = config(name);
  const auto t0 = std::chrono::steady_clock::now();
  o.results = run_experiment(o.cfg);
  o.report = build_report(o.cfg, o.results, true_values(o.cfg.model, o.cfg.estimators));
  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
  std::fprintf(stderr, "  %s: %.0f s\n", name.c_str(), dt.count());
  return o;
}

std::string fmt(double v, double u) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g(%.2g)", v, u);
  return buf;
}

/// Accumulates named checks for one criterion and prints a single line.
class Verdict {
 public:
  explicit Verdict(int id, std::string title) : id_(id), title_(std::move(title)) {}

  void check(bool ok, const std::string& what) {
    ok_ = ok_ && ok;
    detail_ << (detail_.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [x]");
  }
  bool print() const {
    std::cout << (ok_ ? "PASS" : "FAIL") << " criterion " << id_ << ": " << title_ << " | " << detail_.str()
              << std::endl;
    return ok_;
  }

 private:
  int id_;
  std::string title_;
  bool ok_ = true;
  std::ostringstream detail_;
};

bool within(double v, double lo, double hi) { return v >= lo && v <= hi; }

void check_gain_range(Verdict& v, const Outcome& o, const std::string& arm, const std::string& est, double lo,
                      double hi) {
  const double g = o.gain(arm, est);
  std::ostringstream s;
  s << arm << ' ' << est << " gain " << fmt(g, o.unc("gain", arm, est)) << " in [" << lo << ", " << hi << ']';
  v.check(within(g, lo, hi), s.str());
}

void check_gain_above(Verdict& v, const Outcome& o, const std::string& arm, const std::string& est, double lo) {
  const double g = o.gain(arm, est);
  std::ostringstream s;
  s << arm << ' ' << est << " gain " << fmt(g, o.unc("gain", arm, est)) << " > " << lo;
  v.check(g > lo, s.str());
}

// The d=10 Gaussian arms are shared by criteria 1 and 6.
const Outcome& gaussian_goals() {
  static const Outcome o = run_config("gaussian_d10_goals");
  return o;
}

bool criterion1() {
  Verdict v(1, "d=10 Gaussian goal sweep");
  const auto& o = gaussian_goals();
  check_gain_range(v, o, "dyn_g0", "log_z", 1.1, 1.8);
  check_gain_range(v, o, "dyn_g1", "mean_theta1", 2.8, 4.5);
  check_gain_range(v, o, "dyn_g1", "median_radius", 3.4, 5.6);
  check_gain_above(v, o, "dyn_g025", "log_z", 1.0);
  check_gain_above(v, o, "dyn_g025", "mean_theta1", 1.0);
  return v.print();
}

bool criterion2() {
  Verdict v(2, "d=10 exponential power spot checks");
  check_gain_range(v, run_config("exp_power_b2_d10"), "dyn_g1", "median_radius", 5.0, 8.5);
  check_gain_range(v, run_config("exp_power_b075_d10"), "dyn_g0", "log_z", 1.3, 2.0);
  return v.print();
}

bool criterion3() {
  Verdict v(3, "parameter-estimation gain grows with dimension");
  std::vector<double> gains;
  for (const char* name : {"gaussian_d2_scaling", "gaussian_d10_scaling", "gaussian_d100_scaling"}) {
    const auto o = run_config(name);
    gains.push_back(o.gain("dyn_g1", "mean_theta1"));
    v.check(true, std::string("d=") + std::to_string(o.cfg.model.dim) + " mean_theta1 gain " +
                      fmt(gains.back(), o.unc("gain", "dyn_g1", "mean_theta1")));
  }
  v.check(gains[0] < gains[1] && gains[1] < gains[2], "strictly increasing");
  v.check(gains[2] > 5.0, "d=100 gain > 5");
  check_gain_above(v, run_config("exp_power_b2_d1000"), "dyn_g1", "median_radius", 20.0);
  return v.print();
}

bool criterion4() {
  Verdict v(4, "d=2 Gaussian with a narrow prior");
  check_gain_above(v, run_config("gaussian_d2_narrow_prior"), "dyn_g0", "log_z", 3.0);
  return v.print();
}

bool criterion5() {
  Verdict v(5, "bootstrap error calibration, d=3 Gaussian");
  auto cfg = config("bootstrap_d3");
  const std::size_t arm = bootstrap_arm_index(cfg);
  const auto base_seed = splitmix64(cfg.seed ^ 0xb0075eedull);
  std::vector<BootstrapRunSummary> summaries(cfg.n_runs);
  const auto t0 = std::chrono::steady_clock::now();
  run_experiment(cfg, [&](std::size_t a, std::size_t r, const NestedRun& run) {
    if (a == arm)
      summaries[r] = summarise_bootstrap(run, cfg.estimators, cfg.bootstrap.n_reps, cfg.bootstrap.separate_initial,
                                         cfg.bootstrap.credible_q, base_seed + r);
  });
  const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
  std::fprintf(stderr, "  bootstrap_d3: %.0f s\n", dt.count());
  const auto t = build_bootstrap_table(cfg.estimators, summaries, true_values(cfg.model, cfg.estimators));
  for (std::size_t e = 0; e < t.estimator_names.size(); ++e) {
    const double ratio = t.value[2][e], c1 = t.value[5][e], c95 = t.value[6][e];
    v.check(within(ratio, 0.9, 1.1) && within(c1, 63.0, 73.0) && within(c95, 93.0, 97.0),
            t.estimator_names[e] + " ratio " + fmt(ratio, t.unc[2][e]) + " cover1s " + fmt(c1, t.unc[5][e]) +
                " cover95 " + fmt(c95, t.unc[6][e]));
  }
  return v.print();
}

bool criterion6() {
  Verdict v(6, "unbiased estimates on the d=10 Gaussian arms");
  const auto& o = gaussian_goals();
  const std::size_t lz = o.column("log_z"), m1 = o.column("mean_theta1");
  const double truth_lz = o.report.truth[lz];
  for (const auto& res : o.results) {
    const auto& mean = o.report.row("mean", res.name);
    const auto& sd = o.report.row("stdev", res.name);
    const auto& rmse = o.report.row("rmse", res.name);
    const double dz = std::fabs(mean.value[lz] - truth_lz);
    v.check(dz <= std::max(0.06, 3.0 * mean.unc[lz]), res.name + " |log_z bias| " + fmt(dz, mean.unc[lz]));
    const double dm = std::fabs(mean.value[m1]);
    v.check(dm <= 3.0 * mean.unc[m1], res.name + " |mean_theta1| " + fmt(dm, mean.unc[m1]));
    double lo = HUGE_VAL, hi = -HUGE_VAL;
    for (std::size_t e = 0; e < o.report.estimator_names.size(); ++e) {
      if (std::isnan(o.report.truth[e])) continue;
      const double r = rmse.value[e] / sd.value[e];
      lo = std::min(lo, r);
      hi = std::max(hi, r);
    }
    char buf[96];
    std::snprintf(buf, sizeof buf, " rmse/stdev in [%.4f, %.4f]", lo, hi);
    v.check(lo >= 0.98 && hi <= 1.05, res.name + buf);
  }
  return v.print();
}

bool criterion7() {
  Verdict v(7, "tuned importance on the d=10 Cauchy");
  const auto o = run_config("cauchy_d10_tuned");
  const double untuned = o.gain("dyn_g1", "mean_theta1"), tuned = o.gain("dyn_g1_tuned", "mean_theta1");
  v.check(tuned > untuned, "tuned " + fmt(tuned, o.unc("gain", "dyn_g1_tuned", "mean_theta1")) + " > untuned " +
                               fmt(untuned, o.unc("gain", "dyn_g1", "mean_theta1")));
  v.check(within(tuned, 1.0, 1.8), "tuned in [1, 1.8]");
  return v.print();
}

// ---------------------------------------------------------------------------
// Criterion 8: property checks

bool same_points(const NestedRun& a, const NestedRun& b) {
  if (a.size() != b.size() || a.open_threads().size() != b.open_threads().size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto &p = a.points()[i], &q = b.points()[i];
    if (p.log_l != q.log_l || p.birth_log_l != q.birth_log_l || p.theta1 != q.theta1 || p.radius != q.radius)
      return false;
  }
  return true;
}

NestedRun standard(const ModelSpec& m, int n, std::uint64_t seed, bool keep_final = true) {
  SamplerConfig c;
  c.n_live = n;
  c.seed = seed;
  c.keep_final_live = keep_final;
  return standard_run(m, c);
}

NestedRun dynamic(const ModelSpec& m, double goal, std::uint64_t seed) {
  AlgorithmOneConfig c;
  c.n_init = 10;
  c.sample_budget = 3000;
  Rng rng = make_rng(seed);
  return dynamic_run_algorithm1(m, GoalConfig{goal}, c, rng);
}

bool round_trips(const ModelSpec& m) {
  bool ok = true;
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const auto a = standard(m, 15, s), b = dynamic(m, 1.0, 100 + s);
    ok = ok && same_points(run_from_threads(split_into_threads(a), m), a);
    ok = ok && same_points(run_from_threads(split_into_threads(b), m), b);
    const auto ab = combine_runs({a, b});
    ok = ok && split_into_threads(ab).size() == split_into_threads(a).size() + split_into_threads(b).size();
    ok = ok && same_points(combine_runs({ab}), ab) && same_points(combine_runs(std::vector<NestedRun>{a, b}), ab);
    std::vector<NestedRun> singles;
    for (const auto& t : split_into_threads(ab)) singles.push_back(run_from_threads({t}, m));
    ok = ok && same_points(combine_runs(singles), ab);
  }
  return ok;
}

int alive(const NestedRun& run, double log_l) {
  int n = 0;
  for (const auto& p : run.points())
    if (p.birth_log_l < log_l && log_l <= p.log_l) ++n;
  for (const auto& o : run.open_threads())
    if (o.birth_log_l < log_l) ++n;
  return n;
}

bool counts_add(const ModelSpec& m) {
  for (std::uint64_t s = 1; s <= 5; ++s) {
    const auto a = standard(m, 7, s), b = standard(m, 4, 50 + s, false), c = dynamic(m, 0.5, 90 + s);
    const auto abc = combine_runs({a, b, c});
    const auto counts = live_point_counts(abc);
    for (std::size_t i = 0; i < abc.size(); ++i) {
      const double l = abc.points()[i].log_l;
      if (i > 0 && abc.points()[i - 1].log_l == l) continue;  // ties: only the first sees every thread
      if (counts[i] != alive(a, l) + alive(b, l) + alive(c, l)) return false;
    }
  }
  return true;
}

bool shrinkage_moments(std::string& note) {
  const auto m = gaussian_model(3, 10.0);
  const int n = 10, runs = 2000;
  bool ok = true;
  for (int i : {5, 20, 60}) {
    std::vector<double> v;
    for (int r = 0; r < runs; ++r) v.push_back(standard(m, n, 9000 + r).points()[i - 1].true_log_x);
    const double mean = sample_mean(v), var = sample_variance(v);
    const double se = std::sqrt(var / runs);
    const double expect_var = double(i) / (n * n), var_se = expect_var * std::sqrt(2.0 / (runs - 1));
    const double zm = (mean + double(i) / n) / se, zv = (var - expect_var) / var_se;
    ok = ok && std::fabs(zm) < 5.0 && std::fabs(zv) < 5.0;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%sz(i=%d)=%.2f,%.2f", note.empty() ? "" : " ", i, zm, zv);
    note += buf;
  }
  return ok;
}

bool savitzky_golay_cubics() {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> c(-2.0, 2.0);
  for (int window : {5, 9, 21, 41}) {
    const double a = c(rng), b = c(rng), q = c(rng), d = c(rng);
    std::vector<double> v(200);
    for (int i = 0; i < 200; ++i) {
      const double x = 0.05 * i;
      v[i] = a + b * x + q * x * x + d * x * x * x;
    }
    const auto s = savitzky_golay_smooth(v, window, 3);
    for (int i = 0; i < 200; ++i)
      if (std::fabs(s[i] - v[i]) > 1e-10 * std::max(1.0, std::fabs(v[i]))) return false;
  }
  return true;
}

bool entropy_bounds() {
  std::mt19937_64 rng(12);
  std::exponential_distribution<double> ex(1.0);
  for (std::size_t n : {1u, 2u, 7u, 100u}) {
    std::vector<double> p(n, 1.0 / n), r(n);
    if (std::fabs(information_content(p) - double(n)) > 1e-9 * n) return false;
    double s = 0.0;
    for (auto& x : r) s += (x = ex(rng));
    for (auto& x : r) x /= s;
    const double h = information_content(r);
    if (h < 1.0 - 1e-12 || h > double(n) * (1.0 + 1e-12)) return false;
  }
  const auto run = standard(gaussian_model(3, 10.0), 50, 13);
  const double h = information_content(run);
  return h >= 1.0 && h <= double(run.size());
}

// Equal weights put the k-th sorted value at (k + 1/2) / N; the quantile
// interpolates linearly between those positions and clamps outside them.
double brute_quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double n = double(v.size()), pos = q * n - 0.5;
  if (pos <= 0.0) return v.front();
  if (pos >= n - 1.0) return v.back();
  const auto k = static_cast<std::size_t>(std::floor(pos));
  return v[k] + (pos - double(k)) * (v[k + 1] - v[k]);
}

bool quantiles_match() {
  std::mt19937_64 rng(14);
  std::normal_distribution<double> g;
  for (std::size_t n = 1; n <= 20; ++n) {
    for (int rep = 0; rep < 20; ++rep) {
      std::vector<double> v(n);
      for (auto& x : v) x = g(rng);
      const std::vector<double> w(n, 0.37);
      for (double q : {0.0, 0.01, 0.1, 0.25, 0.5, 0.6, 0.84, 0.975, 1.0}) {
        const double a = weighted_quantile(v, w, q), b = brute_quantile(v, q);
        if (std::fabs(a - b) > 1e-12 * std::max(1.0, std::fabs(b))) return false;
      }
    }
  }
  return true;
}

bool replay_is_byte_exact() {
  auto cfg = config("quickstart");
  cfg.n_runs = 6;
  auto collect = [&](int workers) {
    cfg.workers = workers;
    std::vector<std::vector<std::string>> text(cfg.arms.size(), std::vector<std::string>(cfg.n_runs));
    run_experiment(cfg, [&](std::size_t a, std::size_t r, const NestedRun& run) { text[a][r] = run_to_string(run); });
    return text;
  };
  const auto once = collect(1);
  return once == collect(1) && once == collect(std::max(3, worker_count()));
}

bool criterion8() {
  Verdict v(8, "property suites");
  const auto m = gaussian_model(3, 10.0);
  v.check(round_trips(m), "combine/split round trips");
  v.check(counts_add(m), "combined counts sum per-run counts");
  std::string note;
  const bool moments = shrinkage_moments(note);
  v.check(moments, "shrinkage moments " + note);
  v.check(savitzky_golay_cubics(), "Savitzky-Golay cubics to 1e-10");
  v.check(entropy_bounds(), "1 <= H <= N");
  v.check(quantiles_match(), "quantiles vs brute force, N <= 20");
  v.check(replay_is_byte_exact(), "byte-exact replay across workers");
  return v.print();
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<bool()>> criteria{criterion1, criterion2, criterion3, criterion4,
                                                    criterion5, criterion6, criterion7, criterion8};
  std::set<int> chosen;
  for (int i = 1; i < argc; ++i) chosen.insert(std::stoi(argv[i]));
  int failed = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    if (!chosen.empty() && !chosen.count(int(c) + 1)) continue;
    try {
      failed += !criteria[c]();
    } catch (const std::exception& e) {
      std::cout << "FAIL criterion " << c + 1 << ": error " << e.what() << std::endl;
      ++failed;
    }
  }
  return failed == 0 ? 0 : 1;
}
