#pragma once

// Batch experiments: configuration, deterministic parallel generation of run
// ensembles, and the comparison, allocation-profile and bootstrap reports.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dynns/analysis.hpp"
#include "dynns/dynamic.hpp"
#include "dynns/importance.hpp"
#include "dynns/model.hpp"
#include "dynns/run.hpp"
#include "dynns/runio.hpp"
#include "dynns/sampler.hpp"
#include "json.hpp"

namespace dynns {

enum class Method { Standard, Dyn1, Dyn2 };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::Standard: return "standard";
    case Method::Dyn1: return "dyn1";
    case Method::Dyn2: return "dyn2";
  }
  return "unknown";
}

inline Method parse_method(const std::string& s) {
  if (s == "standard") return Method::Standard;
  if (s == "dyn1") return Method::Dyn1;
  if (s == "dyn2") return Method::Dyn2;
  throw std::invalid_argument("unknown method: " + s);
}

struct ArmConfig {
  std::string name;
  Method method = Method::Standard;
  double goal = 1.0;
  int n = 0;  // live points (standard) or n_init (dynamic); 0 picks the default
  std::optional<std::int64_t> budget;  // empty: match the baseline's mean samples
  ImportanceVariant importance = ImportanceVariant::Standard;
  TunedTarget tuned_target = TunedTarget::Theta1;
  int n_batch = 1;
  double fraction = 0.9;
  int smooth_window = 0;
  int smooth_order = 3;
  bool keep_final_live = true;
  std::optional<std::uint64_t> seed;
};

struct BootstrapSettings {
  int n_reps = 200;
  bool separate_initial = true;
  double credible_q = 0.95;
  std::string arm;  // empty: first dynamic arm, else the first arm
};

struct ExperimentConfig {
  ModelSpec model;
  std::vector<ArmConfig> arms;
  int n_runs = 2;
  std::vector<EstimatorId> estimators = default_estimators();
  std::uint64_t seed = 0;
  int workers = 1;
  std::string baseline;  // empty: first standard arm
  BootstrapSettings bootstrap;
  int alloc_grid_points = 2001;

  const ArmConfig& arm(const std::string& name) const {
    for (const auto& a : arms)
      if (a.name == name) return a;
    throw std::invalid_argument("no arm named " + name);
  }

  /// Name of the standard arm that dynamic budgets and gains refer to.
  std::string baseline_arm() const {
    if (!baseline.empty()) {
      if (arm(baseline).method != Method::Standard)
        throw std::invalid_argument("baseline arm must use the standard method");
      return baseline;
    }
    for (const auto& a : arms)
      if (a.method == Method::Standard) return a.name;
    return {};
  }

  void validate() const {
    model.validate();
    if (arms.empty()) throw std::invalid_argument("config: at least one arm is required");
    if (n_runs < 1) throw std::invalid_argument("config: n_runs must be >= 1");
    if (workers < 1) throw std::invalid_argument("config: workers must be >= 1");
    if (estimators.empty()) throw std::invalid_argument("config: at least one estimator is required");
    std::map<std::string, int> seen;
    for (const auto& a : arms) {
      if (a.name.empty()) throw std::invalid_argument("config: every arm needs a name");
      if (a.name.find_first_of("/\\") != std::string::npos)
        throw std::invalid_argument("config: arm names may not contain path separators");
      if (++seen[a.name] > 1) throw std::invalid_argument("config: duplicate arm name " + a.name);
      if (!(a.goal >= 0.0 && a.goal <= 1.0)) throw std::invalid_argument("config: G must lie in [0, 1]");
      if (a.n < 0 || a.n_batch < 1) throw std::invalid_argument("config: arm sizes must be positive");
      if (a.method != Method::Standard && !a.budget && baseline_arm().empty())
        throw std::invalid_argument("config: arm " + a.name + " matches a budget but there is no standard arm");
      if (a.method != Method::Standard && a.n == 0 && baseline_arm().empty())
        throw std::invalid_argument("config: arm " + a.name + " needs n_init when there is no standard arm");
    }
    if (!baseline.empty()) (void)baseline_arm();
  }
};

/// 64-bit mix used to derive independent arm seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t arm_seed(const ExperimentConfig& cfg, std::size_t arm_index) {
  const auto& a = cfg.arms.at(arm_index);
  if (a.seed) return *a.seed;
  return splitmix64(cfg.seed ^ splitmix64(0x51ed2701ull + arm_index));
}

// ---------------------------------------------------------------------------
// Config (de)serialisation

inline EstimatorId estimator_from_json(const nlohmann::json& j) { return EstimatorId::parse(j.get<std::string>()); }

inline ArmConfig arm_from_json(const nlohmann::json& j) {
  ArmConfig a;
  a.name = j.at("name").get<std::string>();
  a.method = parse_method(j.at("method").get<std::string>());
  a.goal = j.value("G", 1.0);
  if (j.contains("n")) a.n = j["n"].get<int>();
  if (j.contains("n_init")) a.n = j["n_init"].get<int>();
  if (j.contains("budget")) {
    const auto& b = j["budget"];
    if (b.is_string()) {
      if (b.get<std::string>() != "match") throw std::invalid_argument("budget must be \"match\" or an integer");
    } else {
      a.budget = b.get<std::int64_t>();
      if (*a.budget < 1) throw std::invalid_argument("budget must be positive");
    }
  }
  a.importance = parse_importance(j.value("importance", std::string("standard")));
  const std::string target = j.value("tuned_target", std::string("theta1"));
  if (target == "theta1") {
    a.tuned_target = TunedTarget::Theta1;
  } else if (target == "radius") {
    a.tuned_target = TunedTarget::Radius;
  } else {
    throw std::invalid_argument("tuned_target must be theta1 or radius");
  }
  a.n_batch = j.value("n_batch", 1);
  a.fraction = j.value("fraction", 0.9);
  a.smooth_window = j.value("smooth_window", 0);
  a.smooth_order = j.value("smooth_order", 3);
  a.keep_final_live = j.value("keep_final_live", true);
  if (j.contains("seed")) a.seed = j["seed"].get<std::uint64_t>();
  return a;
}

inline nlohmann::json arm_to_json(const ArmConfig& a) {
  nlohmann::json j{{"name", a.name},
                   {"method", method_name(a.method)},
                   {"G", a.goal},
                   {"n", a.n},
                   {"importance", std::string(importance_name(a.importance))},
                   {"tuned_target", a.tuned_target == TunedTarget::Theta1 ? "theta1" : "radius"},
                   {"n_batch", a.n_batch},
                   {"fraction", a.fraction},
                   {"smooth_window", a.smooth_window},
                   {"smooth_order", a.smooth_order},
                   {"keep_final_live", a.keep_final_live}};
  j["budget"] = a.budget ? nlohmann::json(*a.budget) : nlohmann::json("match");
  if (a.seed) j["seed"] = *a.seed;
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  c.model = model_from_json(j.at("model"));
  for (const auto& a : j.at("arms")) c.arms.push_back(arm_from_json(a));
  c.n_runs = j.value("n_runs", 2);
  if (j.contains("estimators")) {
    c.estimators.clear();
    for (const auto& e : j["estimators"]) c.estimators.push_back(estimator_from_json(e));
  }
  c.seed = j.value("seed", std::uint64_t{0});
  c.workers = j.value("workers", 1);
  c.baseline = j.value("baseline", std::string());
  if (j.contains("bootstrap")) {
    const auto& b = j["bootstrap"];
    c.bootstrap.n_reps = b.value("n_reps", 200);
    c.bootstrap.separate_initial = b.value("separate_initial", true);
    c.bootstrap.credible_q = b.value("credible_q", 0.95);
    c.bootstrap.arm = b.value("arm", std::string());
  }
  c.alloc_grid_points = j.value("alloc_grid_points", 2001);
  c.validate();
  return c;
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json arms = nlohmann::json::array();
  for (const auto& a : c.arms) arms.push_back(arm_to_json(a));
  nlohmann::json est = nlohmann::json::array();
  for (const auto& e : c.estimators) est.push_back(e.name());
  return {{"model", model_to_json(c.model)},
          {"arms", arms},
          {"n_runs", c.n_runs},
          {"estimators", est},
          {"seed", c.seed},
          {"workers", c.workers},
          {"baseline", c.baseline},
          {"bootstrap",
           {{"n_reps", c.bootstrap.n_reps},
            {"separate_initial", c.bootstrap.separate_initial},
            {"credible_q", c.bootstrap.credible_q},
            {"arm", c.bootstrap.arm}}},
          {"alloc_grid_points", c.alloc_grid_points}};
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path);
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("malformed config " + path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Generation

/// Runs fn(i) for i in [0, n) on `workers` threads. Results must be written
/// to per-index slots, which keeps output independent of scheduling. The
/// first exception is rethrown after all workers stop.
inline void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  const auto count = static_cast<std::size_t>(std::min<std::size_t>(workers, n));
  for (std::size_t w = 0; w < count; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          next.store(n);
          return;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Arm parameters after defaults and budget matching are applied.
struct ResolvedArm {
  ArmConfig arm;
  int n = 0;
  std::int64_t budget = 0;
  std::uint64_t seed = 0;
};

/// Default n_init: 10% of the baseline's live points for the iterative
/// algorithm, 20% for the single-pass one.
inline ResolvedArm resolve_arm(const ExperimentConfig& cfg, std::size_t arm_index,
                               std::optional<double> baseline_mean_samples) {
  ResolvedArm r;
  r.arm = cfg.arms.at(arm_index);
  r.seed = arm_seed(cfg, arm_index);
  if (r.arm.method == Method::Standard) {
    r.n = r.arm.n > 0 ? r.arm.n : 500;
    return r;
  }
  if (r.arm.n > 0) {
    r.n = r.arm.n;
  } else {
    const int base_n = cfg.arm(cfg.baseline_arm()).n > 0 ? cfg.arm(cfg.baseline_arm()).n : 500;
    const double share = r.arm.method == Method::Dyn1 ? 0.1 : 0.2;
    r.n = std::max(1, static_cast<int>(std::lround(share * base_n)));
  }
  if (r.arm.budget) {
    r.budget = *r.arm.budget;
  } else {
    if (!baseline_mean_samples) throw std::logic_error("budget matching needs the baseline's sample count");
    r.budget = static_cast<std::int64_t>(std::lround(*baseline_mean_samples));
  }
  return r;
}

inline NestedRun generate_run(const ModelSpec& model, const ResolvedArm& arm, std::int64_t run_index) {
  Rng rng = make_rng(arm.seed, static_cast<std::uint64_t>(run_index));
  Provenance prov;
  prov.seed = arm.seed;
  prov.run_index = run_index;
  GoalConfig goal{arm.arm.goal, arm.arm.importance, arm.arm.tuned_target};
  switch (arm.arm.method) {
    case Method::Standard: {
      SamplerConfig sc;
      sc.n_live = arm.n;
      sc.keep_final_live = arm.arm.keep_final_live;
      sc.seed = arm.seed;
      prov.importance = "none";
      return standard_run(model, sc, rng, prov);
    }
    case Method::Dyn1: {
      AlgorithmOneConfig c;
      c.n_init = arm.n;
      c.fraction = arm.arm.fraction;
      c.n_batch = arm.arm.n_batch;
      c.sample_budget = arm.budget;
      return dynamic_run_algorithm1(model, goal, c, rng, prov);
    }
    case Method::Dyn2: {
      AlgorithmTwoConfig c;
      c.n_init = arm.n;
      c.total_budget = arm.budget;
      c.smooth_window = arm.arm.smooth_window;
      c.smooth_order = arm.arm.smooth_order;
      return dynamic_run_algorithm2(model, goal, c, rng, prov);
    }
  }
  throw std::logic_error("unknown method");
}

/// Estimates and sample counts of one arm's runs.
struct ArmResults {
  std::string name;
  Method method = Method::Standard;
  std::vector<std::vector<double>> estimates;  // [run][estimator]
  std::vector<std::int64_t> samples;

  double mean_samples() const {
    double s = 0.0;
    for (auto x : samples) s += static_cast<double>(x);
    return samples.empty() ? 0.0 : s / static_cast<double>(samples.size());
  }

  std::vector<double> column(std::size_t e) const {
    std::vector<double> v;
    v.reserve(estimates.size());
    for (const auto& row : estimates) v.push_back(row.at(e));
    return v;
  }
};

/// Order in which arms must be generated so the baseline exists before any
/// arm that matches its budget.
inline std::vector<std::size_t> generation_order(const ExperimentConfig& cfg) {
  std::vector<std::size_t> order;
  const std::string base = cfg.baseline_arm();
  for (std::size_t i = 0; i < cfg.arms.size(); ++i)
    if (cfg.arms[i].name == base) order.push_back(i);
  for (std::size_t i = 0; i < cfg.arms.size(); ++i)
    if (cfg.arms[i].name != base) order.push_back(i);
  return order;
}

/// Generates every arm and hands each run to `sink(arm_index, run_index,
/// run)` from worker threads. Returns per-arm results in config order.
inline std::vector<ArmResults> run_experiment(
    const ExperimentConfig& cfg,
    const std::function<void(std::size_t, std::size_t, const NestedRun&)>& sink = nullptr) {
  cfg.validate();
  std::vector<ArmResults> results(cfg.arms.size());
  std::optional<double> base_mean;
  const std::string base = cfg.baseline_arm();
  for (std::size_t a : generation_order(cfg)) {
    const ResolvedArm arm = resolve_arm(cfg, a, base_mean);
    auto& res = results[a];
    res.name = arm.arm.name;
    res.method = arm.arm.method;
    res.estimates.assign(cfg.n_runs, {});
    res.samples.assign(cfg.n_runs, 0);
    parallel_for(static_cast<std::size_t>(cfg.n_runs), cfg.workers, [&](std::size_t r) {
      const NestedRun run = generate_run(cfg.model, arm, static_cast<std::int64_t>(r));
      res.estimates[r] = estimate_all(run, cfg.estimators);
      res.samples[r] = static_cast<std::int64_t>(run.size());
      if (sink) sink(a, r, run);
    });
    if (arm.arm.name == base) base_mean = res.mean_samples();
  }
  return results;
}

// ---------------------------------------------------------------------------
// Files

inline std::string run_file_name(const std::string& arm, std::size_t run_index) {
  std::ostringstream s;
  s << "runs/" << arm << "/run_" << std::setw(5) << std::setfill('0') << run_index << ".json";
  return s.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

/// Writes one run file per (arm, run) and a manifest with realised sample
/// counts. Returns the manifest.
inline nlohmann::json generate_to_directory(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  for (const auto& a : cfg.arms) std::filesystem::create_directories(out_dir / "runs" / a.name);
  const auto results = run_experiment(cfg, [&](std::size_t a, std::size_t r, const NestedRun& run) {
    save_run(run, (out_dir / run_file_name(cfg.arms[a].name, r)).string());
  });
  nlohmann::json arms = nlohmann::json::array();
  for (std::size_t a = 0; a < cfg.arms.size(); ++a) {
    nlohmann::json files = nlohmann::json::array();
    for (std::size_t r = 0; r < results[a].samples.size(); ++r)
      files.push_back({{"path", run_file_name(cfg.arms[a].name, r)}, {"samples", results[a].samples[r]}});
    arms.push_back({{"name", cfg.arms[a].name},
                    {"method", method_name(cfg.arms[a].method)},
                    {"seed", arm_seed(cfg, a)},
                    {"mean_samples", results[a].mean_samples()},
                    {"files", files}});
  }
  nlohmann::json manifest{{"version", kRunFileVersion}, {"config", config_to_json(cfg)}, {"arms", arms}};
  write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

inline nlohmann::json load_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw std::runtime_error("missing manifest.json in " + dir.string() + "; run generate first");
  return nlohmann::json::parse(in);
}

/// Paths of each arm's run files, in config order. Throws listing every
/// missing file.
inline std::vector<std::vector<std::filesystem::path>> manifest_run_paths(const ExperimentConfig& cfg,
                                                                          const nlohmann::json& manifest,
                                                                          const std::filesystem::path& dir) {
  std::vector<std::vector<std::filesystem::path>> out(cfg.arms.size());
  std::vector<std::string> missing;
  for (std::size_t a = 0; a < cfg.arms.size(); ++a) {
    const nlohmann::json* entry = nullptr;
    for (const auto& m : manifest.at("arms"))
      if (m.at("name").get<std::string>() == cfg.arms[a].name) entry = &m;
    if (entry == nullptr) {
      missing.push_back("arm " + cfg.arms[a].name);
      continue;
    }
    for (const auto& f : entry->at("files")) {
      const auto p = dir / f.at("path").get<std::string>();
      if (!std::filesystem::exists(p)) missing.push_back(p.string());
      out[a].push_back(p);
    }
  }
  if (!missing.empty()) {
    std::string msg = "missing runs:";
    for (const auto& m : missing) msg += " " + m;
    throw std::runtime_error(msg);
  }
  return out;
}

/// Loads runs and evaluates estimators, in parallel over files.
inline std::vector<ArmResults> results_from_directory(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  const auto manifest = load_manifest(dir);
  const auto paths = manifest_run_paths(cfg, manifest, dir);
  std::vector<ArmResults> results(cfg.arms.size());
  for (std::size_t a = 0; a < cfg.arms.size(); ++a) {
    auto& res = results[a];
    res.name = cfg.arms[a].name;
    res.method = cfg.arms[a].method;
    res.estimates.assign(paths[a].size(), {});
    res.samples.assign(paths[a].size(), 0);
    parallel_for(paths[a].size(), cfg.workers, [&](std::size_t r) {
      const NestedRun run = load_run(paths[a][r].string());
      res.estimates[r] = estimate_all(run, cfg.estimators);
      res.samples[r] = static_cast<std::int64_t>(run.size());
    });
  }
  return results;
}

// ---------------------------------------------------------------------------
// Reports

inline std::string format_number(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

/// One row of the comparison table: a statistic per estimator with its
/// 1-sigma uncertainty.
struct ReportRow {
  std::string kind;  // mean, stdev, rmse, gain
  std::string arm;
  double samples = std::numeric_limits<double>::quiet_NaN();
  double samples_unc = std::numeric_limits<double>::quiet_NaN();
  std::vector<double> value;
  std::vector<double> unc;
};

struct ExperimentReport {
  std::vector<std::string> estimator_names;
  std::vector<double> truth;
  std::vector<ReportRow> rows;

  const ReportRow& row(const std::string& kind, const std::string& arm) const {
    for (const auto& r : rows)
      if (r.kind == kind && r.arm == arm) return r;
    throw std::out_of_range("no report row " + kind + "/" + arm);
  }

  std::string to_csv() const {
    std::ostringstream s;
    s << "kind,arm,samples,samples_unc";
    for (const auto& n : estimator_names) s << ',' << n << ',' << n << "_unc";
    s << '\n';
    for (const auto& r : rows) {
      s << r.kind << ',' << r.arm << ',' << format_number(r.samples) << ',' << format_number(r.samples_unc);
      for (std::size_t e = 0; e < r.value.size(); ++e)
        s << ',' << format_number(r.value[e]) << ',' << format_number(r.unc[e]);
      s << '\n';
    }
    return s.str();
  }
};

inline std::vector<double> true_values(const ModelSpec& m, const std::vector<EstimatorId>& ids) {
  std::vector<double> t;
  for (const auto& id : ids) t.push_back(true_value(m, id));
  return t;
}

/// Mean, St.Dev. and RMSE rows for every arm, then gain rows for every
/// non-baseline arm against the baseline.
inline ExperimentReport build_report(const ExperimentConfig& cfg, const std::vector<ArmResults>& results,
                                     const std::vector<double>& truth) {
  ExperimentReport rep;
  for (const auto& e : cfg.estimators) rep.estimator_names.push_back(e.name());
  rep.truth = truth;
  const std::size_t ne = cfg.estimators.size();
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (results.size() < 2) throw std::invalid_argument("compare: need at least two arms");
  // The jackknife needs three values; with two runs the error is unknown.
  auto spread = [&](const std::vector<double>& v) {
    return v.size() >= 3 ? jackknife_std(v) : StdWithError{sample_std(v), nan};
  };
  for (const auto& res : results) {
    if (res.estimates.size() < 2)
      throw std::invalid_argument("compare: arm " + res.name + " needs at least two runs");
    std::vector<double> samples;
    for (auto x : res.samples) samples.push_back(static_cast<double>(x));
    const double n = static_cast<double>(samples.size());
    const double s_mean = sample_mean(samples);
    const double s_unc = sample_std(samples) / std::sqrt(n);
    ReportRow mean{"mean", res.name, s_mean, s_unc, {}, {}};
    ReportRow sd{"stdev", res.name, s_mean, s_unc, {}, {}};
    ReportRow rmse{"rmse", res.name, s_mean, s_unc, {}, {}};
    for (std::size_t e = 0; e < ne; ++e) {
      const auto col = res.column(e);
      const auto jk = spread(col);
      mean.value.push_back(sample_mean(col));
      mean.unc.push_back(jk.std / std::sqrt(n));
      sd.value.push_back(jk.std);
      sd.unc.push_back(jk.error);
      if (std::isnan(truth[e])) {
        rmse.value.push_back(nan);
        rmse.unc.push_back(nan);
      } else {
        rmse.value.push_back(root_mean_square_error(col, truth[e]));
        // RMSE^2 is a mean of squared errors; propagate its standard error.
        std::vector<double> sq;
        for (double x : col) sq.push_back((x - truth[e]) * (x - truth[e]));
        const double r = rmse.value.back();
        rmse.unc.push_back(r > 0.0 ? sample_std(sq) / std::sqrt(n) / (2.0 * r) : 0.0);
      }
    }
    rep.rows.push_back(std::move(mean));
    rep.rows.push_back(std::move(sd));
    rep.rows.push_back(std::move(rmse));
  }
  const std::string base = cfg.baseline_arm();
  if (!base.empty()) {
    const ArmResults* b = nullptr;
    for (const auto& r : results)
      if (r.name == base) b = &r;
    for (std::size_t a = 0; a < results.size(); ++a) {
      const auto& res = results[a];
      if (res.name == base) continue;
      ReportRow g{"gain", res.name, res.mean_samples(), nan, {}, {}};
      for (std::size_t e = 0; e < ne; ++e) {
        const auto gain = efficiency_gain(b->column(e), res.column(e), b->mean_samples(), res.mean_samples(),
                                          splitmix64(cfg.seed + 7919 * a + e));
        g.value.push_back(gain.gain);
        g.unc.push_back(gain.sigma);
      }
      rep.rows.push_back(std::move(g));
    }
  }
  return rep;
}

/// Live-point allocation of one run as a step function of E[ln X]: n_i
/// holds on (ln X_i, ln X_{i-1}].
struct AllocationProfile {
  std::vector<double> log_x;  // right end of each step, ln X_{i-1}
  std::vector<double> log_x_next;  // left end, ln X_i
  std::vector<int> n_live;

  /// Integral of n over ln X, which equals the sample count.
  double area() const {
    double a = 0.0;
    for (std::size_t i = 0; i < n_live.size(); ++i) a += n_live[i] * (log_x[i] - log_x_next[i]);
    return a;
  }

  /// n at a given ln X; zero outside the run.
  double at(double lx) const {
    if (log_x_next.empty() || lx > 0.0 || lx <= log_x_next.back()) return 0.0;
    // log_x_next is decreasing.
    auto it = std::upper_bound(log_x_next.begin(), log_x_next.end(), lx, std::greater<double>());
    if (it == log_x_next.end()) return 0.0;
    return n_live[static_cast<std::size_t>(it - log_x_next.begin())];
  }
};

inline AllocationProfile allocation_profile(const NestedRun& run) {
  AllocationProfile p;
  const auto counts = live_point_counts(run);
  const auto lx = log_prior_volumes(counts);
  double prev = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    p.log_x.push_back(prev);
    p.log_x_next.push_back(lx[i]);
    p.n_live.push_back(counts[i]);
    prev = lx[i];
  }
  return p;
}

struct AnalyticCurves {
  std::vector<double> log_x;
  std::vector<double> relative_mass;
  std::vector<double> mass_remaining;
  std::vector<double> tuned_importance;
};

inline double trapezoid_area(const std::vector<double>& x, const std::vector<double>& y) {
  double a = 0.0;
  for (std::size_t i = 1; i < x.size(); ++i) a += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
  return a;
}

/// L(X)X, the posterior mass below X, and |theta| X L(X) / sqrt(d) on a
/// uniform ln X grid over [lo, 0], each scaled to the given area.
inline AnalyticCurves analytic_curves(const ModelSpec& m, double lo, int grid_points, double area) {
  if (grid_points < 2 || !(lo < 0.0)) throw std::invalid_argument("analytic_curves: bad grid");
  const double floor = std::min(lo, log_x_quadrature_floor(m));
  // Fine table so the cumulative mass below lo is included.
  const int stride = 20;
  const double step = -lo / (grid_points - 1) / stride;
  const int below = static_cast<int>(std::ceil((lo - floor) / step));
  const PosteriorMassTable table(m, lo - below * step, 0.0, below + (grid_points - 1) * stride + 1);
  AnalyticCurves c;
  const double lz = table.log_total();
  for (int g = 0; g < grid_points; ++g) {
    const std::size_t k = static_cast<std::size_t>(below + g * stride);
    c.log_x.push_back(table.log_x()[k]);
    c.relative_mass.push_back(std::exp(table.log_mass()[k] - lz));
    c.mass_remaining.push_back(std::exp(table.log_cumulative()[k] - lz));
    // At ln X = 0 the radius is infinite but the mass vanishes faster.
    const double lm = table.log_mass()[k];
    c.tuned_importance.push_back(lm == kNegInf ? 0.0 : table.radius()[k] * std::exp(lm - lz) / std::sqrt(m.dim));
  }
  for (auto* v : {&c.relative_mass, &c.mass_remaining, &c.tuned_importance}) {
    const double a = trapezoid_area(c.log_x, *v);
    if (a > 0.0)
      for (double& y : *v) y *= area / a;
  }
  return c;
}

/// Per-arm mean allocation on a common grid.
inline std::vector<double> mean_allocation(const std::vector<AllocationProfile>& profiles,
                                           const std::vector<double>& grid) {
  std::vector<double> mean(grid.size(), 0.0);
  if (profiles.empty()) return mean;
  for (const auto& p : profiles)
    for (std::size_t g = 0; g < grid.size(); ++g) mean[g] += p.at(grid[g]);
  for (double& v : mean) v /= static_cast<double>(profiles.size());
  return mean;
}

/// Plot data for live-point allocations against ln X.
struct AllocationReport {
  std::string runs_csv;      // arm,run,log_x_start,log_x_end,n_live per step
  std::string mean_csv;      // arm,log_x,mean_n_live on a common grid
  std::string analytic_csv;  // arm,log_x,relative_mass,mass_remaining,tuned_importance
  std::vector<double> mean_area;  // per arm: mean integral of n over ln X
};

/// Each run's step function, each arm's mean on a uniform grid, and the
/// analytic curves scaled to that arm's mean area. The grid spans [lo, 0]
/// with lo the deepest ln X reached by any run.
inline AllocationReport build_allocation_report(const ExperimentConfig& cfg,
                                                const std::vector<std::vector<AllocationProfile>>& profiles) {
  if (cfg.alloc_grid_points < 2) throw std::invalid_argument("alloc: alloc_grid_points must be >= 2");
  AllocationReport rep;
  double lo = 0.0;
  for (const auto& arm : profiles)
    for (const auto& p : arm)
      if (!p.log_x_next.empty()) lo = std::min(lo, p.log_x_next.back());
  if (!(lo < 0.0)) throw std::invalid_argument("alloc: no runs to profile");
  std::vector<double> grid(cfg.alloc_grid_points);
  for (int g = 0; g < cfg.alloc_grid_points; ++g) grid[g] = lo * (1.0 - static_cast<double>(g) / (cfg.alloc_grid_points - 1));
  std::ostringstream runs, mean, analytic;
  runs << "arm,run,log_x_start,log_x_end,n_live\n";
  mean << "arm,log_x,mean_n_live\n";
  analytic << "arm,log_x,relative_mass,mass_remaining,tuned_importance\n";
  for (std::size_t a = 0; a < profiles.size(); ++a) {
    const std::string& name = cfg.arms.at(a).name;
    double area = 0.0;
    for (std::size_t r = 0; r < profiles[a].size(); ++r) {
      const auto& p = profiles[a][r];
      area += p.area();
      for (std::size_t i = 0; i < p.n_live.size(); ++i)
        runs << name << ',' << r << ',' << format_number(p.log_x[i]) << ',' << format_number(p.log_x_next[i]) << ','
             << p.n_live[i] << '\n';
    }
    area = profiles[a].empty() ? 0.0 : area / static_cast<double>(profiles[a].size());
    rep.mean_area.push_back(area);
    const auto m = mean_allocation(profiles[a], grid);
    for (std::size_t g = 0; g < grid.size(); ++g)
      mean << name << ',' << format_number(grid[g]) << ',' << format_number(m[g]) << '\n';
    if (area <= 0.0) continue;
    const auto c = analytic_curves(cfg.model, lo, cfg.alloc_grid_points, area);
    for (std::size_t g = 0; g < c.log_x.size(); ++g)
      analytic << name << ',' << format_number(c.log_x[g]) << ',' << format_number(c.relative_mass[g]) << ','
               << format_number(c.mass_remaining[g]) << ',' << format_number(c.tuned_importance[g]) << '\n';
  }
  rep.runs_csv = runs.str();
  rep.mean_csv = mean.str();
  rep.analytic_csv = analytic.str();
  return rep;
}

struct BootstrapTable {
  std::vector<std::string> estimator_names;
  std::vector<std::string> row_names;
  std::vector<std::vector<double>> value;  // [row][estimator]
  std::vector<std::vector<double>> unc;

  std::string to_csv() const {
    std::ostringstream s;
    s << "row";
    for (const auto& n : estimator_names) s << ',' << n << ',' << n << "_unc";
    s << '\n';
    for (std::size_t r = 0; r < row_names.size(); ++r) {
      s << row_names[r];
      for (std::size_t e = 0; e < estimator_names.size(); ++e)
        s << ',' << format_number(value[r][e]) << ',' << format_number(unc[r][e]);
      s << '\n';
    }
    return s.str();
  }
};

/// Per-run inputs of the bootstrap table.
struct BootstrapRunSummary {
  std::vector<double> estimate;
  std::vector<double> boot_std;
  std::vector<double> boot_upper;
};

inline BootstrapRunSummary summarise_bootstrap(const NestedRun& run, const std::vector<EstimatorId>& ids, int n_reps,
                                               bool separate_initial, double q, std::uint64_t seed) {
  Rng rng = make_rng(seed, 0xb007);
  BootstrapRunSummary s;
  s.estimate = estimate_all(run, ids);
  const auto reps = bootstrap_replications(run, ids, n_reps, rng, separate_initial);
  for (const auto& r : reps) {
    const auto e = summarise_replications(r, q);
    s.boot_std.push_back(e.std);
    s.boot_upper.push_back(e.credible_upper);
  }
  return s;
}

inline const char* const kBootstrapRows[] = {"mean_result",      "repeats_stdev",  "bootstrap_stdev_ratio",
                                             "bootstrap_stdev_variation_pct", "bootstrap_credible_upper",
                                             "coverage_1sigma_pct", "coverage_credible_pct"};

/// Seven rows: mean result, St.Dev. over repeats, mean bootstrap St.Dev. /
/// repeats St.Dev., spread of bootstrap St.Dev. (% of mean), mean bootstrap
/// upper credible bound, and the coverage of estimate +- bootstrap St.Dev.
/// and of the upper bound. Where no true value is known the mean result
/// stands in for it.
inline BootstrapTable build_bootstrap_table(const std::vector<EstimatorId>& ids,
                                            const std::vector<BootstrapRunSummary>& runs,
                                            const std::vector<double>& truth) {
  if (runs.size() < 3) throw std::invalid_argument("bootstrap table: need at least three runs");
  BootstrapTable t;
  for (const auto& e : ids) t.estimator_names.push_back(e.name());
  for (const char* r : kBootstrapRows) t.row_names.push_back(r);
  const std::size_t ne = ids.size();
  t.value.assign(7, std::vector<double>(ne));
  t.unc.assign(7, std::vector<double>(ne));
  const double n = static_cast<double>(runs.size());
  for (std::size_t e = 0; e < ne; ++e) {
    std::vector<double> est, bstd, upper;
    for (const auto& r : runs) {
      est.push_back(r.estimate[e]);
      bstd.push_back(r.boot_std[e]);
      upper.push_back(r.boot_upper[e]);
    }
    const double mean = sample_mean(est);
    const auto rep_sd = jackknife_std(est);
    const double ref = std::isnan(truth[e]) ? mean : truth[e];
    const double mean_b = sample_mean(bstd);
    const double se_b = sample_std(bstd) / std::sqrt(n);
    t.value[0][e] = mean;
    t.unc[0][e] = rep_sd.std / std::sqrt(n);
    t.value[1][e] = rep_sd.std;
    t.unc[1][e] = rep_sd.error;
    const double ratio = mean_b / rep_sd.std;
    t.value[2][e] = ratio;
    t.unc[2][e] = ratio * std::hypot(se_b / mean_b, rep_sd.error / rep_sd.std);
    const auto b_sd = jackknife_std(bstd);
    t.value[3][e] = 100.0 * b_sd.std / mean_b;
    t.unc[3][e] = 100.0 * std::hypot(b_sd.error / mean_b, b_sd.std * se_b / (mean_b * mean_b));
    t.value[4][e] = sample_mean(upper);
    t.unc[4][e] = sample_std(upper) / std::sqrt(n);
    double in_1s = 0.0, in_ci = 0.0;
    for (std::size_t r = 0; r < runs.size(); ++r) {
      if (std::fabs(est[r] - ref) <= bstd[r]) in_1s += 1.0;
      if (ref <= upper[r]) in_ci += 1.0;
    }
    const double p1 = in_1s / n, p2 = in_ci / n;
    t.value[5][e] = 100.0 * p1;
    t.unc[5][e] = 100.0 * std::sqrt(p1 * (1.0 - p1) / n);
    t.value[6][e] = 100.0 * p2;
    t.unc[6][e] = 100.0 * std::sqrt(p2 * (1.0 - p2) / n);
  }
  return t;
}

inline std::size_t bootstrap_arm_index(const ExperimentConfig& cfg) {
  if (!cfg.bootstrap.arm.empty()) {
    for (std::size_t a = 0; a < cfg.arms.size(); ++a)
      if (cfg.arms[a].name == cfg.bootstrap.arm) return a;
    throw std::invalid_argument("bootstrap arm not found: " + cfg.bootstrap.arm);
  }
  for (std::size_t a = 0; a < cfg.arms.size(); ++a)
    if (cfg.arms[a].method != Method::Standard) return a;
  return 0;
}

}  // namespace dynns
