// Command-line driver: generate run ensembles and emit comparison,
// allocation-profile and bootstrap tables as CSV.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dynns/experiment.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace dynns;

namespace {

struct Options {
  std::string config;
  std::string out = "out";
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
};

// Config from --config, else the one recorded by generate.
ExperimentConfig resolve_config(const Options& o, bool need_file) {
  ExperimentConfig cfg;
  if (!o.config.empty()) {
    cfg = load_config(o.config);
  } else if (!need_file) {
    cfg = config_from_json(load_manifest(o.out).at("config"));
  } else {
    throw std::invalid_argument("--config is required");
  }
  if (o.workers) cfg.workers = *o.workers;
  if (o.seed) cfg.seed = *o.seed;
  cfg.validate();
  return cfg;
}

std::vector<std::vector<NestedRun>> load_arm_runs(const ExperimentConfig& cfg, const fs::path& dir,
                                                  const std::vector<std::size_t>& arms) {
  const auto paths = manifest_run_paths(cfg, load_manifest(dir), dir);
  std::vector<std::vector<NestedRun>> out(cfg.arms.size());
  for (std::size_t a : arms) {
    std::vector<std::optional<NestedRun>> slots(paths[a].size());
    parallel_for(paths[a].size(), cfg.workers, [&](std::size_t r) { slots[r] = load_run(paths[a][r].string()); });
    for (auto& s : slots) out[a].push_back(std::move(*s));
  }
  return out;
}

void report(const fs::path& path) { std::cout << path.string() << '\n'; }

void cmd_generate(const Options& o) {
  const auto cfg = resolve_config(o, true);
  const auto manifest = generate_to_directory(cfg, o.out);
  for (const auto& arm : manifest.at("arms"))
    std::cout << arm.at("name").get<std::string>() << ": " << arm.at("files").size() << " runs, mean samples "
              << arm.at("mean_samples").get<double>() << '\n';
  report(fs::path(o.out) / "manifest.json");
}

void cmd_compare(const Options& o) {
  const auto cfg = resolve_config(o, false);
  const auto results = results_from_directory(cfg, o.out);
  const auto rep = build_report(cfg, results, true_values(cfg.model, cfg.estimators));
  const auto path = fs::path(o.out) / "compare.csv";
  write_text_file(path, rep.to_csv());
  report(path);
}

void cmd_alloc_profile(const Options& o) {
  const auto cfg = resolve_config(o, false);
  std::vector<std::size_t> all(cfg.arms.size());
  for (std::size_t a = 0; a < all.size(); ++a) all[a] = a;
  const auto runs = load_arm_runs(cfg, o.out, all);
  std::vector<std::vector<AllocationProfile>> profiles(cfg.arms.size());
  for (std::size_t a = 0; a < runs.size(); ++a)
    for (const auto& r : runs[a]) profiles[a].push_back(allocation_profile(r));
  const auto rep = build_allocation_report(cfg, profiles);
  const fs::path dir(o.out);
  write_text_file(dir / "alloc_runs.csv", rep.runs_csv);
  write_text_file(dir / "alloc_mean.csv", rep.mean_csv);
  write_text_file(dir / "alloc_analytic.csv", rep.analytic_csv);
  for (const char* f : {"alloc_runs.csv", "alloc_mean.csv", "alloc_analytic.csv"}) report(dir / f);
}

void cmd_bootstrap_table(const Options& o) {
  const auto cfg = resolve_config(o, false);
  const std::size_t arm = bootstrap_arm_index(cfg);
  const auto runs = load_arm_runs(cfg, o.out, {arm});
  const auto& ensemble = runs[arm];
  if (ensemble.size() < 3)
    throw std::invalid_argument("bootstrap-table: need at least three runs to estimate the repeats St.Dev.");
  const auto base_seed = splitmix64(cfg.seed ^ 0xb0075eedull);
  std::vector<BootstrapRunSummary> summaries(ensemble.size());
  parallel_for(ensemble.size(), cfg.workers, [&](std::size_t r) {
    summaries[r] = summarise_bootstrap(ensemble[r], cfg.estimators, cfg.bootstrap.n_reps,
                                       cfg.bootstrap.separate_initial, cfg.bootstrap.credible_q, base_seed + r);
  });
  const auto table = build_bootstrap_table(cfg.estimators, summaries, true_values(cfg.model, cfg.estimators));
  const auto path = fs::path(o.out) / "bootstrap_table.csv";
  write_text_file(path, table.to_csv());
  report(path);
}

int fail(const std::string& command, const std::string& type, const std::string& message, int code) {
  nlohmann::json err{{"error", {{"command", command}, {"type", type}, {"message", message}}}};
  std::cerr << err.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic nested sampling experiments"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "experiment config (JSON)");
    sub->add_option("--out", o.out, "output directory")->capture_default_str();
    sub->add_option("--workers", o.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--seed", o.seed, "override the config seed");
  };
  struct Command {
    const char* name;
    const char* help;
    void (*run)(const Options&);
  };
  const std::vector<Command> commands{
      {"generate", "generate run ensembles and a manifest", cmd_generate},
      {"compare", "per-arm statistics and efficiency gains", cmd_compare},
      {"alloc-profile", "live-point allocation plot data", cmd_alloc_profile},
      {"bootstrap-table", "bootstrap error calibration table", cmd_bootstrap_table},
  };
  std::vector<CLI::App*> subs;
  for (const auto& c : commands) {
    subs.push_back(app.add_subcommand(c.name, c.help));
    add_common(subs.back());
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("parse", "usage", e.what(), 2);
  }
  for (std::size_t i = 0; i < commands.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    try {
      commands[i].run(o);
      return 0;
    } catch (const std::invalid_argument& e) {
      return fail(commands[i].name, "invalid_argument", e.what(), 3);
    } catch (const std::exception& e) {
      return fail(commands[i].name, "runtime", e.what(), 1);
    }
  }
  return fail("parse", "usage", "no command given", 2);
}
