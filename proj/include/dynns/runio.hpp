#pragma once

// JSON persistence for runs. Points are stored as parallel arrays; -inf
// births are written as null because JSON has no infinities.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dynns/model.hpp"
#include "dynns/run.hpp"
#include "json.hpp"

namespace dynns {

inline constexpr int kRunFileVersion = 1;

inline nlohmann::json model_to_json(const ModelSpec& m) {
  nlohmann::json j{{"family", std::string(family_name(m.family))}, {"d", m.dim}, {"sigma_pi", m.prior_sigma}};
  j["b"] = m.shape_b;
  return j;
}

inline ModelSpec model_from_json(const nlohmann::json& j) {
  ModelSpec m;
  m.family = parse_family(j.at("family").get<std::string>());
  m.dim = j.at("d").get<int>();
  m.prior_sigma = j.at("sigma_pi").get<double>();
  m.shape_b = j.value("b", 1.0);
  m.validate();
  return m;
}

inline nlohmann::json provenance_to_json(const Provenance& p) {
  return {{"seed", p.seed},
          {"algorithm", p.algorithm},
          {"n_live", p.n_live},
          {"goal", p.goal},
          {"importance", p.importance},
          {"budget", p.budget},
          {"n_initial_threads", p.n_initial_threads},
          {"run_index", p.run_index}};
}

inline Provenance provenance_from_json(const nlohmann::json& j) {
  Provenance p;
  p.seed = j.at("seed").get<std::uint64_t>();
  p.algorithm = j.at("algorithm").get<std::string>();
  p.n_live = j.at("n_live").get<int>();
  p.goal = j.at("goal").get<double>();
  p.importance = j.at("importance").get<std::string>();
  p.budget = j.at("budget").get<std::int64_t>();
  p.n_initial_threads = j.at("n_initial_threads").get<int>();
  p.run_index = j.at("run_index").get<std::int64_t>();
  return p;
}

namespace detail {

inline nlohmann::json log_value(double v) { return v == kNegInf ? nlohmann::json(nullptr) : nlohmann::json(v); }

inline double log_value_from(const nlohmann::json& j) { return j.is_null() ? kNegInf : j.get<double>(); }

}  // namespace detail

inline nlohmann::json run_to_json(const NestedRun& run) {
  nlohmann::json log_l = nlohmann::json::array(), birth = nlohmann::json::array(), theta1 = nlohmann::json::array(),
                 radius = nlohmann::json::array(), true_log_x = nlohmann::json::array(),
                 thread = nlohmann::json::array();
  for (const auto& p : run.points()) {
    log_l.push_back(p.log_l);
    birth.push_back(detail::log_value(p.birth_log_l));
    theta1.push_back(p.theta1);
    radius.push_back(p.radius);
    true_log_x.push_back(detail::log_value(p.true_log_x));
    thread.push_back(p.thread_id);
  }
  nlohmann::json open_birth = nlohmann::json::array(), open_thread = nlohmann::json::array();
  for (const auto& o : run.open_threads()) {
    open_birth.push_back(detail::log_value(o.birth_log_l));
    open_thread.push_back(o.thread_id);
  }
  return {{"version", kRunFileVersion},
          {"model", model_to_json(run.model())},
          {"provenance", provenance_to_json(run.provenance())},
          {"points",
           {{"log_l", log_l},
            {"birth_log_l", birth},
            {"theta1", theta1},
            {"radius", radius},
            {"true_log_x", true_log_x},
            {"thread_id", thread}}},
          {"open_threads", {{"birth_log_l", open_birth}, {"thread_id", open_thread}}}};
}

inline NestedRun run_from_json(const nlohmann::json& j) {
  const int version = j.at("version").get<int>();
  if (version != kRunFileVersion)
    throw std::runtime_error("unsupported run file version " + std::to_string(version));
  const auto& pts = j.at("points");
  const auto& log_l = pts.at("log_l");
  const std::size_t n = log_l.size();
  for (const char* key : {"birth_log_l", "theta1", "radius", "true_log_x", "thread_id"})
    if (pts.at(key).size() != n) throw std::runtime_error(std::string("run file: column size mismatch in ") + key);
  std::vector<SamplePoint> points(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& p = points[i];
    p.log_l = log_l[i].get<double>();
    p.birth_log_l = detail::log_value_from(pts["birth_log_l"][i]);
    p.theta1 = pts["theta1"][i].get<double>();
    p.radius = pts["radius"][i].get<double>();
    p.true_log_x = detail::log_value_from(pts["true_log_x"][i]);
    p.thread_id = pts["thread_id"][i].get<std::int64_t>();
  }
  std::vector<OpenThread> open;
  if (j.contains("open_threads")) {
    const auto& o = j["open_threads"];
    if (o.at("birth_log_l").size() != o.at("thread_id").size())
      throw std::runtime_error("run file: open thread columns differ in size");
    for (std::size_t i = 0; i < o["thread_id"].size(); ++i)
      open.push_back({detail::log_value_from(o["birth_log_l"][i]), o["thread_id"][i].get<std::int64_t>()});
  }
  return NestedRun(std::move(points), model_from_json(j.at("model")), provenance_from_json(j.at("provenance")),
                   std::move(open));
}

inline std::string run_to_string(const NestedRun& run) { return run_to_json(run).dump(); }

inline void save_run(const NestedRun& run, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << run_to_string(run) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline NestedRun load_run(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open run file: " + path);
  try {
    return run_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed run file " + path + ": " + e.what());
  }
}

}  // namespace dynns
