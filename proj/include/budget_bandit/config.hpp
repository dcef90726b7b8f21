#pragma once

// JSON experiment configuration (schema version 1).
//
//   {
//     "schema": 1,
//     "seed": 7,
//     "instance": {"tasks": [...]}                          -- or --
//     "family": {"type": "hard", "K": 2, "pattern": [1, 2]}
//     "family": {"type": "power", "exponents": [...], "means": [...]}
//     "horizon": 4096,                  (run, diagnose)
//     "horizons": [256, 512, 1024],     (sweep)
//     "replications": 50,
//     "delta": 0.01,                    (optional override)
//     "checkpoints": [1, 10, 100]       (optional)
//   }
//
// Oracle queries: {"schema": 1, "weights": [...], "curves": [...],
//                  "method": "auto" | "concave" | "step" | "grid", "resolution": 500}

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "budget_bandit/curves.hpp"
#include "budget_bandit/environment.hpp"
#include "budget_bandit/errors.hpp"
#include "budget_bandit/harness.hpp"
#include "budget_bandit/oracle.hpp"
#include "json.hpp"

namespace budget_bandit {

inline constexpr int kConfigSchemaVersion = 1;

inline nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file \"" + path + "\"");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file \"" + path + "\" is not valid JSON: " + e.what());
  }
}

namespace detail {

inline void check_schema(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  if (!j.contains("schema")) throw ConfigError("config: missing field \"schema\"");
  if (!j.at("schema").is_number_integer() || j.at("schema").get<int>() != kConfigSchemaVersion) {
    throw ConfigError("config: field \"schema\" must be 1");
  }
}

template <class T>
T get_field(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("config: missing field \"") + key + "\"");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config: field \"") + key + "\" has the wrong type");
  }
}

inline std::uint64_t get_positive(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) throw ConfigError(std::string("config: missing field \"") + key + "\"");
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 1) {
    throw ConfigError(std::string("config: field \"") + key + "\" must be a positive integer");
  }
  return v.get<std::uint64_t>();
}

template <class T>
std::optional<T> get_optional(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return get_field<T>(j, key);
}

}  // namespace detail

inline InstanceGenerator parse_generator(const nlohmann::json& j) {
  const bool has_instance = j.contains("instance");
  const bool has_family = j.contains("family");
  if (has_instance == has_family) {
    throw ConfigError("config: exactly one of \"instance\" or \"family\" is required");
  }
  if (has_instance) return FixedFamily{instance_from_json(j.at("instance")), "custom"};

  const auto& f = j.at("family");
  const std::string type = detail::require_string(f, "type", "family");
  if (type == "hard") {
    const auto pairs = detail::get_positive(f, "K");
    HardFamily h{static_cast<std::size_t>(pairs), detail::get_optional<std::vector<int>>(f, "pattern")};
    if (h.pattern) {
      if (h.pattern->size() != h.pairs) throw ConfigError("family: \"pattern\" must have K entries");
      for (int p : *h.pattern) {
        if (p != 1 && p != 2) throw ConfigError("family: \"pattern\" entries must be 1 or 2");
      }
    }
    return h;
  }
  if (type == "power") {
    PowerFamily p{detail::get_field<std::vector<double>>(f, "exponents"),
                  detail::get_field<std::vector<double>>(f, "means")};
    try {
      (void)make_power_instance(p.exponents, p.means);
    } catch (const DomainError& e) {
      throw ConfigError(std::string("family: ") + e.what());
    }
    return p;
  }
  throw ConfigError("family: unknown type \"" + type + "\" (expected \"hard\" or \"power\")");
}

namespace detail {

inline void check_horizon_for(const InstanceGenerator& gen, std::uint64_t horizon) {
  if (std::holds_alternative<HardFamily>(gen) && horizon < kMinHardHorizon) {
    throw ConfigError("config: \"horizon\" must be at least 16 for the hard family");
  }
}

inline std::optional<double> parse_delta(const nlohmann::json& j) {
  auto delta = get_optional<double>(j, "delta");
  if (delta && !(*delta > 0.0 && *delta < 1.0)) {
    throw ConfigError("config: field \"delta\" must lie in (0,1)");
  }
  return delta;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  detail::check_schema(j);
  ExperimentConfig c{parse_generator(j), 0, 1, 0, std::nullopt, {}};
  c.horizon = detail::get_positive(j, "horizon");
  detail::check_horizon_for(c.generator, c.horizon);
  c.replications = j.contains("replications") ? detail::get_positive(j, "replications") : 1;
  c.seed = detail::get_field<std::uint64_t>(j, "seed");
  c.delta_override = detail::parse_delta(j);
  if (auto cps = detail::get_optional<std::vector<std::uint64_t>>(j, "checkpoints")) {
    c.checkpoints = *cps;
    validate_checkpoints(c.checkpoints, c.horizon);
  }
  if (const auto* fixed = std::get_if<FixedFamily>(&c.generator);
      fixed && !has_exact_oracle(fixed->instance.curves())) {
    throw ConfigError("instance: curve mix has no exact oracle (use all-step or all-concave curves)");
  }
  return c;
}

struct SweepConfig {
  InstanceGenerator generator;
  std::vector<std::uint64_t> horizons;
  std::size_t replications = 1;
  std::uint64_t seed = 0;
  std::optional<double> delta_override;
};

inline SweepConfig parse_sweep_config(const nlohmann::json& j) {
  detail::check_schema(j);
  SweepConfig c{parse_generator(j), {}, 1, 0, std::nullopt};
  c.horizons = detail::get_field<std::vector<std::uint64_t>>(j, "horizons");
  if (c.horizons.empty()) throw ConfigError("config: field \"horizons\" must not be empty");
  for (std::size_t i = 0; i < c.horizons.size(); ++i) {
    if (c.horizons[i] == 0 || (i > 0 && c.horizons[i] <= c.horizons[i - 1])) {
      throw ConfigError("config: field \"horizons\" must be positive and strictly ascending");
    }
    detail::check_horizon_for(c.generator, c.horizons[i]);
  }
  c.replications = j.contains("replications") ? detail::get_positive(j, "replications") : 1;
  c.seed = detail::get_field<std::uint64_t>(j, "seed");
  c.delta_override = detail::parse_delta(j);
  return c;
}

struct OracleQuery {
  std::vector<double> weights;
  std::vector<CurveSpec> curves;
  std::string method = "auto";
  std::size_t resolution = 0;  // 0: default for the task count
};

inline OracleQuery parse_oracle_query(const nlohmann::json& j) {
  detail::check_schema(j);
  OracleQuery q;
  q.weights = detail::get_field<std::vector<double>>(j, "weights");
  if (!j.contains("curves") || !j.at("curves").is_array()) {
    throw ConfigError("config: missing field \"curves\"");
  }
  std::size_t k = 0;
  for (const auto& c : j.at("curves")) {
    q.curves.push_back(curve_from_json(c, "curves[" + std::to_string(k++) + "]"));
  }
  if (q.weights.size() != q.curves.size()) {
    throw ConfigError("config: \"weights\" and \"curves\" must have the same length");
  }
  q.method = j.value("method", std::string("auto"));
  if (q.method != "auto" && q.method != "concave" && q.method != "step" && q.method != "grid") {
    throw ConfigError("config: field \"method\" must be auto, concave, step or grid");
  }
  if (j.contains("resolution")) q.resolution = detail::get_positive(j, "resolution");
  return q;
}

inline OracleResult solve(const OracleQuery& q) {
  if (q.method == "concave") return maximize_concave(q.weights, q.curves);
  if (q.method == "step") {
    if (!all_step(q.curves)) throw ConfigError("config: method \"step\" needs step curves only");
    return maximize_step(q.weights, step_thresholds(q.curves));
  }
  if (q.method == "grid") {
    return maximize_grid(q.weights, q.curves,
                         q.resolution ? q.resolution : default_grid_resolution(q.curves.size()));
  }
  return maximize(q.weights, q.curves);
}

}  // namespace budget_bandit
