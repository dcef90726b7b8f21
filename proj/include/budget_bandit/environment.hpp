#pragma once

// The budget-allocation environment: K tasks, each with a budget-to-success curve and a
// [0,1]-valued reward law. Each round the learner splits a unit budget across tasks; task k
// completes with probability F_k(x_k) and, if it does, pays its reward.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "budget_bandit/allocation.hpp"
#include "budget_bandit/curves.hpp"
#include "budget_bandit/errors.hpp"
#include "budget_bandit/oracle.hpp"
#include "budget_bandit/rng.hpp"
#include "json.hpp"

namespace budget_bandit {

struct Bernoulli {
  double mean;
};

struct PointMass {
  double value;
};

struct DiscreteOnUnit {
  std::vector<double> values;
  std::vector<double> probs;
};

class RewardDistribution {
 public:
  using Law = std::variant<Bernoulli, PointMass, DiscreteOnUnit>;

  static RewardDistribution bernoulli(double mean) {
    if (!(mean >= 0.0 && mean <= 1.0)) {
      throw DomainError("Bernoulli mean must lie in [0,1], got " + std::to_string(mean));
    }
    return RewardDistribution(Bernoulli{mean});
  }

  static RewardDistribution point_mass(double value) {
    if (!(value >= 0.0 && value <= 1.0)) {
      throw DomainError("point-mass value must lie in [0,1], got " + std::to_string(value));
    }
    return RewardDistribution(PointMass{value});
  }

  static RewardDistribution discrete(std::vector<double> values, std::vector<double> probs) {
    if (values.empty() || values.size() != probs.size()) {
      throw DomainError("discrete reward law needs matching, non-empty values and probs");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!(values[i] >= 0.0 && values[i] <= 1.0)) {
        throw DomainError("discrete reward value must lie in [0,1]");
      }
      if (!(probs[i] >= 0.0)) throw DomainError("discrete reward probability must be non-negative");
      total += probs[i];
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw DomainError("discrete reward probabilities sum to " + std::to_string(total));
    }
    return RewardDistribution(DiscreteOnUnit{std::move(values), std::move(probs)});
  }

  const Law& law() const noexcept { return law_; }

  double mean() const {
    return std::visit(detail::overloaded{
                          [](const Bernoulli& b) { return b.mean; },
                          [](const PointMass& p) { return p.value; },
                          [](const DiscreteOnUnit& d) {
                            double m = 0.0;
                            for (std::size_t i = 0; i < d.values.size(); ++i) m += d.values[i] * d.probs[i];
                            return m;
                          }},
                      law_);
  }

  // Inverse-CDF sample from one uniform u in [0,1).
  double sample(double u) const {
    return std::visit(detail::overloaded{
                          [u](const Bernoulli& b) { return u < b.mean ? 1.0 : 0.0; },
                          [](const PointMass& p) { return p.value; },
                          [u](const DiscreteOnUnit& d) {
                            double cdf = 0.0;
                            for (std::size_t i = 0; i < d.values.size(); ++i) {
                              cdf += d.probs[i];
                              if (u < cdf) return d.values[i];
                            }
                            return d.values.back();
                          }},
                      law_);
  }

 private:
  explicit RewardDistribution(Law law) : law_(std::move(law)) {}
  Law law_;
};

class Instance {
 public:
  Instance(std::vector<CurveSpec> curves, std::vector<RewardDistribution> rewards)
      : curves_(std::move(curves)), rewards_(std::move(rewards)) {
    if (curves_.empty()) throw ConfigError("instance needs at least one task");
    if (curves_.size() != rewards_.size()) {
      throw ConfigError("instance has " + std::to_string(curves_.size()) + " curves but " +
                        std::to_string(rewards_.size()) + " reward laws");
    }
  }

  std::size_t size() const noexcept { return curves_.size(); }
  std::span<const CurveSpec> curves() const noexcept { return curves_; }
  std::span<const RewardDistribution> rewards() const noexcept { return rewards_; }

  std::vector<double> means() const {
    std::vector<double> mu;
    mu.reserve(rewards_.size());
    for (const auto& r : rewards_) mu.push_back(r.mean());
    return mu;
  }

 private:
  std::vector<CurveSpec> curves_;
  std::vector<RewardDistribution> rewards_;
};

enum class FeedbackMode { Censored, Full };

struct Feedback {
  std::vector<std::uint8_t> completions;
  // B_k * G_k per task. Absent only in hand-built full-information records.
  std::optional<std::vector<double>> censored_rewards;
  // G_k per task; present only in Full mode.
  std::optional<std::vector<double>> full_rewards;
  double realized_gain = 0.0;
};

namespace detail {

inline void check_dimensions(const Instance& instance, const Allocation& allocation) {
  if (allocation.size() != instance.size()) {
    throw ConfigError("allocation has " + std::to_string(allocation.size()) +
                      " entries but the instance has " + std::to_string(instance.size()) +
                      " tasks");
  }
}

}  // namespace detail

// One round of interaction. Task k's completion and reward draws come from the Completions and
// Rewards substreams under the label stream_labels[k] (default: k), so swapping curves never
// perturbs reward draws and relabelled instances can replay paired randomness.
inline Feedback step(const Instance& instance, const Allocation& allocation, FeedbackMode mode,
                     const CounterRng& rng, std::span<const std::uint64_t> stream_labels = {}) {
  detail::check_dimensions(instance, allocation);
  const std::size_t n = instance.size();
  if (!stream_labels.empty() && stream_labels.size() != n) {
    throw ConfigError("stream label count does not match the task count");
  }
  Feedback fb;
  fb.completions.resize(n);
  std::vector<double> censored(n), full(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::uint64_t label = stream_labels.empty() ? k : stream_labels[k];
    const double p = eval(instance.curves()[k], allocation[k]);
    const bool done = rng.uniform(Substream::Completions, label) < p;
    full[k] = instance.rewards()[k].sample(rng.uniform(Substream::Rewards, label));
    fb.completions[k] = done ? 1 : 0;
    censored[k] = done ? full[k] : 0.0;
    fb.realized_gain += censored[k];
  }
  fb.censored_rewards = std::move(censored);
  if (mode == FeedbackMode::Full) fb.full_rewards = std::move(full);
  return fb;
}

// <mu, F(x)>
inline double expected_reward(const Instance& instance, const Allocation& allocation) {
  detail::check_dimensions(instance, allocation);
  const auto mu = instance.means();
  return objective(mu, instance.curves(), allocation.weights());
}

struct OptimalPlay {
  Allocation allocation;
  double value;
};

// sup_x <mu, F(x)> for instances with an exact oracle.
inline OptimalPlay optimal_value(const Instance& instance) {
  if (!has_exact_oracle(instance.curves())) {
    throw UnsupportedInstance(
        "no exact oracle for this curve mix (all tasks must be step, or all concave power / "
        "piecewise-linear); use the grid oracle (maximize_grid) instead");
  }
  auto result = maximize(instance.means(), instance.curves());
  return {std::move(result.allocation), result.value};
}

// {"type":"bernoulli","mean":0.5} | {"type":"point","value":0.3}
// | {"type":"discrete","values":[...],"probs":[...]}
inline RewardDistribution reward_from_json(const nlohmann::json& j,
                                           const std::string& where = "reward") {
  const std::string type = detail::require_string(j, "type", where);
  try {
    if (type == "bernoulli") {
      return RewardDistribution::bernoulli(detail::require_number(j, "mean", where));
    }
    if (type == "point") {
      return RewardDistribution::point_mass(detail::require_number(j, "value", where));
    }
    if (type == "discrete") {
      if (!j.contains("values") || !j.contains("probs")) {
        throw ConfigError(where + ": discrete law needs \"values\" and \"probs\"");
      }
      return RewardDistribution::discrete(j.at("values").get<std::vector<double>>(),
                                          j.at("probs").get<std::vector<double>>());
    }
  } catch (const DomainError& e) {
    throw ConfigError(where + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
  throw ConfigError(where + ": unknown reward type \"" + type + "\"");
}

inline nlohmann::json reward_to_json(const RewardDistribution& r) {
  return std::visit(detail::overloaded{
                        [](const Bernoulli& b) {
                          return nlohmann::json{{"type", "bernoulli"}, {"mean", b.mean}};
                        },
                        [](const PointMass& p) {
                          return nlohmann::json{{"type", "point"}, {"value", p.value}};
                        },
                        [](const DiscreteOnUnit& d) {
                          return nlohmann::json{
                              {"type", "discrete"}, {"values", d.values}, {"probs", d.probs}};
                        }},
                    r.law());
}

// {"tasks":[{"curve":{...},"reward":{...}}, ...]}
inline Instance instance_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("tasks") || !j.at("tasks").is_array()) {
    throw ConfigError("instance: missing field \"tasks\"");
  }
  std::vector<CurveSpec> curves;
  std::vector<RewardDistribution> rewards;
  std::size_t k = 0;
  for (const auto& task : j.at("tasks")) {
    const std::string where = "instance.tasks[" + std::to_string(k++) + "]";
    if (!task.is_object() || !task.contains("curve")) {
      throw ConfigError(where + ": missing field \"curve\"");
    }
    if (!task.contains("reward")) throw ConfigError(where + ": missing field \"reward\"");
    curves.push_back(curve_from_json(task.at("curve"), where + ".curve"));
    rewards.push_back(reward_from_json(task.at("reward"), where + ".reward"));
  }
  return Instance(std::move(curves), std::move(rewards));
}

inline nlohmann::json instance_to_json(const Instance& instance) {
  nlohmann::json tasks = nlohmann::json::array();
  for (std::size_t k = 0; k < instance.size(); ++k) {
    tasks.push_back({{"curve", curve_to_json(instance.curves()[k])},
                     {"reward", reward_to_json(instance.rewards()[k])}});
  }
  return nlohmann::json{{"tasks", tasks}};
}

}  // namespace budget_bandit
