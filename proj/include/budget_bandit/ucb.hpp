#pragma once

// Optimistic budget allocation under censored feedback.
//
// Per task k the allocator keeps N_k (number of observed completions) and S_k (sum of the
// rewards seen on those completions). Its optimistic index is
//
//   UCB_k = S_k / N_k + sqrt( log(2/delta) / (1 + N_k) ),     with 0/0 := 0,
//
// and each round it plays the simplex point maximizing sum_k UCB_k F_k(x_k).
// The state is a plain value; select() and update() are pure.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "budget_bandit/environment.hpp"
#include "budget_bandit/errors.hpp"
#include "budget_bandit/oracle.hpp"
#include "json.hpp"

namespace budget_bandit {

// Largest default confidence parameter; the coverage argument needs delta <= 1/2.
inline constexpr double kMaxDefaultDelta = 0.5;

struct UcbState {
  std::size_t tasks = 0;
  double delta = 0.5;
  std::vector<std::uint64_t> counts;
  std::vector<double> reward_sums;
  std::uint64_t round = 0;

  bool operator==(const UcbState&) const = default;
};

// delta defaults to min(1/(K T)^2, 1/2).
inline double default_delta(std::size_t tasks, std::uint64_t horizon) {
  const double kt = static_cast<double>(tasks) * static_cast<double>(horizon);
  return std::min(1.0 / (kt * kt), kMaxDefaultDelta);
}

inline UcbState make_ucb_state(std::size_t tasks, std::uint64_t horizon,
                               std::optional<double> delta_override = std::nullopt) {
  if (tasks == 0) throw ConfigError("allocator needs at least one task");
  if (horizon == 0) throw ConfigError("horizon must be at least 1");
  UcbState s;
  s.tasks = tasks;
  if (delta_override) {
    if (!(*delta_override > 0.0 && *delta_override < 1.0)) {
      throw DomainError("delta must lie in (0,1), got " + std::to_string(*delta_override));
    }
    s.delta = *delta_override;
  } else {
    s.delta = default_delta(tasks, horizon);
  }
  s.counts.assign(tasks, 0);
  s.reward_sums.assign(tasks, 0.0);
  return s;
}

inline double confidence_bonus(double delta, std::uint64_t count) {
  return std::sqrt(std::log(2.0 / delta) / (1.0 + static_cast<double>(count)));
}

inline std::vector<double> ucb_vector(const UcbState& state) {
  std::vector<double> ucb(state.tasks);
  for (std::size_t k = 0; k < state.tasks; ++k) {
    const double mean = state.counts[k] == 0
                            ? 0.0
                            : state.reward_sums[k] / static_cast<double>(state.counts[k]);
    ucb[k] = mean + confidence_bonus(state.delta, state.counts[k]);
  }
  return ucb;
}

inline Allocation select(const UcbState& state, std::span<const CurveSpec> curves) {
  if (curves.size() != state.tasks) {
    throw ConfigError("allocator tracks " + std::to_string(state.tasks) + " tasks but got " +
                      std::to_string(curves.size()) + " curves");
  }
  const auto ucb = ucb_vector(state);
  return maximize(ucb, curves).allocation;
}

// Folds one round of censored feedback into the statistics. Full-information rewards, when
// present, are ignored.
inline UcbState update(UcbState state, const Feedback& feedback) {
  if (feedback.completions.size() != state.tasks) {
    throw ContractError("feedback dimension does not match the allocator's task count");
  }
  if (!feedback.censored_rewards) {
    throw ContractError("allocator update requires censored rewards");
  }
  const auto& censored = *feedback.censored_rewards;
  if (censored.size() != state.tasks) {
    throw ContractError("censored reward vector has the wrong dimension");
  }
  for (std::size_t k = 0; k < state.tasks; ++k) {
    if (feedback.completions[k]) {
      state.counts[k] += 1;
      state.reward_sums[k] += censored[k];
    }
  }
  state.round += 1;
  return state;
}

inline nlohmann::json ucb_state_to_json(const UcbState& s) {
  return nlohmann::json{{"tasks", s.tasks},
                        {"delta", s.delta},
                        {"counts", s.counts},
                        {"reward_sums", s.reward_sums},
                        {"round", s.round}};
}

inline UcbState ucb_state_from_json(const nlohmann::json& j) {
  try {
    UcbState s;
    s.tasks = j.at("tasks").get<std::size_t>();
    s.delta = j.at("delta").get<double>();
    s.counts = j.at("counts").get<std::vector<std::uint64_t>>();
    s.reward_sums = j.at("reward_sums").get<std::vector<double>>();
    s.round = j.at("round").get<std::uint64_t>();
    if (s.counts.size() != s.tasks || s.reward_sums.size() != s.tasks) {
      throw ConfigError("allocator snapshot: vector lengths do not match \"tasks\"");
    }
    if (!(s.delta > 0.0 && s.delta < 1.0)) throw ConfigError("allocator snapshot: bad delta");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("allocator snapshot: ") + e.what());
  }
}

}  // namespace budget_bandit
