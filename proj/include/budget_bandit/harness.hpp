#pragma once

// Seeded experiments: trajectories of cumulative pseudo-regret, instance generators for the
// worst-case and diminishing-returns families, horizon sweeps and log-log scaling fits.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "budget_bandit/diagnostics.hpp"
#include "budget_bandit/environment.hpp"
#include "budget_bandit/errors.hpp"
#include "budget_bandit/rng.hpp"
#include "budget_bandit/ucb.hpp"

namespace budget_bandit {

// ---------------------------------------------------------------------------------------------
// Instance families

// Smallest horizon for which the worst-case construction is defined.
inline constexpr std::uint64_t kMinHardHorizon = 16;

// Pattern of a hard instance: entry i in {1,2} says which task of pair i carries the bonus.
inline std::vector<int> draw_hard_pattern(std::size_t pairs, std::uint64_t seed) {
  std::vector<int> pattern(pairs);
  const CounterRng rng(seed, 0);
  for (std::size_t i = 0; i < pairs; ++i) {
    pattern[i] = (rng.bits(Substream::Instance, i) >> 63) ? 2 : 1;
  }
  return pattern;
}

// 2K step tasks with threshold 1/K arranged in K pairs; in each pair one task has Bernoulli mean
// 1/2 + 1/sqrt(T) and the other 1/2. Without a pattern, each pair's better task is drawn
// uniformly from `seed`.
inline Instance make_hard_instance(std::size_t pairs, std::uint64_t horizon,
                                   std::optional<std::vector<int>> pattern = std::nullopt,
                                   std::uint64_t seed = 0) {
  if (pairs == 0) throw ConfigError("hard instance needs K >= 1");
  if (horizon < kMinHardHorizon) {
    throw DomainError("hard instance requires T >= 16 (the lower-bound construction assumes it), got " +
                      std::to_string(horizon));
  }
  const std::vector<int> p = pattern ? *pattern : draw_hard_pattern(pairs, seed);
  if (p.size() != pairs) throw ConfigError("hard instance pattern must have K entries");
  const double high = 0.5 + 1.0 / std::sqrt(static_cast<double>(horizon));
  const double theta = 1.0 / static_cast<double>(pairs);
  std::vector<CurveSpec> curves(2 * pairs, CurveSpec::step(theta));
  std::vector<RewardDistribution> rewards;
  rewards.reserve(2 * pairs);
  for (std::size_t i = 0; i < pairs; ++i) {
    if (p[i] != 1 && p[i] != 2) throw ConfigError("hard instance pattern entries must be 1 or 2");
    rewards.push_back(RewardDistribution::bernoulli(p[i] == 1 ? high : 0.5));
    rewards.push_back(RewardDistribution::bernoulli(p[i] == 1 ? 0.5 : high));
  }
  return Instance(std::move(curves), std::move(rewards));
}

// Power curves x^{a_k} with Bernoulli(mu_k) rewards; every mu_k must be non-zero.
inline Instance make_power_instance(std::span<const double> exponents, std::span<const double> means) {
  if (exponents.empty() || exponents.size() != means.size()) {
    throw ConfigError("power instance needs matching, non-empty exponents and means");
  }
  std::vector<CurveSpec> curves;
  std::vector<RewardDistribution> rewards;
  for (std::size_t k = 0; k < exponents.size(); ++k) {
    if (!(means[k] > 0.0 && means[k] <= 1.0)) {
      throw DomainError("power instance means must lie in (0,1]: the diminishing-returns "
                        "regime needs every task mean to be non-zero; task " +
                        std::to_string(k) + " has mean " + std::to_string(means[k]));
    }
    curves.push_back(CurveSpec::power(exponents[k]));
    rewards.push_back(RewardDistribution::bernoulli(means[k]));
  }
  return Instance(std::move(curves), std::move(rewards));
}

struct FixedFamily {
  Instance instance;
  std::string id = "custom";
};

struct HardFamily {
  std::size_t pairs;
  std::optional<std::vector<int>> pattern;
};

struct PowerFamily {
  std::vector<double> exponents;
  std::vector<double> means;
};

// How to build the instance for a given (horizon, replication seed).
using InstanceGenerator = std::variant<FixedFamily, HardFamily, PowerFamily>;

inline Instance instantiate(const InstanceGenerator& gen, std::uint64_t horizon, std::uint64_t seed) {
  return std::visit(detail::overloaded{
                        [](const FixedFamily& f) { return f.instance; },
                        [&](const HardFamily& f) {
                          return make_hard_instance(f.pairs, horizon, f.pattern, seed);
                        },
                        [](const PowerFamily& f) {
                          return make_power_instance(f.exponents, f.means);
                        }},
                    gen);
}

inline std::string family_name(const InstanceGenerator& gen) {
  return std::visit(detail::overloaded{[](const FixedFamily&) { return std::string("custom"); },
                                       [](const HardFamily&) { return std::string("hard"); },
                                       [](const PowerFamily&) { return std::string("power"); }},
                    gen);
}

// The family's K: pair count for hard instances (2K tasks), task count otherwise.
inline std::size_t family_k(const InstanceGenerator& gen) {
  return std::visit(detail::overloaded{[](const FixedFamily& f) { return f.instance.size(); },
                                       [](const HardFamily& f) { return f.pairs; },
                                       [](const PowerFamily& f) { return f.exponents.size(); }},
                    gen);
}

inline std::string instance_id(const InstanceGenerator& gen, std::uint64_t horizon) {
  return std::visit(
      detail::overloaded{
          [](const FixedFamily& f) { return f.id; },
          [&](const HardFamily& f) {
            return "hard-K" + std::to_string(f.pairs) + "-T" + std::to_string(horizon);
          },
          [](const PowerFamily& f) { return "power-K" + std::to_string(f.exponents.size()); }},
      gen);
}

// ---------------------------------------------------------------------------------------------
// Single trajectory

struct CheckpointRow {
  std::uint64_t round;
  double cumulative_regret;
  double realized_gain_sum;
  bool good_event_violated;  // any coverage miss up to this round
};

struct RunResult {
  std::uint64_t seed = 0;
  std::uint64_t horizon = 0;
  std::vector<CheckpointRow> trajectory;
  std::uint64_t good_event_violations = 0;
  bool good_event_violated = false;
  bool completion_antecedent_fired = false;
  bool completion_violated = false;
  std::vector<std::uint64_t> completion_counts;
  std::vector<double> allocated_budget;
  double delta = 0.0;

  double final_regret() const { return trajectory.empty() ? 0.0 : trajectory.back().cumulative_regret; }
};

// Powers of two up to T, plus T itself.
inline std::vector<std::uint64_t> default_checkpoints(std::uint64_t horizon) {
  std::vector<std::uint64_t> c;
  for (std::uint64_t r = 1; r < horizon; r *= 2) c.push_back(r);
  c.push_back(horizon);
  return c;
}

struct RunOptions {
  std::optional<double> delta_override;
  std::vector<std::uint64_t> checkpoints;      // empty: default_checkpoints(T)
  std::vector<std::uint64_t> stream_labels;    // empty: task k draws from label k
  RunTrace* trace = nullptr;                   // optional per-round record
};

inline void validate_checkpoints(std::span<const std::uint64_t> checkpoints, std::uint64_t horizon) {
  for (std::size_t i = 0; i < checkpoints.size(); ++i) {
    if (checkpoints[i] == 0 || checkpoints[i] > horizon) {
      throw ConfigError("checkpoints must lie in [1, horizon]");
    }
    if (i > 0 && checkpoints[i] <= checkpoints[i - 1]) {
      throw ConfigError("checkpoints must be strictly ascending");
    }
  }
}

// T rounds of the optimistic allocator under censored feedback, recording the pseudo-regret
// sum_t [ sup_x <mu,F(x)> - <mu,F(X_t)> ] at each checkpoint.
inline RunResult run_once(const Instance& instance, std::uint64_t horizon, std::uint64_t seed,
                          const RunOptions& options = {}) {
  if (horizon == 0) throw ConfigError("horizon must be at least 1");
  const auto best = optimal_value(instance);
  const std::vector<double> mu = instance.means();
  const auto curves = instance.curves();
  const std::size_t n = instance.size();

  std::vector<std::uint64_t> checkpoints =
      options.checkpoints.empty() ? default_checkpoints(horizon) : options.checkpoints;
  validate_checkpoints(checkpoints, horizon);

  UcbState state = make_ucb_state(n, horizon, options.delta_override);
  GoodEventMonitor coverage(mu, state.delta);
  CompletionMonitor completions(std::vector<CurveSpec>(curves.begin(), curves.end()), horizon);

  RunResult result;
  result.seed = seed;
  result.horizon = horizon;
  result.delta = state.delta;
  result.allocated_budget.assign(n, 0.0);
  result.trajectory.reserve(checkpoints.size());

  double regret = 0.0;
  double gain = 0.0;
  std::size_t next = 0;
  for (std::uint64_t t = 1; t <= horizon; ++t) {
    const Allocation x = select(state, curves);
    regret += best.value - objective(mu, curves, x.weights());
    const Feedback fb = step(instance, x, FeedbackMode::Censored, CounterRng(seed, t),
                             options.stream_labels);
    gain += fb.realized_gain;
    coverage.observe(fb.completions, *fb.censored_rewards);
    completions.observe(x.weights(), fb.completions);
    for (std::size_t k = 0; k < n; ++k) result.allocated_budget[k] += x[k];
    if (options.trace) {
      options.trace->allocations.emplace_back(x.weights().begin(), x.weights().end());
      options.trace->completions.push_back(fb.completions);
      options.trace->censored_rewards.push_back(*fb.censored_rewards);
    }
    state = update(std::move(state), fb);
    if (next < checkpoints.size() && checkpoints[next] == t) {
      result.trajectory.push_back({t, regret, gain, coverage.violated()});
      ++next;
    }
  }
  result.good_event_violations = coverage.violations();
  result.good_event_violated = coverage.violated();
  result.completion_antecedent_fired = completions.antecedent_fired();
  result.completion_violated = completions.violated();
  result.completion_counts = state.counts;
  return result;
}

// ---------------------------------------------------------------------------------------------
// Parallel execution

// Runs fn(i) for i in [0, count) on up to `jobs` threads. Results must be written by index;
// the first exception thrown by any task is rethrown after all workers stop.
template <class Fn>
void parallel_for(std::size_t count, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, count));
  if (jobs == 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> cursor{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  workers.reserve(jobs);
  for (std::size_t w = 0; w < jobs; ++w) {
    workers.emplace_back([&] {
      for (;;) {
        const std::size_t i = cursor.fetch_add(1);
        if (i >= count || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& t : workers) t.join();
  if (error) std::rethrow_exception(error);
}

// ---------------------------------------------------------------------------------------------
// Experiments

struct ExperimentConfig {
  InstanceGenerator generator;
  std::uint64_t horizon = 0;
  std::size_t replications = 1;
  std::uint64_t seed = 0;
  std::optional<double> delta_override;
  std::vector<std::uint64_t> checkpoints;
};

struct ExperimentResult {
  std::string instance_id;
  std::string family;
  std::size_t k = 0;
  std::size_t tasks = 0;
  std::uint64_t horizon = 0;
  double delta = 0.0;
  std::vector<RunResult> runs;  // ordered by replication index
};

inline ExperimentResult run_experiment(const ExperimentConfig& config, std::size_t jobs = 1) {
  if (config.horizon == 0) throw ConfigError("horizon must be at least 1");
  if (config.replications == 0) throw ConfigError("replications must be at least 1");
  validate_checkpoints(config.checkpoints, config.horizon);

  ExperimentResult out;
  out.instance_id = instance_id(config.generator, config.horizon);
  out.family = family_name(config.generator);
  out.k = family_k(config.generator);
  out.horizon = config.horizon;
  out.runs.resize(config.replications);
  parallel_for(config.replications, jobs, [&](std::size_t r) {
    const std::uint64_t seed = derive_seed(config.seed, r);
    const Instance instance = instantiate(config.generator, config.horizon, seed);
    RunOptions opts;
    opts.delta_override = config.delta_override;
    opts.checkpoints = config.checkpoints;
    out.runs[r] = run_once(instance, config.horizon, seed, opts);
  });
  out.tasks = out.runs.front().completion_counts.size();
  out.delta = out.runs.front().delta;
  return out;
}

inline DiagnosticReport good_event_diagnostic(const ExperimentResult& result) {
  std::size_t bad = 0;
  for (const auto& r : result.runs) bad += r.good_event_violated ? 1 : 0;
  return good_event_report(result.runs.size(), bad, result.tasks, result.horizon, result.delta);
}

inline DiagnosticReport completion_count_diagnostic(const ExperimentResult& result) {
  std::size_t bad = 0;
  std::size_t fired = 0;
  for (const auto& r : result.runs) {
    bad += r.completion_violated ? 1 : 0;
    fired += r.completion_antecedent_fired ? 1 : 0;
  }
  return completion_report(result.runs.size(), bad, fired, result.tasks, result.horizon);
}

// ---------------------------------------------------------------------------------------------
// Scaling fits and sweeps

struct ScalingFit {
  double slope;
  double intercept;
  double r_squared;
};

inline constexpr std::size_t kMinFitPoints = 3;

// Ordinary least squares of log(regret) on log(T).
inline ScalingFit fit_scaling(std::span<const std::pair<double, double>> points) {
  if (points.size() < kMinFitPoints) {
    throw DomainError("scaling fit needs at least 3 points, got " + std::to_string(points.size()));
  }
  const double n = static_cast<double>(points.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [t, r] : points) {
    if (!(t > 0.0) || !(r > 0.0)) {
      throw DomainError("scaling fit needs positive horizons and regrets (drop zero-regret rows)");
    }
    mx += std::log(t);
    my += std::log(r);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& [t, r] : points) {
    const double dx = std::log(t) - mx;
    const double dy = std::log(r) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (sxx == 0.0) throw DomainError("scaling fit needs at least two distinct horizons");
  ScalingFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (const auto& [t, r] : points) {
    const double e = std::log(r) - (fit.intercept + fit.slope * std::log(t));
    ss_res += e * e;
  }
  fit.r_squared = syy == 0.0 ? 1.0 : std::clamp(1.0 - ss_res / syy, 0.0, 1.0);
  return fit;
}

struct SweepRow {
  std::uint64_t horizon;
  std::size_t replications;
  double mean_regret;
  double stderr_regret;
  std::optional<double> slope_to_date;  // fit over this and all earlier rows, when possible
};

struct SweepOptions {
  std::optional<double> delta_override;
  std::size_t jobs = 1;
};

// Seed of replication r at horizon T: derive_seed(derive_seed(master, T), r).
inline std::uint64_t sweep_seed(std::uint64_t master, std::uint64_t horizon, std::size_t replication) {
  return derive_seed(derive_seed(master, horizon), replication);
}

inline std::vector<SweepRow> run_sweep(const InstanceGenerator& gen,
                                       std::span<const std::uint64_t> horizons,
                                       std::size_t replications, std::uint64_t master_seed,
                                       const SweepOptions& options = {}) {
  if (horizons.empty()) throw ConfigError("sweep needs at least one horizon");
  if (replications == 0) throw ConfigError("replications must be at least 1");
  for (std::size_t i = 0; i < horizons.size(); ++i) {
    if (horizons[i] == 0) throw ConfigError("horizons must be positive");
    if (i > 0 && horizons[i] <= horizons[i - 1]) {
      throw ConfigError("horizons must be strictly ascending");
    }
  }
  const std::size_t cells = horizons.size() * replications;
  std::vector<double> finals(cells);
  // Longest horizons first so the slowest cells start early.
  parallel_for(cells, options.jobs, [&](std::size_t i) {
    const std::size_t cell = cells - 1 - i;
    const std::uint64_t T = horizons[cell / replications];
    const std::uint64_t seed = sweep_seed(master_seed, T, cell % replications);
    const Instance instance = instantiate(gen, T, seed);
    RunOptions opts;
    opts.delta_override = options.delta_override;
    opts.checkpoints = {T};
    finals[cell] = run_once(instance, T, seed, opts).final_regret();
  });

  std::vector<SweepRow> rows;
  std::vector<std::pair<double, double>> points;
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    double mean = 0.0;
    for (std::size_t r = 0; r < replications; ++r) mean += finals[h * replications + r];
    mean /= static_cast<double>(replications);
    double var = 0.0;
    for (std::size_t r = 0; r < replications; ++r) {
      const double d = finals[h * replications + r] - mean;
      var += d * d;
    }
    const double se = replications > 1
                          ? std::sqrt(var / static_cast<double>(replications - 1) /
                                      static_cast<double>(replications))
                          : 0.0;
    SweepRow row{horizons[h], replications, mean, se, std::nullopt};
    if (mean > 0.0) points.emplace_back(static_cast<double>(horizons[h]), mean);
    if (points.size() >= kMinFitPoints) row.slope_to_date = fit_scaling(points).slope;
    rows.push_back(row);
  }
  return rows;
}

inline std::vector<std::pair<double, double>> sweep_points(std::span<const SweepRow> rows) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : rows) {
    if (r.mean_regret > 0.0) pts.emplace_back(static_cast<double>(r.horizon), r.mean_regret);
  }
  return pts;
}

// ---------------------------------------------------------------------------------------------
// CSV output. Floats use 17 significant digits.

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline constexpr const char* kResultsCsvHeader =
    "instance_id,K,T,seed,round,cumulative_regret,realized_gain_sum,good_event_violated";
inline constexpr const char* kSweepCsvHeader =
    "instance_family,K,T,replications,mean_regret,stderr,slope_to_date";

inline std::string results_csv(const ExperimentResult& result) {
  std::ostringstream os;
  os << kResultsCsvHeader << '\n';
  for (const auto& run : result.runs) {
    for (const auto& row : run.trajectory) {
      os << result.instance_id << ',' << result.k << ',' << result.horizon << ',' << run.seed << ','
         << row.round << ',' << format_real(row.cumulative_regret) << ','
         << format_real(row.realized_gain_sum) << ',' << (row.good_event_violated ? 1 : 0) << '\n';
    }
  }
  return os.str();
}

inline std::string sweep_csv(const std::string& family, std::size_t k, std::span<const SweepRow> rows) {
  std::ostringstream os;
  os << kSweepCsvHeader << '\n';
  for (const auto& r : rows) {
    os << family << ',' << k << ',' << r.horizon << ',' << r.replications << ','
       << format_real(r.mean_regret) << ',' << format_real(r.stderr_regret) << ','
       << (r.slope_to_date ? format_real(*r.slope_to_date) : std::string()) << '\n';
  }
  return os.str();
}

}  // namespace budget_bandit
