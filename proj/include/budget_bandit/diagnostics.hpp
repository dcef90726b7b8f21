#pragma once

// Runtime checks of the two concentration events behind the regret guarantees.
//
// Coverage: whenever task k has N >= 1 observed rewards, their running mean stays within
//   sqrt(log(2/delta) / (2N))  of mu_k.  Fails with probability at most K T delta.
//
// Completion counts: whenever the cumulative success mass sum_s F_k(X_{s,k}) reaches
//   100 (log T)^2, the realized completions sum_s B_{s,k} are at least half of it.
//   Fails with probability at most K / T.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "budget_bandit/curves.hpp"
#include "budget_bandit/environment.hpp"

namespace budget_bandit {

// Per-round record of one trajectory, enough to replay both diagnostics offline.
struct RunTrace {
  std::vector<std::vector<double>> allocations;
  std::vector<std::vector<std::uint8_t>> completions;
  std::vector<std::vector<double>> censored_rewards;
};

class GoodEventMonitor {
 public:
  GoodEventMonitor(std::vector<double> means, double delta)
      : means_(std::move(means)),
        log_term_(std::log(2.0 / delta)),
        counts_(means_.size(), 0),
        sums_(means_.size(), 0.0) {}

  // Returns the number of tasks whose confidence interval missed mu this round.
  std::size_t observe(std::span<const std::uint8_t> completions, std::span<const double> censored) {
    std::size_t misses = 0;
    for (std::size_t k = 0; k < means_.size(); ++k) {
      if (completions[k]) {
        counts_[k] += 1;
        sums_[k] += censored[k];
      }
      if (counts_[k] == 0) continue;
      const double n = static_cast<double>(counts_[k]);
      if (std::abs(sums_[k] / n - means_[k]) > std::sqrt(log_term_ / (2.0 * n))) ++misses;
    }
    violations_ += misses;
    return misses;
  }

  std::uint64_t violations() const noexcept { return violations_; }
  bool violated() const noexcept { return violations_ > 0; }

 private:
  std::vector<double> means_;
  double log_term_;
  std::vector<std::uint64_t> counts_;
  std::vector<double> sums_;
  std::uint64_t violations_ = 0;
};

inline double completion_mass_threshold(std::uint64_t horizon) {
  const double l = std::log(static_cast<double>(horizon));
  return 100.0 * l * l;
}

class CompletionMonitor {
 public:
  CompletionMonitor(std::vector<CurveSpec> curves, std::uint64_t horizon)
      : curves_(std::move(curves)),
        threshold_(completion_mass_threshold(horizon)),
        mass_(curves_.size(), 0.0),
        completed_(curves_.size(), 0) {}

  void observe(std::span<const double> allocation, std::span<const std::uint8_t> completions) {
    for (std::size_t k = 0; k < curves_.size(); ++k) {
      mass_[k] += eval(curves_[k], allocation[k]);
      completed_[k] += completions[k];
      if (mass_[k] >= threshold_) {
        fired_ = true;
        if (static_cast<double>(completed_[k]) < 0.5 * mass_[k]) violated_ = true;
      }
    }
  }

  bool antecedent_fired() const noexcept { return fired_; }
  bool violated() const noexcept { return violated_; }
  std::span<const double> cumulative_mass() const noexcept { return mass_; }

 private:
  std::vector<CurveSpec> curves_;
  double threshold_;
  std::vector<double> mass_;
  std::vector<std::uint64_t> completed_;
  bool fired_ = false;
  bool violated_ = false;
};

struct DiagnosticReport {
  std::string name;
  std::size_t runs = 0;
  std::size_t violating_runs = 0;
  // Runs in which the checked condition was ever active (always all runs for coverage).
  std::size_t active_runs = 0;
  double bound = 0.0;
  double observed = 0.0;
  // bound + 3 binomial standard deviations at `runs` trials.
  double threshold = 0.0;
  bool vacuous = false;
  bool pass = false;
};

inline DiagnosticReport make_report(std::string name, std::size_t runs, std::size_t violating,
                                    std::size_t active, double bound) {
  DiagnosticReport r;
  r.name = std::move(name);
  r.runs = runs;
  r.violating_runs = violating;
  r.active_runs = active;
  r.vacuous = bound >= 1.0;
  r.bound = std::min(1.0, bound);
  r.observed = runs == 0 ? 0.0 : static_cast<double>(violating) / static_cast<double>(runs);
  const double sigma =
      runs == 0 ? 0.0 : std::sqrt(r.bound * (1.0 - r.bound) / static_cast<double>(runs));
  r.threshold = r.bound + 3.0 * sigma;
  r.pass = r.vacuous || r.observed <= r.threshold;
  return r;
}

inline DiagnosticReport good_event_report(std::size_t runs, std::size_t violating_runs,
                                          std::size_t tasks, std::uint64_t horizon, double delta) {
  const double bound = static_cast<double>(tasks) * static_cast<double>(horizon) * delta;
  return make_report("good_event", runs, violating_runs, runs, bound);
}

inline DiagnosticReport completion_report(std::size_t runs, std::size_t violating_runs,
                                          std::size_t fired_runs, std::size_t tasks,
                                          std::uint64_t horizon) {
  const double bound = static_cast<double>(tasks) / static_cast<double>(horizon);
  return make_report("completion_count", runs, violating_runs, fired_runs, bound);
}

// Offline replay of the coverage check over recorded traces.
inline DiagnosticReport good_event_diagnostic(std::span<const RunTrace> traces,
                                              std::span<const double> means, double delta) {
  std::size_t bad = 0;
  std::uint64_t horizon = 0;
  for (const auto& trace : traces) {
    GoodEventMonitor monitor(std::vector<double>(means.begin(), means.end()), delta);
    for (std::size_t t = 0; t < trace.completions.size(); ++t) {
      monitor.observe(trace.completions[t], trace.censored_rewards[t]);
    }
    if (monitor.violated()) ++bad;
    horizon = std::max<std::uint64_t>(horizon, trace.completions.size());
  }
  return good_event_report(traces.size(), bad, means.size(), horizon, delta);
}

// Offline replay of the completion-count check; `horizon` sets the 100 (log T)^2 threshold.
inline DiagnosticReport completion_count_diagnostic(std::span<const RunTrace> traces,
                                                    std::span<const CurveSpec> curves,
                                                    std::uint64_t horizon) {
  std::size_t bad = 0;
  std::size_t fired = 0;
  for (const auto& trace : traces) {
    CompletionMonitor monitor(std::vector<CurveSpec>(curves.begin(), curves.end()), horizon);
    for (std::size_t t = 0; t < trace.completions.size(); ++t) {
      monitor.observe(trace.allocations[t], trace.completions[t]);
    }
    if (monitor.violated()) ++bad;
    if (monitor.antecedent_fired()) ++fired;
  }
  return completion_report(traces.size(), bad, fired, curves.size(), horizon);
}

}  // namespace budget_bandit
