#pragma once

// Exact maximization of  Phi_m(x) = sum_k m_k F_k(x_k)  over the simplex.
//
//   concave, differentiable curves -> water-filling on the KKT multiplier
//   step curves                    -> subset selection (0/1 knapsack)
//   anything else                  -> grid enumeration of the simplex
//
// Ties are broken deterministically everywhere: water-filling has a unique
// optimum for strictly concave curves; the step oracle prefers subsets that
// include lower-indexed tasks; the grid keeps the lexicographically smallest
// composition.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "budget_bandit/allocation.hpp"
#include "budget_bandit/curves.hpp"
#include "budget_bandit/errors.hpp"

namespace budget_bandit {

enum class OracleMethod { WaterFilling, StepSelect, Grid };

inline std::string_view method_name(OracleMethod m) {
  switch (m) {
    case OracleMethod::WaterFilling: return "water_filling";
    case OracleMethod::StepSelect: return "step_select";
    case OracleMethod::Grid: return "grid";
  }
  return "unknown";
}

struct OracleResult {
  Allocation allocation;
  double value;
  OracleMethod method;
};

inline constexpr std::size_t kMaxStepEnumerationTasks = 25;
inline constexpr double kMaxGridCompositions = 1e8;
// Composition budget used to pick the dispatcher's grid resolution.
inline constexpr double kDefaultGridCompositions = 2e6;
inline constexpr std::size_t kMaxDefaultGridResolution = 1000;
inline constexpr int kWaterFillingMaxIterations = 200;
inline constexpr double kWaterFillingResidual = 1e-12;

// sum_k m_k F_k(x_k), accumulated in index order.
inline double objective(std::span<const double> m, std::span<const CurveSpec> curves,
                        std::span<const double> x) {
  double v = 0.0;
  for (std::size_t k = 0; k < m.size(); ++k) v += m[k] * eval(curves[k], x[k]);
  return v;
}

namespace detail {

inline void validate_weights(std::span<const double> m, std::size_t expected) {
  if (m.empty()) throw ConfigError("oracle needs at least one task");
  if (m.size() != expected) {
    throw ConfigError("weight vector has " + std::to_string(m.size()) + " entries but " +
                      std::to_string(expected) + " curves/thresholds were given");
  }
  for (std::size_t k = 0; k < m.size(); ++k) {
    if (!std::isfinite(m[k]) || m[k] < 0.0) {
      throw DomainError("oracle weight " + std::to_string(k) +
                        " must be finite and non-negative, got " + std::to_string(m[k]));
    }
  }
}

// Water-filling view of one task: the demand x_k(lambda) = sup{u : m_k F'_k(u) >= lambda}.
struct DemandCurve {
  double weight = 0.0;
  // Power: log(m a) and 1/(1-a).
  bool is_power = false;
  double log_scale = 0.0;
  double power = 0.0;
  // Piecewise-linear: knot x positions and m * slope per segment.
  std::vector<double> ends;
  std::vector<double> marginal;

  double demand(double log_lambda) const {
    if (weight == 0.0) return 0.0;
    if (is_power) return std::min(1.0, std::exp(power * (log_scale - log_lambda)));
    const double lambda = std::exp(log_lambda);
    double u = 0.0;
    for (std::size_t j = 0; j < marginal.size() && marginal[j] >= lambda; ++j) u = ends[j];
    return u;
  }

  // d demand / d log(lambda); zero for piecewise-linear.
  double slope(double log_lambda) const {
    if (weight == 0.0 || !is_power) return 0.0;
    const double u = std::exp(power * (log_scale - log_lambda));
    return u >= 1.0 ? 0.0 : -power * u;
  }

  // Demand as lambda -> 0+: where the marginal return reaches zero.
  double saturation() const {
    if (weight == 0.0) return 0.0;
    if (is_power) return 1.0;
    double u = 0.0;
    for (std::size_t j = 0; j < marginal.size() && marginal[j] > 0.0; ++j) u = ends[j];
    return u;
  }

  // Smallest positive marginal return over the saturation range.
  double min_marginal() const {
    if (is_power) return std::exp(log_scale);  // m * F'(1) = m * a
    double v = std::numeric_limits<double>::infinity();
    for (double g : marginal) {
      if (g > 0.0) v = std::min(v, g);
    }
    return v;
  }
};

inline DemandCurve make_demand(double m, const CurveSpec& curve) {
  DemandCurve d;
  d.weight = m;
  if (m == 0.0) return d;
  if (const auto* p = std::get_if<PowerCurve>(&curve.shape())) {
    d.is_power = true;
    d.log_scale = std::log(m * p->exponent);
    d.power = 1.0 / (1.0 - p->exponent);
    return d;
  }
  const auto& knots = std::get<PiecewiseLinearCurve>(curve.shape()).knots;
  for (std::size_t j = 0; j + 1 < knots.size(); ++j) {
    d.ends.push_back(knots[j + 1].x);
    d.marginal.push_back(m * segment_slope(knots, j));
  }
  return d;
}

inline Allocation normalized(std::vector<double> x) {
  double total = 0.0;
  for (double v : x) total += v;
  for (double& v : x) v /= total;
  return Allocation::from_weights(std::move(x));
}

}  // namespace detail

// Water-filling for concave differentiable curves (power, concave piecewise-linear).
//
// Solves sum_k x_k(lambda) = 1 where x_k(lambda) = min(1, (F'_k)^{-1}(lambda / m_k)), using a
// bracketed Newton iteration on log(lambda) that falls back to bisection whenever the Newton
// step leaves the bracket or the demand is locally flat. Tasks with m_k = 0 receive nothing.
inline OracleResult maximize_concave(std::span<const double> m, std::span<const CurveSpec> curves) {
  detail::validate_weights(m, curves.size());
  for (std::size_t k = 0; k < curves.size(); ++k) {
    if (!is_concave_differentiable(curves[k])) {
      throw UnsupportedInstance("water-filling requires concave differentiable curves; task " +
                                std::to_string(k) + " is " +
                                std::string(family_name(curves[k].family())) +
                                (curves[k].family() == CurveFamily::Step ? "" : " (non-concave)"));
    }
  }
  const std::size_t n = m.size();
  if (std::all_of(m.begin(), m.end(), [](double v) { return v == 0.0; })) {
    return {Allocation::uniform(n), 0.0, OracleMethod::WaterFilling};
  }

  std::vector<detail::DemandCurve> demands;
  demands.reserve(n);
  for (std::size_t k = 0; k < n; ++k) demands.push_back(detail::make_demand(m[k], curves[k]));

  std::vector<double> x(n, 0.0);
  auto fill = [&](double log_lambda) {
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      x[k] = demands[k].demand(log_lambda);
      total += x[k];
    }
    return total - 1.0;
  };

  // Flat tails can leave budget that no task wants; it is free, so park it in index order.
  double saturated = 0.0;
  for (const auto& d : demands) saturated += d.saturation();
  if (saturated <= 1.0 + kWaterFillingResidual) {
    for (std::size_t k = 0; k < n; ++k) x[k] = demands[k].saturation();
    double slack = 1.0 - saturated;
    for (std::size_t k = 0; k < n && slack > 0.0; ++k) {
      const double add = std::min(slack, 1.0 - x[k]);
      x[k] += add;
      slack -= add;
    }
    Allocation alloc = detail::normalized(std::move(x));
    const double value = objective(m, curves, alloc.weights());
    return {std::move(alloc), value, OracleMethod::WaterFilling};
  }

  double min_marginal = std::numeric_limits<double>::infinity();
  double max_weight = 0.0;
  for (const auto& d : demands) {
    if (d.weight > 0.0) {
      min_marginal = std::min(min_marginal, d.min_marginal());
      max_weight = std::max(max_weight, d.weight);
    }
  }
  // Below every positive marginal return all tasks saturate, so the budget is over-subscribed.
  double lo = std::log(1e-3 * min_marginal);
  double hi = std::log(max_weight);
  while (fill(hi) >= 0.0) hi += std::log(2.0);

  double g_lo = fill(lo);
  if (std::abs(g_lo) <= kWaterFillingResidual) {
    Allocation alloc = detail::normalized(x);
    const double value = objective(m, curves, alloc.weights());
    return {std::move(alloc), value, OracleMethod::WaterFilling};
  }

  double current = 0.5 * (lo + hi);
  bool converged = false;
  for (int iter = 0; iter < kWaterFillingMaxIterations; ++iter) {
    const double g = fill(current);
    if (std::abs(g) <= kWaterFillingResidual) {
      converged = true;
      break;
    }
    if (g > 0.0) {
      lo = current;
    } else {
      hi = current;
    }
    if (!(hi - lo > 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(lo)))) {
      break;
    }
    double dg = 0.0;
    for (const auto& d : demands) dg += d.slope(current);
    double next = dg < 0.0 ? current - g / dg : lo - 1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    current = next;
  }

  if (!converged) {
    // A piecewise-linear plateau sits at the critical level: split the gap between the two
    // bracketing demand profiles in proportion to how much each task can still absorb.
    std::vector<double> x_lo(n), x_hi(n);
    double sum_hi = 0.0;
    double spread = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      x_lo[k] = demands[k].demand(lo);
      x_hi[k] = demands[k].demand(hi);
      sum_hi += x_hi[k];
      spread += x_lo[k] - x_hi[k];
    }
    const double residual = 1.0 - sum_hi;
    for (std::size_t k = 0; k < n; ++k) {
      x[k] = x_hi[k] + (spread > 0.0 ? residual * (x_lo[k] - x_hi[k]) / spread : 0.0);
    }
  }

  Allocation alloc = detail::normalized(std::move(x));
  const double value = objective(m, curves, alloc.weights());
  return {std::move(alloc), value, OracleMethod::WaterFilling};
}

namespace detail {

// Depth-first 0/1 knapsack over tasks in index order, include-branch first.
//
// Leaves are visited in decreasing order of their inclusion vectors, so keeping only strictly
// better values yields the preferred tie-break. Pruned with the fractional (Dantzig) bound.
class StepSubsetSearch {
 public:
  StepSubsetSearch(std::span<const double> m, std::span<const double> thresholds)
      : m_(m), theta_(thresholds), n_(m.size()), chosen_(n_, false), best_set_(n_, false) {
    // Fractional-bound order: by value density, ties by index.
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      return m_[a] / theta_[a] > m_[b] / theta_[b];
    });
  }

  std::vector<bool> solve() {
    dfs(0, 0.0, 0.0);
    return best_set_;
  }

 private:
  double bound(std::size_t next, double used) const {
    double room = 1.0 + kDomainTolerance - used;
    double extra = 0.0;
    for (std::size_t k : order_) {
      if (k < next || m_[k] <= 0.0) continue;
      if (theta_[k] <= room) {
        room -= theta_[k];
        extra += m_[k];
      } else {
        extra += m_[k] * room / theta_[k];
        break;
      }
    }
    return extra;
  }

  void dfs(std::size_t i, double value, double used) {
    if (i == n_) {
      if (!has_best_ || value > best_value_) {
        has_best_ = true;
        best_value_ = value;
        best_set_ = chosen_;
      }
      return;
    }
    if (has_best_ && value + bound(i, used) * (1.0 + 1e-12) + 1e-300 < best_value_) return;
    if (used + theta_[i] <= 1.0 + kDomainTolerance) {
      chosen_[i] = true;
      dfs(i + 1, value + m_[i], used + theta_[i]);
      chosen_[i] = false;
    }
    dfs(i + 1, value, used);
  }

  std::span<const double> m_;
  std::span<const double> theta_;
  std::size_t n_;
  std::vector<std::size_t> order_;
  std::vector<bool> chosen_;
  std::vector<bool> best_set_;
  bool has_best_ = false;
  double best_value_ = 0.0;
};

}  // namespace detail

// Best affordable subset of step tasks: maximize sum_{k in S} m_k s.t. sum_{k in S} theta_k <= 1.
//
// Each selected task receives exactly its threshold; leftover budget goes to the first selected
// task. Among subsets of equal value, the one including lower-indexed tasks is preferred (for
// subsets of equal size this is the lexicographically smallest index set).
inline OracleResult maximize_step(std::span<const double> m, std::span<const double> thresholds) {
  detail::validate_weights(m, thresholds.size());
  const std::size_t n = m.size();
  for (std::size_t k = 0; k < n; ++k) {
    if (!(thresholds[k] > 0.0 && thresholds[k] <= 1.0)) {
      throw DomainError("step threshold " + std::to_string(k) + " must lie in (0,1]");
    }
  }

  std::vector<bool> selected(n, false);
  const bool uniform = std::all_of(thresholds.begin(), thresholds.end(),
                                   [&](double t) { return t == thresholds[0]; });
  if (uniform) {
    const auto capacity = std::min<std::size_t>(
        n, static_cast<std::size_t>(std::floor((1.0 + kDomainTolerance) / thresholds[0])));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return m[a] > m[b]; });
    for (std::size_t i = 0; i < capacity; ++i) selected[order[i]] = true;
  } else {
    if (n > kMaxStepEnumerationTasks) {
      throw CapacityError("step oracle with non-uniform thresholds supports at most " +
                          std::to_string(kMaxStepEnumerationTasks) + " tasks, got " +
                          std::to_string(n));
    }
    selected = detail::StepSubsetSearch(m, thresholds).solve();
  }

  std::vector<double> x(n, 0.0);
  double used = 0.0;
  std::size_t first = n;
  for (std::size_t k = 0; k < n; ++k) {
    if (selected[k]) {
      x[k] = thresholds[k];
      used += thresholds[k];
      if (first == n) first = k;
    }
  }
  x[first] += 1.0 - used;
  auto alloc = Allocation::from_weights(std::move(x));

  double value = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (alloc[k] >= thresholds[k] - kDomainTolerance) value += m[k];
  }
  return {std::move(alloc), value, OracleMethod::StepSelect};
}

// Number of compositions of `resolution` into `tasks` non-negative parts, C(r+K-1, K-1).
// Saturates at +inf for astronomically large counts.
inline double composition_count(std::size_t tasks, std::size_t resolution) {
  double count = 1.0;
  for (std::size_t i = 1; i < tasks; ++i) {
    count = count * static_cast<double>(resolution + i) / static_cast<double>(i);
    if (!std::isfinite(count)) return std::numeric_limits<double>::infinity();
  }
  return count;
}

// Grid resolution the dispatcher uses for K tasks: the finest mesh (up to 1000) whose
// composition count stays within kDefaultGridCompositions.
inline std::size_t default_grid_resolution(std::size_t tasks) {
  std::size_t r = kMaxDefaultGridResolution;
  while (r > 1 && composition_count(tasks, r) > kDefaultGridCompositions) --r;
  return r;
}

// Exhaustive search over x = i / resolution with sum_k i_k = resolution.
inline OracleResult maximize_grid(std::span<const double> m, std::span<const CurveSpec> curves,
                                  std::size_t resolution) {
  detail::validate_weights(m, curves.size());
  if (resolution < 2) throw DomainError("grid resolution must be at least 2");
  const std::size_t n = m.size();
  const double count = composition_count(n, resolution);
  if (count > kMaxGridCompositions) {
    throw CapacityError("grid search over " + std::to_string(n) + " tasks at resolution " +
                        std::to_string(resolution) + " needs more than 1e8 compositions");
  }

  // table[k][i] = m_k F_k(i / resolution)
  std::vector<std::vector<double>> table(n, std::vector<double>(resolution + 1));
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i <= resolution; ++i) {
      table[k][i] = m[k] * eval(curves[k], static_cast<double>(i) / static_cast<double>(resolution));
    }
  }

  std::vector<std::size_t> parts(n, 0), best_parts(n, 0);
  double best = -std::numeric_limits<double>::infinity();
  // Iterative lexicographic enumeration; prefix sums share the leaf's summation order.
  std::vector<double> prefix(n + 1, 0.0);
  auto descend = [&](auto&& self, std::size_t k, std::size_t remaining) -> void {
    if (k + 1 == n) {
      parts[k] = remaining;
      const double v = prefix[k] + table[k][remaining];
      if (v > best) {
        best = v;
        best_parts = parts;
      }
      return;
    }
    for (std::size_t i = 0; i <= remaining; ++i) {
      parts[k] = i;
      prefix[k + 1] = prefix[k] + table[k][i];
      self(self, k + 1, remaining - i);
    }
  };
  descend(descend, 0, resolution);

  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) {
    x[k] = static_cast<double>(best_parts[k]) / static_cast<double>(resolution);
  }
  return {Allocation::from_weights(std::move(x)), best, OracleMethod::Grid};
}

inline bool all_step(std::span<const CurveSpec> curves) {
  return std::all_of(curves.begin(), curves.end(),
                     [](const CurveSpec& c) { return c.family() == CurveFamily::Step; });
}

inline bool all_concave_differentiable(std::span<const CurveSpec> curves) {
  return std::all_of(curves.begin(), curves.end(),
                     [](const CurveSpec& c) { return is_concave_differentiable(c); });
}

// True when maximize() solves this curve mix exactly (no grid fallback).
inline bool has_exact_oracle(std::span<const CurveSpec> curves) {
  return all_step(curves) || all_concave_differentiable(curves);
}

inline std::vector<double> step_thresholds(std::span<const CurveSpec> curves) {
  std::vector<double> t;
  t.reserve(curves.size());
  for (const auto& c : curves) t.push_back(std::get<StepCurve>(c.shape()).threshold);
  return t;
}

inline OracleResult maximize(std::span<const double> m, std::span<const CurveSpec> curves) {
  detail::validate_weights(m, curves.size());
  if (all_concave_differentiable(curves)) return maximize_concave(m, curves);
  if (all_step(curves)) {
    const auto t = step_thresholds(curves);
    return maximize_step(m, t);
  }
  const std::size_t resolution = default_grid_resolution(curves.size());
  if (resolution < 2 * curves.size()) {
    throw CapacityError("mixed curve families with " + std::to_string(curves.size()) +
                        " tasks exceed the grid oracle's capacity");
  }
  return maximize_grid(m, curves, resolution);
}

inline nlohmann::json oracle_result_to_json(const OracleResult& r) {
  return nlohmann::json{{"allocation", std::vector<double>(r.allocation.weights().begin(),
                                                           r.allocation.weights().end())},
                        {"value", r.value},
                        {"method", std::string(method_name(r.method))}};
}

}  // namespace budget_bandit
