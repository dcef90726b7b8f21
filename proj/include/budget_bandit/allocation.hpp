#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "budget_bandit/errors.hpp"

namespace budget_bandit {

// Budget simplex tolerance: weights must sum to 1 within this before renormalization.
inline constexpr double kSimplexTolerance = 1e-9;

// A point of the K-dimensional probability simplex.
//
// Construction validates and then renormalizes, so weights() always sums to 1
// up to a single rounding and every entry lies in [0,1].
class Allocation {
 public:
  static Allocation from_weights(std::vector<double> weights) {
    if (weights.empty()) throw ConfigError("allocation must have at least one task");
    double total = 0.0;
    for (std::size_t k = 0; k < weights.size(); ++k) {
      const double w = weights[k];
      if (!std::isfinite(w) || w < -kSimplexTolerance || w > 1.0 + kSimplexTolerance) {
        throw DomainError("allocation weight " + std::to_string(k) + " outside [0,1]: " +
                          std::to_string(w));
      }
      weights[k] = std::max(0.0, std::min(1.0, w));
      total += weights[k];
    }
    if (std::abs(total - 1.0) > kSimplexTolerance) {
      throw DomainError("allocation weights sum to " + std::to_string(total) + ", expected 1");
    }
    if (total != 1.0) {
      for (double& w : weights) w /= total;
    }
    return Allocation(std::move(weights));
  }

  static Allocation uniform(std::size_t k) {
    if (k == 0) throw ConfigError("allocation must have at least one task");
    return Allocation(std::vector<double>(k, 1.0 / static_cast<double>(k)));
  }

  // All budget on one task.
  static Allocation vertex(std::size_t k, std::size_t index) {
    std::vector<double> w(k, 0.0);
    w.at(index) = 1.0;
    return Allocation(std::move(w));
  }

  std::size_t size() const noexcept { return weights_.size(); }
  double operator[](std::size_t k) const { return weights_[k]; }
  std::span<const double> weights() const noexcept { return weights_; }

  bool operator==(const Allocation&) const = default;

 private:
  explicit Allocation(std::vector<double> w) : weights_(std::move(w)) {}
  std::vector<double> weights_;
};

}  // namespace budget_bandit
