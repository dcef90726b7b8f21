#pragma once

// Budget-to-success curves F : [0,1] -> [0,1].
//
// Three families are representable:
//   Power            F(x) = x^a,           a in (0,1)   (concave, F'(0+) = +inf)
//   Step             F(x) = 1{x >= theta}, theta in (0,1]
//   PiecewiseLinear  linear interpolation of knots (0,y0) ... (1,yn), y non-decreasing
//
// All values are immutable once constructed; evaluation is thread-safe.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "budget_bandit/errors.hpp"
#include "json.hpp"

namespace budget_bandit {

// Inputs within this distance of [0,1] are clamped instead of rejected.
inline constexpr double kDomainTolerance = 1e-12;

struct PowerCurve {
  double exponent;
};

struct StepCurve {
  double threshold;
};

struct Knot {
  double x;
  double y;
};

struct PiecewiseLinearCurve {
  std::vector<Knot> knots;
};

enum class CurveFamily { Power, Step, PiecewiseLinear };

class CurveSpec {
 public:
  using Shape = std::variant<PowerCurve, StepCurve, PiecewiseLinearCurve>;

  static CurveSpec power(double exponent) {
    if (!(exponent > 0.0 && exponent < 1.0)) {
      throw DomainError("power curve exponent must lie strictly inside (0,1), got " +
                        std::to_string(exponent));
    }
    return CurveSpec(PowerCurve{exponent});
  }

  static CurveSpec step(double threshold) {
    if (!(threshold > 0.0 && threshold <= 1.0)) {
      throw DomainError("step threshold must lie in (0,1], got " + std::to_string(threshold));
    }
    return CurveSpec(StepCurve{threshold});
  }

  static CurveSpec piecewise(std::vector<Knot> knots) {
    if (knots.size() < 2) {
      throw DomainError("piecewise-linear curve needs at least two knots");
    }
    if (knots.front().x != 0.0 || knots.back().x != 1.0) {
      throw DomainError("piecewise-linear knots must start at x=0 and end at x=1");
    }
    for (std::size_t i = 0; i < knots.size(); ++i) {
      const Knot& k = knots[i];
      if (!(k.y >= 0.0 && k.y <= 1.0)) {
        throw DomainError("piecewise-linear knot y must lie in [0,1], got " + std::to_string(k.y));
      }
      if (i > 0) {
        if (!(k.x > knots[i - 1].x)) {
          throw DomainError("piecewise-linear knot x values must be strictly ascending");
        }
        if (k.y < knots[i - 1].y) {
          throw DomainError("piecewise-linear knot y values must be non-decreasing");
        }
      }
    }
    return CurveSpec(PiecewiseLinearCurve{std::move(knots)});
  }

  const Shape& shape() const noexcept { return shape_; }

  CurveFamily family() const noexcept {
    return static_cast<CurveFamily>(shape_.index());
  }

  bool operator==(const CurveSpec& other) const;

 private:
  explicit CurveSpec(Shape shape) : shape_(std::move(shape)) {}
  Shape shape_;
};

namespace detail {

inline double clamp_to_unit(double x) {
  if (!(x >= -kDomainTolerance && x <= 1.0 + kDomainTolerance)) {
    throw DomainError("curve argument outside [0,1]: " + std::to_string(x));
  }
  return std::clamp(x, 0.0, 1.0);
}

// Index of the segment [knots[i], knots[i+1]) containing x; the last segment for x = 1.
inline std::size_t segment_index(const std::vector<Knot>& knots, double x) {
  auto it = std::upper_bound(knots.begin(), knots.end(), x,
                             [](double v, const Knot& k) { return v < k.x; });
  auto idx = static_cast<std::size_t>(std::distance(knots.begin(), it));
  if (idx == 0) return 0;
  return std::min(idx - 1, knots.size() - 2);
}

inline double segment_slope(const std::vector<Knot>& knots, std::size_t i) {
  return (knots[i + 1].y - knots[i].y) / (knots[i + 1].x - knots[i].x);
}

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace detail

inline bool CurveSpec::operator==(const CurveSpec& other) const {
  if (shape_.index() != other.shape_.index()) return false;
  return std::visit(
      detail::overloaded{
          [&](const PowerCurve& c) { return c.exponent == std::get<PowerCurve>(other.shape_).exponent; },
          [&](const StepCurve& c) { return c.threshold == std::get<StepCurve>(other.shape_).threshold; },
          [&](const PiecewiseLinearCurve& c) {
            const auto& o = std::get<PiecewiseLinearCurve>(other.shape_).knots;
            return std::equal(c.knots.begin(), c.knots.end(), o.begin(), o.end(),
                              [](const Knot& a, const Knot& b) { return a.x == b.x && a.y == b.y; });
          }},
      shape_);
}

inline double eval(const CurveSpec& curve, double x) {
  x = detail::clamp_to_unit(x);
  return std::visit(
      detail::overloaded{
          [x](const PowerCurve& c) { return std::pow(x, c.exponent); },
          // Closed at the threshold, with slack for simplex round-off.
          [x](const StepCurve& c) { return x >= c.threshold - kDomainTolerance ? 1.0 : 0.0; },
          [x](const PiecewiseLinearCurve& c) {
            const auto i = detail::segment_index(c.knots, x);
            const Knot& lo = c.knots[i];
            const Knot& hi = c.knots[i + 1];
            const double t = (x - lo.x) / (hi.x - lo.x);
            return std::clamp(lo.y + t * (hi.y - lo.y), 0.0, 1.0);
          }},
      curve.shape());
}

// F'(x). Piecewise-linear curves report the right-slope at knots (left-slope at x = 1).
inline double derivative(const CurveSpec& curve, double x) {
  x = detail::clamp_to_unit(x);
  return std::visit(
      detail::overloaded{
          [x](const PowerCurve& c) -> double {
            if (x <= 0.0) {
              throw DomainError("power curve derivative is unbounded at x = 0");
            }
            return c.exponent * std::pow(x, c.exponent - 1.0);
          },
          [](const StepCurve&) -> double {
            throw UnsupportedOperation("step curves have no derivative");
          },
          [x](const PiecewiseLinearCurve& c) -> double {
            return detail::segment_slope(c.knots, detail::segment_index(c.knots, x));
          }},
      curve.shape());
}

inline bool is_concave(const CurveSpec& curve) {
  return std::visit(detail::overloaded{
                        [](const PowerCurve&) { return true; },
                        [](const StepCurve&) { return false; },
                        [](const PiecewiseLinearCurve& c) {
                          for (std::size_t i = 1; i + 1 < c.knots.size(); ++i) {
                            if (detail::segment_slope(c.knots, i) >
                                detail::segment_slope(c.knots, i - 1) + kDomainTolerance) {
                              return false;
                            }
                          }
                          return true;
                        }},
                    curve.shape());
}

// Whether the water-filling oracle can handle this curve.
inline bool is_concave_differentiable(const CurveSpec& curve) {
  return curve.family() != CurveFamily::Step && is_concave(curve);
}

inline std::string_view family_name(CurveFamily f) {
  switch (f) {
    case CurveFamily::Power: return "power";
    case CurveFamily::Step: return "step";
    case CurveFamily::PiecewiseLinear: return "piecewise";
  }
  return "unknown";
}

// JSON: {"type":"power","a":0.5} | {"type":"step","threshold":0.25}
//     | {"type":"piecewise","knots":[[0,0],[1,1]]}
inline nlohmann::json curve_to_json(const CurveSpec& curve) {
  return std::visit(detail::overloaded{
                        [](const PowerCurve& c) {
                          return nlohmann::json{{"type", "power"}, {"a", c.exponent}};
                        },
                        [](const StepCurve& c) {
                          return nlohmann::json{{"type", "step"}, {"threshold", c.threshold}};
                        },
                        [](const PiecewiseLinearCurve& c) {
                          nlohmann::json knots = nlohmann::json::array();
                          for (const Knot& k : c.knots) knots.push_back({k.x, k.y});
                          return nlohmann::json{{"type", "piecewise"}, {"knots", knots}};
                        }},
                    curve.shape());
}

namespace detail {

inline double require_number(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError(where + ": missing field \"" + key + "\"");
  }
  if (!j.at(key).is_number()) {
    throw ConfigError(where + ": field \"" + key + "\" must be a number");
  }
  return j.at(key).get<double>();
}

inline std::string require_string(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError(where + ": missing field \"" + key + "\"");
  }
  if (!j.at(key).is_string()) {
    throw ConfigError(where + ": field \"" + key + "\" must be a string");
  }
  return j.at(key).get<std::string>();
}

}  // namespace detail

inline CurveSpec curve_from_json(const nlohmann::json& j, const std::string& where = "curve") {
  const std::string type = detail::require_string(j, "type", where);
  try {
    if (type == "power") return CurveSpec::power(detail::require_number(j, "a", where));
    if (type == "step") return CurveSpec::step(detail::require_number(j, "threshold", where));
    if (type == "piecewise") {
      if (!j.contains("knots") || !j.at("knots").is_array()) {
        throw ConfigError(where + ": missing field \"knots\"");
      }
      std::vector<Knot> knots;
      for (const auto& k : j.at("knots")) {
        if (!k.is_array() || k.size() != 2 || !k[0].is_number() || !k[1].is_number()) {
          throw ConfigError(where + ": each knot must be a pair [x, y]");
        }
        knots.push_back({k[0].get<double>(), k[1].get<double>()});
      }
      return CurveSpec::piecewise(std::move(knots));
    }
  } catch (const DomainError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  throw ConfigError(where + ": unknown curve type \"" + type + "\"");
}

}  // namespace budget_bandit
