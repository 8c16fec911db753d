#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "awf/grid.hpp"

namespace awf {

/// Parameters of the builtin trend catalog; unused fields are ignored by
/// builtins that do not take them.
struct TrendParams {
  double scale = 1.0;
  double cap = 1.0;   // tsquared: quadratic ramp frozen at this point
  double coef = 0.5;  // product coefficient
  double ax = 0.5, ay = 0.5;  // linear slopes
};

/// Self-contained trend catalog so experiments need no external data files:
///   zero               f = 0
///   linear             f = ax*s + ay*t
///   tsquared           f = min(s,cap)^2          (first axis only)
///   product            f = coef*s*t
///   tsquared+product   f = min(s,cap)^2 + min(t,cap)^2 + coef*s*t
inline double builtin_trend_value(const std::string& name, double s, double t,
                                  const TrendParams& p = {}) {
  auto tsq = [&p](double x) {
    const double c = std::min(x, p.cap);
    return c * c;
  };
  double f;
  if (name == "zero") f = 0.0;
  else if (name == "linear") f = p.ax * s + p.ay * t;
  else if (name == "tsquared") f = tsq(s);
  else if (name == "product") f = p.coef * s * t;
  else if (name == "tsquared+product") f = tsq(s) + tsq(t) + p.coef * s * t;
  else throw std::invalid_argument("unknown builtin trend: " + name);
  return p.scale * f;
}

inline GridField builtin_trend(const std::string& name, GridSpec grid,
                               const TrendParams& p = {}) {
  builtin_trend_value(name, 0.0, 0.0, p);  // reject unknown names before allocating
  return GridField::from_function(
      grid, [&](double s, double t) { return builtin_trend_value(name, s, t, p); });
}

inline GridField builtin_boundary(const std::string& name, GridSpec grid, double value = 1.0) {
  if (name == "constant") return GridField::constant(grid, value);
  throw std::invalid_argument("unknown builtin boundary: " + name);
}

/// The instances exercised by the verification suites: a cone fixed point,
/// a projection with a genuine polar part, a pure sheet trend (which fails
/// the bound's applicability conditions on purpose), and the mixed trend.
inline std::vector<std::pair<std::string, GridField>> standard_corpus(GridSpec grid) {
  std::vector<std::pair<std::string, GridField>> out;
  out.emplace_back("zero", builtin_trend("zero", grid));
  out.emplace_back("linear", builtin_trend("linear", grid));
  out.emplace_back("tsquared", builtin_trend("tsquared", grid));
  out.emplace_back("product", builtin_trend("product", grid, TrendParams{1.0, 1.0, 0.75, 0, 0}));
  out.emplace_back("tsquared+product", builtin_trend("tsquared+product", grid));
  return out;
}

}  // namespace awf
