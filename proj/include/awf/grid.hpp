#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

namespace awf {

/// Uniform square discretization of [0,T]^2: n cells per axis, nodes t_k = k*delta.
/// Immutable after construction; all module types share one GridSpec by value.
struct GridSpec {
  double T = 1.0;
  int n = 1;
  double delta = 1.0;

  double node(int k) const { return static_cast<double>(k) * delta; }
  int nodes() const { return n + 1; }

  friend bool operator==(const GridSpec& a, const GridSpec& b) {
    return a.T == b.T && a.n == b.n;
  }
  friend bool operator!=(const GridSpec& a, const GridSpec& b) { return !(a == b); }
};

inline GridSpec make_grid(double T, int n) {
  if (!std::isfinite(T) || T <= 0.0)
    throw std::invalid_argument("make_grid: horizon T must be positive and finite");
  if (n < 1) throw std::invalid_argument("make_grid: step count n must be >= 1");
  return GridSpec{T, n, T / n};
}

/// Node-sampled function on the grid: values[i][j] = F(t_i, t_j),
/// i indexing the first coordinate (rows).
struct GridField {
  GridSpec grid;
  std::vector<double> values;  // (n+1)^2, row-major

  GridField() = default;
  explicit GridField(GridSpec g)
      : grid(g), values(static_cast<std::size_t>(g.n + 1) * (g.n + 1), 0.0) {}

  double& at(int i, int j) { return values[static_cast<std::size_t>(i) * (grid.n + 1) + j]; }
  double at(int i, int j) const { return values[static_cast<std::size_t>(i) * (grid.n + 1) + j]; }

  template <class F>
  static GridField from_function(GridSpec g, F&& f) {
    GridField out(g);
    for (int i = 0; i <= g.n; ++i)
      for (int j = 0; j <= g.n; ++j) out.at(i, j) = f(g.node(i), g.node(j));
    return out;
  }

  static GridField constant(GridSpec g, double v) {
    GridField out(g);
    for (auto& x : out.values) x = v;
    return out;
  }

  friend GridField operator-(const GridField& a, const GridField& b) {
    if (a.grid != b.grid) throw std::invalid_argument("GridField: grid mismatch");
    GridField out(a.grid);
    for (std::size_t k = 0; k < a.values.size(); ++k) out.values[k] = a.values[k] - b.values[k];
    return out;
  }
};

/// Three-way split of a trend F with F(0,0)=0 into axis traces and a part
/// vanishing on both axes:
///   F(s,t) = f1(s) + f2(t) + f3(s,t),  f1 = F(.,0), f2 = F(0,.).
/// The split is unique (set s=0 / t=0 to recover the pieces).
struct AdditiveTrend {
  GridSpec grid;
  std::vector<double> f1, f2;  // n+1 axis node values, f1[0] = f2[0] = 0
  GridField f3;                // vanishes on both axes
};

inline AdditiveTrend decompose_trend(const GridField& F) {
  if (F.at(0, 0) != 0.0)
    throw std::domain_error("decompose_trend: requires F(0,0) = 0");
  const int n = F.grid.n;
  AdditiveTrend out{F.grid, std::vector<double>(n + 1), std::vector<double>(n + 1), GridField(F.grid)};
  for (int i = 0; i <= n; ++i) out.f1[i] = F.at(i, 0);
  for (int j = 0; j <= n; ++j) out.f2[j] = F.at(0, j);
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) out.f3.at(i, j) = F.at(i, j) - out.f1[i] - out.f2[j];
  return out;
}

inline GridField recompose(const AdditiveTrend& a) {
  if (a.f3.grid != a.grid ||
      a.f1.size() != static_cast<std::size_t>(a.grid.n + 1) ||
      a.f2.size() != static_cast<std::size_t>(a.grid.n + 1))
    throw std::invalid_argument("recompose: components disagree on the grid");
  GridField out(a.grid);
  for (int i = 0; i <= a.grid.n; ++i)
    for (int j = 0; j <= a.grid.n; ++j) out.at(i, j) = a.f1[i] + a.f2[j] + a.f3.at(i, j);
  return out;
}

}  // namespace awf
