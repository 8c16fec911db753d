#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "awf/grid.hpp"

namespace awf {

namespace detail {
inline void require_finite(std::span<const double> xs, const char* what) {
  for (double x : xs)
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": non-finite entry");
}
}  // namespace detail

/// One-parameter RKHS element h(t) = integral of h' over [0,t], stored through
/// its piecewise-constant derivative on cells [t_{k-1}, t_k); implicitly zero
/// beyond T. Squared norm: delta * sum d[k]^2.
struct H1Fn {
  GridSpec grid;
  std::vector<double> d;  // n cell values of h'

  H1Fn() = default;
  explicit H1Fn(GridSpec g) : grid(g), d(static_cast<std::size_t>(g.n), 0.0) {}
  H1Fn(GridSpec g, std::vector<double> dd) : grid(g), d(std::move(dd)) {
    if (d.size() != static_cast<std::size_t>(g.n))
      throw std::invalid_argument("H1Fn: derivative sample count must equal n");
  }

  double norm_sq() const {
    double s = 0.0;
    for (double x : d) s += x * x;
    return grid.delta * s;
  }

  /// h(t_k) by cumulative sum.
  double value_at(int k) const {
    if (k < 0 || k > grid.n) throw std::invalid_argument("H1Fn::value_at: node out of range");
    double s = 0.0;
    for (int j = 0; j < k; ++j) s += d[j];
    return grid.delta * s;
  }
};

/// Two-parameter RKHS element stored through the piecewise-constant mixed
/// derivative h'' on 2D cells; zero beyond [0,T]^2. Squared norm:
/// delta^2 * sum c[i][j]^2. Reconstruction vanishes on both axes.
struct H2Fn {
  GridSpec grid;
  std::vector<double> c;  // n*n, row-major, c[i*n+j] on cell (i,j)

  H2Fn() = default;
  explicit H2Fn(GridSpec g) : grid(g), c(static_cast<std::size_t>(g.n) * g.n, 0.0) {}
  H2Fn(GridSpec g, std::vector<double> cc) : grid(g), c(std::move(cc)) {
    if (c.size() != static_cast<std::size_t>(g.n) * g.n)
      throw std::invalid_argument("H2Fn: mixed-derivative sample count must equal n*n");
  }

  double& cell(int i, int j) { return c[static_cast<std::size_t>(i) * grid.n + j]; }
  double cell(int i, int j) const { return c[static_cast<std::size_t>(i) * grid.n + j]; }

  double norm_sq() const {
    double s = 0.0;
    for (double x : c) s += x * x;
    return grid.delta * grid.delta * s;
  }

  double value_at(int i, int j) const {
    if (i < 0 || i > grid.n || j < 0 || j > grid.n)
      throw std::invalid_argument("H2Fn::value_at: node out of range");
    double s = 0.0;
    for (int a = 0; a < i; ++a)
      for (int b = 0; b < j; ++b) s += cell(a, b);
    return grid.delta * grid.delta * s;
  }
};

/// Element of the additive-field RKHS: h = h1(t1) + h2(t2) + h3(t1,t2).
/// The inner product is the sum of the component inner products, so the
/// squared norm is Pythagorean by construction.
struct AdditiveRkhsFn {
  H1Fn h1, h2;
  H2Fn h3;

  AdditiveRkhsFn() = default;
  explicit AdditiveRkhsFn(GridSpec g) : h1(g), h2(g), h3(g) {}
  AdditiveRkhsFn(H1Fn a, H1Fn b, H2Fn c3) : h1(std::move(a)), h2(std::move(b)), h3(std::move(c3)) {
    if (h1.grid != h2.grid || h1.grid != h3.grid)
      throw std::invalid_argument("AdditiveRkhsFn: components must share one grid");
  }

  const GridSpec& grid() const { return h1.grid; }
  double norm_sq() const { return h1.norm_sq() + h2.norm_sq() + h3.norm_sq(); }

  AdditiveRkhsFn scaled(double s) const {
    AdditiveRkhsFn out = *this;
    for (auto& x : out.h1.d) x *= s;
    for (auto& x : out.h2.d) x *= s;
    for (auto& x : out.h3.c) x *= s;
    return out;
  }
};

inline double h1_inner(const H1Fn& f, const H1Fn& g) {
  if (f.grid != g.grid) throw std::invalid_argument("h1_inner: grid mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < f.d.size(); ++k) s += f.d[k] * g.d[k];
  return f.grid.delta * s;
}

inline double h2_inner(const H2Fn& f, const H2Fn& g) {
  if (f.grid != g.grid) throw std::invalid_argument("h2_inner: grid mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < f.c.size(); ++k) s += f.c[k] * g.c[k];
  return f.grid.delta * f.grid.delta * s;
}

inline double additive_inner(const AdditiveRkhsFn& f, const AdditiveRkhsFn& g) {
  return h1_inner(f.h1, g.h1) + h1_inner(f.h2, g.h2) + h2_inner(f.h3, g.h3);
}

/// Forward first differences of an axis trace (n+1 node values, starting at 0).
inline H1Fn differentiate(std::span<const double> trace, GridSpec grid) {
  if (trace.size() != static_cast<std::size_t>(grid.n + 1))
    throw std::invalid_argument("differentiate: trace length must be n+1");
  detail::require_finite(trace, "differentiate");
  if (trace[0] != 0.0) throw std::domain_error("differentiate: axis trace must start at 0");
  H1Fn out(grid);
  for (int k = 0; k < grid.n; ++k) out.d[k] = (trace[k + 1] - trace[k]) / grid.delta;
  return out;
}

/// Mixed second differences of a field vanishing on both axes.
inline H2Fn differentiate(const GridField& F) {
  const int n = F.grid.n;
  detail::require_finite(F.values, "differentiate");
  for (int i = 0; i <= n; ++i)
    if (F.at(i, 0) != 0.0 || F.at(0, i) != 0.0)
      throw std::domain_error("differentiate: field must vanish on both axes");
  H2Fn out(F.grid);
  const double d2 = F.grid.delta * F.grid.delta;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      out.cell(i, j) =
          (F.at(i + 1, j + 1) - F.at(i, j + 1) - F.at(i + 1, j) + F.at(i, j)) / d2;
  return out;
}

inline AdditiveRkhsFn differentiate(const AdditiveTrend& a) {
  return AdditiveRkhsFn(differentiate(std::span<const double>(a.f1), a.grid),
                        differentiate(std::span<const double>(a.f2), a.grid),
                        differentiate(a.f3));
}

/// Node values by cumulative sums; exact inverse of differentiate at nodes.
inline std::vector<double> reconstruct(const H1Fn& h) {
  std::vector<double> out(h.grid.n + 1, 0.0);
  double acc = 0.0;
  for (int k = 0; k < h.grid.n; ++k) {
    acc += h.d[k];
    out[k + 1] = h.grid.delta * acc;
  }
  return out;
}

inline GridField reconstruct(const H2Fn& h) {
  const int n = h.grid.n;
  GridField out(h.grid);
  const double d2 = h.grid.delta * h.grid.delta;
  std::vector<double> colacc(n, 0.0);
  for (int i = 1; i <= n; ++i) {
    double row = 0.0;
    for (int j = 1; j <= n; ++j) {
      colacc[j - 1] += h.cell(i - 1, j - 1);
      row += colacc[j - 1];
      out.at(i, j) = d2 * row;
    }
  }
  return out;
}

inline double evaluate(const AdditiveRkhsFn& h, int i, int j) {
  if (i < 0 || i > h.grid().n || j < 0 || j > h.grid().n)
    throw std::invalid_argument("evaluate: node index out of range");
  return h.h1.value_at(i) + h.h2.value_at(j) + h.h3.value_at(i, j);
}

/// All node values at once (cumulative sweep, O(n^2)).
inline GridField evaluate_field(const AdditiveRkhsFn& h) {
  GridField f3 = reconstruct(h.h3);
  std::vector<double> v1 = reconstruct(h.h1);
  std::vector<double> v2 = reconstruct(h.h2);
  const int n = h.grid().n;
  GridField out(h.grid());
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j) out.at(i, j) = v1[i] + v2[j] + f3.at(i, j);
  return out;
}

/// Swap the two axes: (h1,h2) exchanged, h3 transposed. Preserves the norm.
inline AdditiveRkhsFn transpose(const AdditiveRkhsFn& h) {
  const int n = h.grid().n;
  H2Fn ht(h.grid());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) ht.cell(i, j) = h.h3.cell(j, i);
  return AdditiveRkhsFn(h.h2, h.h1, std::move(ht));
}

}  // namespace awf
