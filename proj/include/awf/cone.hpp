#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "awf/rkhs.hpp"
#include "awf/rng.hpp"

namespace awf {

/// The projection cones and their polars. All cones live in the truncated
/// model where derivative data is implicitly zero beyond T; membership
/// therefore includes the boundary constraints at the far edge (a derivative
/// must step down to zero monotonically, never up).
enum class ConeId { V1, V2, V2Plus, V1Polar, V2Polar, V2PlusPolar };

struct ProjectionOptions {
  double cycle_tol = 1e-10;      // Dykstra stop: max correction change per cycle, scaled
  int max_cycles = 100000;
  double ortho_tol = 1e-8;       // scaled by (1 + |input|^2)
  double node_tol = 1e-8;        // scaled by (1 + |input|)
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Moreau split of the input: input = projection + polar_part, with
/// <projection, polar_part> = 0 up to tolerance.
template <class T>
struct ProjectionResult {
  T projection;
  T polar_part;
  int iterations = 0;
  double residual = 0.0;             // max remaining constraint violation of the projection
  double orthogonality_defect = 0.0; // <projection, polar_part>
};

namespace detail {

/// Weighted pool-adjacent-violators, non-increasing fit, uniform weights.
/// Blocks merge left-to-right; each block carries its mean.
inline std::vector<double> pava_antitonic(const std::vector<double>& y) {
  const std::size_t n = y.size();
  std::vector<double> mean;
  std::vector<std::size_t> count;
  mean.reserve(n);
  count.reserve(n);
  for (double v : y) {
    mean.push_back(v);
    count.push_back(1);
    while (mean.size() > 1 && mean[mean.size() - 2] < mean.back()) {
      const std::size_t w = count[count.size() - 2] + count.back();
      const double m = (mean[mean.size() - 2] * count[count.size() - 2] +
                        mean.back() * count.back()) / static_cast<double>(w);
      mean.pop_back();
      count.pop_back();
      mean.back() = m;
      count.back() = w;
    }
  }
  std::vector<double> out(n);
  std::size_t k = 0;
  for (std::size_t b = 0; b < mean.size(); ++b)
    for (std::size_t r = 0; r < count[b]; ++r) out[k++] = mean[b];
  return out;
}

/// Zero-extended dual increments of a cell matrix: D[a][b] is the 2D increment
/// of c over the node (t_{a+1}, t_{b+1}) treating cells beyond the grid as 0.
/// c lies in the cone V2 exactly when every D[a][b] >= 0; the map c -> D is a
/// linear bijection whose inverse is the tail double sum.
inline std::vector<double> v2_dual_increments(const H2Fn& h) {
  const int n = h.grid.n;
  std::vector<double> D(static_cast<std::size_t>(n) * n);
  auto cell = [&](int a, int b) -> double {
    return (a < n && b < n) ? h.cell(a, b) : 0.0;
  };
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      D[static_cast<std::size_t>(a) * n + b] =
          cell(a, b) - cell(a + 1, b) - cell(a, b + 1) + cell(a + 1, b + 1);
  return D;
}

inline H2Fn v2_from_dual_increments(GridSpec grid, const std::vector<double>& D) {
  const int n = grid.n;
  H2Fn out(grid);
  // c[i][j] = sum_{a>=i, b>=j} D[a][b]; tail double cumulative sum.
  std::vector<double> rowtail(n, 0.0);
  for (int i = n - 1; i >= 0; --i) {
    for (int j = n - 1; j >= 0; --j) {
      rowtail[j] += D[static_cast<std::size_t>(i) * n + j];
      out.cell(i, j) = (j + 1 < n ? out.cell(i, j + 1) : 0.0) + rowtail[j];
    }
  }
  return out;
}

}  // namespace detail

/// Projection onto V1 = {h' non-increasing, h'(T-) >= 0} (zero extension makes
/// the trailing constraint part of monotonicity on the half line). The fit is
/// the antitonic regression clipped at zero, which solves the constrained
/// least squares exactly.
inline ProjectionResult<H1Fn> project_v1(const H1Fn& h, const ProjectionOptions& opts = {}) {
  detail::require_finite(h.d, "project_v1");
  ProjectionResult<H1Fn> out{H1Fn(h.grid), H1Fn(h.grid)};
  std::vector<double> fit = detail::pava_antitonic(h.d);
  for (auto& v : fit) v = std::max(v, 0.0);
  out.projection.d = std::move(fit);
  for (int k = 0; k < h.grid.n; ++k) out.polar_part.d[k] = h.d[k] - out.projection.d[k];
  out.iterations = 1;
  double viol = std::max(0.0, -out.projection.d.back());
  for (int k = 0; k + 1 < h.grid.n; ++k)
    viol = std::max(viol, out.projection.d[k + 1] - out.projection.d[k]);
  out.residual = viol;
  out.orthogonality_defect = h1_inner(out.projection, out.polar_part);
  return out;
}

/// Projection onto V2 via Dykstra's cyclic scheme over the n^2 half-spaces
/// D_ab(c) >= 0 (adjacent supermodularity in the interior, monotone step-down
/// to zero along the far edge, corner non-negativity). These are exactly the
/// dual-increment coordinates, so the feasible set equals the full cone.
inline ProjectionResult<H2Fn> project_v2(const H2Fn& h, const ProjectionOptions& opts = {}) {
  detail::require_finite(h.c, "project_v2");
  const int n = h.grid.n;
  ProjectionResult<H2Fn> out{H2Fn(h.grid), H2Fn(h.grid)};
  std::vector<double> x = h.c;
  std::vector<double> corr(static_cast<std::size_t>(n) * n, 0.0);

  auto at = [&](int a, int b) -> double& { return x[static_cast<std::size_t>(a) * n + b]; };
  auto nrm2 = [&](int a, int b) {
    double k = 1.0;
    if (a + 1 < n) k *= 2.0;
    if (b + 1 < n) k *= 2.0;
    return k;  // number of grid cells the constraint normal touches
  };

  const double scale = 1.0 + std::sqrt(h.norm_sq());
  const double stop = opts.cycle_tol * scale;
  int cyc = 0;
  double cycle_change = 0.0;
  for (; cyc < opts.max_cycles; ++cyc) {
    cycle_change = 0.0;
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        const std::size_t m = static_cast<std::size_t>(a) * n + b;
        double dab = at(a, b);
        if (a + 1 < n) dab -= at(a + 1, b);
        if (b + 1 < n) dab -= at(a, b + 1);
        if (a + 1 < n && b + 1 < n) dab += at(a + 1, b + 1);
        const double g2 = nrm2(a, b);
        const double dy = dab + corr[m] * g2;  // constraint value with correction restored
        const double znew = dy < 0.0 ? dy / g2 : 0.0;
        const double upd = corr[m] - znew;
        if (upd != 0.0) {
          at(a, b) += upd;
          if (a + 1 < n) at(a + 1, b) -= upd;
          if (b + 1 < n) at(a, b + 1) -= upd;
          if (a + 1 < n && b + 1 < n) at(a + 1, b + 1) += upd;
        }
        cycle_change = std::max(cycle_change, std::abs(znew - corr[m]));
        corr[m] = znew;
      }
    }
    if (cycle_change <= stop) {
      ++cyc;
      break;
    }
  }

  out.projection.c = std::move(x);
  double viol = 0.0;
  for (double dv : detail::v2_dual_increments(out.projection)) viol = std::max(viol, -dv);
  if (cyc >= opts.max_cycles && cycle_change > stop)
    throw ConvergenceError("project_v2: Dykstra did not converge within max_cycles", viol);
  for (std::size_t k = 0; k < out.projection.c.size(); ++k)
    out.polar_part.c[k] = h.c[k] - out.projection.c[k];
  out.iterations = cyc;
  out.residual = viol;
  out.orthogonality_defect = h2_inner(out.projection, out.polar_part);
  return out;
}

/// Componentwise projection onto V2+ = V1 x V1 x V2; the inner product splits,
/// so the product of the component projections is the projection.
inline ProjectionResult<AdditiveRkhsFn> project_v2plus(const AdditiveRkhsFn& f,
                                                       const ProjectionOptions& opts = {}) {
  auto r1 = project_v1(f.h1, opts);
  auto r2 = project_v1(f.h2, opts);
  auto r3 = project_v2(f.h3, opts);
  ProjectionResult<AdditiveRkhsFn> out{
      AdditiveRkhsFn(r1.projection, r2.projection, r3.projection),
      AdditiveRkhsFn(r1.polar_part, r2.polar_part, r3.polar_part)};
  out.iterations = std::max({r1.iterations, r2.iterations, r3.iterations});
  out.residual = std::max({r1.residual, r2.residual, r3.residual});
  out.orthogonality_defect =
      r1.orthogonality_defect + r2.orthogonality_defect + r3.orthogonality_defect;
  return out;
}

/// Largest violated margin against the cone's constraint system; 0 for members.
/// Polar cones are characterized by the cone generators (step and rectangle
/// indicators), i.e. by non-positive node values of the reconstruction.
inline double check_cone_membership(const H1Fn& x, ConeId cone) {
  if (cone == ConeId::V1) {
    double v = std::max(0.0, -x.d.back());
    for (std::size_t k = 0; k + 1 < x.d.size(); ++k)
      v = std::max(v, x.d[k + 1] - x.d[k]);
    return v;
  }
  if (cone == ConeId::V1Polar) {
    double v = 0.0, acc = 0.0;
    for (double dk : x.d) {
      acc += dk;
      v = std::max(v, x.grid.delta * acc);
    }
    return v;
  }
  throw std::invalid_argument("check_cone_membership: cone does not apply to H1Fn");
}

inline double check_cone_membership(const H2Fn& x, ConeId cone) {
  if (cone == ConeId::V2) {
    double v = 0.0;
    for (double dv : detail::v2_dual_increments(x)) v = std::max(v, -dv);
    return v;
  }
  if (cone == ConeId::V2Polar) {
    GridField r = reconstruct(x);
    double v = 0.0;
    for (double nodeval : r.values) v = std::max(v, nodeval);
    return v;
  }
  throw std::invalid_argument("check_cone_membership: cone does not apply to H2Fn");
}

inline double check_cone_membership(const AdditiveRkhsFn& x, ConeId cone) {
  if (cone == ConeId::V2Plus)
    return std::max({check_cone_membership(x.h1, ConeId::V1),
                     check_cone_membership(x.h2, ConeId::V1),
                     check_cone_membership(x.h3, ConeId::V2)});
  if (cone == ConeId::V2PlusPolar)
    return std::max({check_cone_membership(x.h1, ConeId::V1Polar),
                     check_cone_membership(x.h2, ConeId::V1Polar),
                     check_cone_membership(x.h3, ConeId::V2Polar)});
  throw std::invalid_argument("check_cone_membership: cone does not apply to AdditiveRkhsFn");
}

/// Random cone members through the simplicial coordinates: non-negative
/// coefficients on the step / rectangle generators.
inline H1Fn random_v1_member(GridSpec grid, NormalStream& rng) {
  H1Fn out(grid);
  double tail = 0.0;
  for (int k = grid.n - 1; k >= 0; --k) {
    tail += std::abs(rng.next());
    out.d[k] = tail;  // built back-to-front: non-increasing and non-negative
  }
  return out;
}

inline H2Fn random_v2_member(GridSpec grid, NormalStream& rng) {
  const int n = grid.n;
  std::vector<double> D(static_cast<std::size_t>(n) * n);
  for (auto& v : D) v = std::abs(rng.next());
  return detail::v2_from_dual_increments(grid, D);
}

inline AdditiveRkhsFn random_v2plus_member(GridSpec grid, NormalStream& rng) {
  return AdditiveRkhsFn(random_v1_member(grid, rng), random_v1_member(grid, rng),
                        random_v2_member(grid, rng));
}

struct PolarVerifyReport {
  int trials = 0;
  double max_inner = 0.0;      // max <polar_part, v> over sampled cone members v
  double max_node_value = 0.0; // max node value of the reconstructed polar part
  bool ok = false;
};

namespace detail {
inline double polar_max_node(const H1Fn& q) {
  double m = 0.0, acc = 0.0;
  for (double dk : q.d) {
    acc += dk;
    m = std::max(m, q.grid.delta * acc);
  }
  return m;
}
inline double polar_max_node(const H2Fn& q) {
  GridField r = reconstruct(q);
  double m = 0.0;
  for (double v : r.values) m = std::max(m, v);
  return m;
}
inline double polar_max_node(const AdditiveRkhsFn& q) {
  return std::max({polar_max_node(q.h1), polar_max_node(q.h2), polar_max_node(q.h3)});
}
}  // namespace detail

/// Monte Carlo certificate that the polar part behaves like a polar-cone
/// element: non-positive pairing with random cone members and non-positive
/// node values.
inline PolarVerifyReport polar_verify(const ProjectionResult<H1Fn>& r, int trials,
                                      std::uint64_t seed, double tol = 1e-8) {
  PolarVerifyReport rep{trials, 0.0, detail::polar_max_node(r.polar_part), false};
  NormalStream rng(seed, 0);
  for (int t = 0; t < trials; ++t) {
    H1Fn v = random_v1_member(r.polar_part.grid, rng);
    rep.max_inner = std::max(rep.max_inner, h1_inner(r.polar_part, v));
  }
  rep.ok = rep.max_inner <= tol && rep.max_node_value <= tol;
  return rep;
}

inline PolarVerifyReport polar_verify(const ProjectionResult<H2Fn>& r, int trials,
                                      std::uint64_t seed, double tol = 1e-8) {
  PolarVerifyReport rep{trials, 0.0, detail::polar_max_node(r.polar_part), false};
  NormalStream rng(seed, 0);
  for (int t = 0; t < trials; ++t) {
    H2Fn v = random_v2_member(r.polar_part.grid, rng);
    rep.max_inner = std::max(rep.max_inner, h2_inner(r.polar_part, v));
  }
  rep.ok = rep.max_inner <= tol && rep.max_node_value <= tol;
  return rep;
}

inline PolarVerifyReport polar_verify(const ProjectionResult<AdditiveRkhsFn>& r, int trials,
                                      std::uint64_t seed, double tol = 1e-8) {
  PolarVerifyReport rep{trials, 0.0, detail::polar_max_node(r.polar_part), false};
  NormalStream rng(seed, 0);
  for (int t = 0; t < trials; ++t) {
    AdditiveRkhsFn v = random_v2plus_member(r.polar_part.grid(), rng);
    rep.max_inner = std::max(rep.max_inner, additive_inner(r.polar_part, v));
  }
  rep.ok = rep.max_inner <= tol && rep.max_node_value <= tol;
  return rep;
}

}  // namespace awf
