#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "awf/cone.hpp"
#include "awf/field_sim.hpp"
#include "awf/normal.hpp"

namespace awf {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;

/// Lipschitz radius |P_f - P_0| <= |f| / sqrt(2 pi).
inline double li_kuelbs_delta(const AdditiveRkhsFn& f) {
  return std::sqrt(f.norm_sq()) * kInvSqrt2Pi;
}

/// Phi(alpha - |g|) <= P_g <= P_f <= Phi(alpha + |f|) for g >= f nodewise,
/// alpha = Phi^{-1}(P_0) supplied by the caller (typically from simulation).
inline std::pair<double, double> sandwich_bounds(double alpha, const AdditiveRkhsFn& f,
                                                 const AdditiveRkhsFn& g,
                                                 double domination_tol = 1e-12) {
  if (!std::isfinite(alpha)) throw std::invalid_argument("sandwich_bounds: alpha must be finite");
  if (f.grid() != g.grid()) throw std::invalid_argument("sandwich_bounds: grid mismatch");
  GridField F = evaluate_field(f), G = evaluate_field(g);
  for (std::size_t k = 0; k < F.values.size(); ++k)
    if (G.values[k] < F.values[k] - domination_tol)
      throw std::domain_error("sandwich_bounds: g must dominate f at every node");
  return {normal_cdf(alpha - std::sqrt(g.norm_sq())), normal_cdf(alpha + std::sqrt(f.norm_sq()))};
}

/// Riemann-Stieltjes sum with left-endpoint evaluation of the boundary trace:
/// sum_k u[k-1] * (m[k] - m[k-1]) over node-indexed sequences of length n+1.
inline double stieltjes_1d(std::span<const double> u_trace, std::span<const double> m) {
  if (u_trace.size() != m.size() || m.size() < 2)
    throw std::invalid_argument("stieltjes_1d: traces must share a length >= 2");
  double s = 0.0;
  for (std::size_t k = 1; k < m.size(); ++k) s += u_trace[k - 1] * (m[k] - m[k - 1]);
  return s;
}

/// 2D analog against the adjacent increments of a cell function: each interior
/// increment of c is weighted by u at the lower-left node of its 2x2 block.
inline double stieltjes_2d(const GridField& u, const H2Fn& c) {
  if (u.grid != c.grid) throw std::invalid_argument("stieltjes_2d: shape mismatch");
  const int n = c.grid.n;
  double s = 0.0;
  for (int i = 0; i + 1 < n; ++i)
    for (int j = 0; j + 1 < n; ++j) {
      const double inc = c.cell(i + 1, j + 1) - c.cell(i + 1, j) - c.cell(i, j + 1) + c.cell(i, j);
      s += u.at(i, j) * inc;
    }
  return s;
}

/// Applicability conditions of the exponential upper bound: the combined axis
/// derivatives fbar13(t) = fbar1'(t) - fbar3''(t,0) and fbar23 must be
/// non-negative and non-increasing. Decay conditions at infinity hold by
/// policy (bounded boundary, derivative data supported in [0,T]^2) and are
/// recorded rather than tested.
struct ConditionReport {
  bool f13_nonneg = false, f13_nonincreasing = false;
  bool f23_nonneg = false, f23_nonincreasing = false;
  bool limits_ok = true;
  double max_violation = 0.0;
  double tol = 0.0;

  bool all_ok() const {
    return f13_nonneg && f13_nonincreasing && f23_nonneg && f23_nonincreasing && limits_ok;
  }
};

namespace detail {
inline std::vector<double> combined_axis_derivative(const AdditiveRkhsFn& fbar, bool first_axis) {
  const int n = fbar.grid().n;
  std::vector<double> out(n);
  for (int k = 0; k < n; ++k)
    out[k] = first_axis ? fbar.h1.d[k] - fbar.h3.cell(k, 0)
                        : fbar.h2.d[k] - fbar.h3.cell(0, k);
  return out;
}
}  // namespace detail

inline ConditionReport check_theorem1_conditions(const ProjectionResult<AdditiveRkhsFn>& fbar,
                                                 const GridField& u, double tol = 1e-9) {
  for (double v : u.values)
    if (!std::isfinite(v))
      throw std::invalid_argument("check_theorem1_conditions: boundary must be finite");
  ConditionReport rep;
  rep.tol = tol;
  double worst = 0.0;
  auto check_family = [&](const std::vector<double>& d, bool& nonneg, bool& noninc) {
    double v_neg = 0.0, v_inc = 0.0;
    for (double x : d) v_neg = std::max(v_neg, -x);
    for (std::size_t k = 0; k + 1 < d.size(); ++k) v_inc = std::max(v_inc, d[k + 1] - d[k]);
    nonneg = v_neg <= tol;
    noninc = v_inc <= tol;
    worst = std::max({worst, v_neg, v_inc});
  };
  std::vector<double> f13 = detail::combined_axis_derivative(fbar.projection, true);
  std::vector<double> f23 = detail::combined_axis_derivative(fbar.projection, false);
  check_family(f13, rep.f13_nonneg, rep.f13_nonincreasing);
  check_family(f23, rep.f23_nonneg, rep.f23_nonincreasing);
  rep.limits_ok = true;
  rep.max_violation = worst;
  return rep;
}

enum class ResidualMode { One, MonteCarlo };

struct BoundConfig {
  ResidualMode residual_mode = ResidualMode::One;
  long n_samples = 20000;
  std::uint64_t seed = 1;
  int threads = 1;
  std::optional<double> alpha;  // Phi^{-1}(P_0); estimated when absent
  double condition_tol = 1e-9;
  ProjectionOptions projection;
};

struct BoundReport {
  double norm_f = 0.0;       // |f|
  double norm_fbar = 0.0;    // |fbar|
  double li_kuelbs_delta = 0.0;
  double alpha = 0.0;
  double sandwich_lower = 0.0, sandwich_upper = 0.0;
  bool applicable = false;
  std::optional<double> theorem1_factor;  // absent when conditions fail
  std::optional<double> theorem1_bound;
  double stieltjes_s1 = 0.0, stieltjes_s2 = 0.0, stieltjes_s3 = 0.0;
  std::optional<CrossingEstimate> residual_estimate;  // absent in certified mode
  std::optional<CrossingEstimate> p0_estimate;        // absent when alpha was supplied
  ConditionReport conditions;
  double projection_residual = 0.0;
  double projection_ortho_defect = 0.0;
};

namespace detail {

/// Atom sum of the zero-extended step integrator against a boundary trace:
/// the integrator takes cell values m_1..m_n and drops to 0 beyond T, so its
/// measure has atoms (m_{k+1} - m_k) at the nodes t_k, k = 1..n. Evaluating
/// the trace at the atom location keeps the discrete bound exact.
inline double zero_extended_atom_sum(std::span<const double> u_at_nodes_1_to_n,
                                     std::span<const double> cells) {
  const std::size_t n = cells.size();
  double s = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const double next = (k < n) ? cells[k] : 0.0;
    s += u_at_nodes_1_to_n[k - 1] * (next - cells[k - 1]);
  }
  return s;
}

}  // namespace detail

/// Exponential upper bound P_f <= P_{f-fbar} * exp(-S1 - S2 + S3 - |fbar|^2/2)
/// with all Stieltjes terms taken against the zero-extended projections.
/// The report also carries the Lipschitz radius and the Phi-sandwich.
inline BoundReport theorem1_upper_bound(const AdditiveRkhsFn& f, const GridField& u,
                                        const BoundConfig& cfg = {}) {
  if (f.grid() != u.grid) throw std::invalid_argument("theorem1_upper_bound: grid mismatch");
  const int n = u.grid.n;

  BoundReport rep;
  rep.norm_f = std::sqrt(f.norm_sq());
  rep.li_kuelbs_delta = rep.norm_f * kInvSqrt2Pi;

  ProjectionResult<AdditiveRkhsFn> proj = project_v2plus(f, cfg.projection);
  rep.norm_fbar = std::sqrt(proj.projection.norm_sq());
  rep.projection_residual = proj.residual;
  rep.projection_ortho_defect = proj.orthogonality_defect;
  rep.conditions = check_theorem1_conditions(proj, u, cfg.condition_tol);
  rep.applicable = rep.conditions.all_ok();

  EstimatorOptions mc_opts;
  mc_opts.threads = cfg.threads;

  if (cfg.alpha) {
    rep.alpha = *cfg.alpha;
  } else {
    CrossingEstimate p0 =
        estimate_plain(GridField(u.grid), u, cfg.n_samples, cfg.seed, mc_opts);
    const double eps = 0.5 / static_cast<double>(p0.n_samples);
    rep.alpha = normal_quantile(std::clamp(p0.p_hat, eps, 1.0 - eps));
    rep.p0_estimate = p0;
  }
  rep.sandwich_lower = normal_cdf(rep.alpha - rep.norm_fbar);
  rep.sandwich_upper = normal_cdf(rep.alpha + rep.norm_f);

  if (!rep.applicable) return rep;

  std::vector<double> f13 = detail::combined_axis_derivative(proj.projection, true);
  std::vector<double> f23 = detail::combined_axis_derivative(proj.projection, false);
  std::vector<double> u1(n), u2(n);
  for (int k = 1; k <= n; ++k) u1[k - 1] = u.at(k, 0);
  for (int k = 1; k <= n; ++k) u2[k - 1] = u.at(0, k);
  rep.stieltjes_s1 = detail::zero_extended_atom_sum(u1, f13);
  rep.stieltjes_s2 = detail::zero_extended_atom_sum(u2, f23);

  // 2D term: zero-extended dual increments of the projected sheet derivative;
  // the axis atoms (k=0 or l=0) are already folded into f13/f23 above.
  std::vector<double> D = detail::v2_dual_increments(proj.projection.h3);
  double s3 = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b)
      s3 += u.at(a + 1, b + 1) * D[static_cast<std::size_t>(a) * n + b];
  rep.stieltjes_s3 = s3;

  const double exponent = -rep.stieltjes_s1 - rep.stieltjes_s2 + rep.stieltjes_s3 -
                          0.5 * proj.projection.norm_sq();
  rep.theorem1_factor = std::exp(exponent);

  double residual_p = 1.0;
  if (cfg.residual_mode == ResidualMode::MonteCarlo) {
    GridField F = evaluate_field(f);
    GridField Fbar = evaluate_field(proj.projection);
    CrossingEstimate res =
        estimate_plain(F - Fbar, u, cfg.n_samples, cfg.seed + 1, mc_opts);
    residual_p = res.p_hat;
    rep.residual_estimate = res;
  }
  rep.theorem1_bound = *rep.theorem1_factor * residual_p;
  return rep;
}

struct LdOptions {
  long n_samples = 100000;
  std::uint64_t seed = 1;
  int threads = 1;
  Method method = Method::Importance;  // plain estimates underflow quickly
  ProjectionOptions projection;
};

struct LdRow {
  double gamma = 0.0;
  double p_hat = 0.0, std_err = 0.0;
  double ln_p = 0.0, ci_lo = 0.0, ci_hi = 0.0;
  double p_hat_fbar = 0.0, std_err_fbar = 0.0, ln_p_fbar = 0.0;
};

struct LdReport {
  std::vector<LdRow> rows;
  double slope = 0.0;   // OLS slope of ln p_hat against gamma^2/2
  double target = 0.0;  // -|fbar|^2
  double ratio = 0.0;   // slope / target
};

/// Large-deviation slope study: estimates P_{gamma f} and P_{gamma fbar} with
/// the Cameron-Martin shift gamma*fbar and regresses ln P on gamma^2/2.
inline LdReport ld_slope(const AdditiveRkhsFn& f, const GridField& u,
                         const std::vector<double>& gammas, const LdOptions& opts = {}) {
  if (gammas.empty()) throw std::invalid_argument("ld_slope: need at least one gamma");
  for (std::size_t k = 0; k + 1 < gammas.size(); ++k)
    if (!(gammas[k] > 0.0) || gammas[k + 1] <= gammas[k])
      throw std::invalid_argument("ld_slope: gammas must be positive and increasing");
  if (!(gammas.back() > 0.0)) throw std::invalid_argument("ld_slope: gammas must be positive");

  GridField F = evaluate_field(f);
  if (*std::max_element(F.values.begin(), F.values.end()) <= 0.0)
    throw std::domain_error("ld_slope: trend must be positive somewhere");

  ProjectionResult<AdditiveRkhsFn> proj = project_v2plus(f, opts.projection);
  GridField Fbar = evaluate_field(proj.projection);

  EstimatorOptions mc;
  mc.threads = opts.threads;
  LdReport rep;
  rep.target = -proj.projection.norm_sq();

  std::vector<double> xs, ys;
  for (std::size_t k = 0; k < gammas.size(); ++k) {
    const double g = gammas[k];
    GridField Fg(F.grid), Fbg(F.grid);
    for (std::size_t t = 0; t < F.values.size(); ++t) {
      Fg.values[t] = g * F.values[t];
      Fbg.values[t] = g * Fbar.values[t];
    }
    AdditiveRkhsFn shift = proj.projection.scaled(g);
    CrossingEstimate ef, eb;
    if (opts.method == Method::Importance) {
      ef = estimate_importance(Fg, u, shift, opts.n_samples, opts.seed + 2 * k, mc);
      eb = estimate_importance(Fbg, u, shift, opts.n_samples, opts.seed + 2 * k + 1, mc);
    } else {
      ef = estimate_plain(Fg, u, opts.n_samples, opts.seed + 2 * k, mc);
      eb = estimate_plain(Fbg, u, opts.n_samples, opts.seed + 2 * k + 1, mc);
    }
    if (ef.p_hat <= 0.0 || eb.p_hat <= 0.0)
      throw std::runtime_error(
          "ld_slope: estimate vanished; rerun with importance sampling (shift gamma*fbar)");
    LdRow row;
    row.gamma = g;
    row.p_hat = ef.p_hat;
    row.std_err = ef.std_err;
    row.ln_p = std::log(ef.p_hat);
    const double se_ln = ef.std_err / ef.p_hat;
    row.ci_lo = row.ln_p - 3.0 * se_ln;
    row.ci_hi = row.ln_p + 3.0 * se_ln;
    row.p_hat_fbar = eb.p_hat;
    row.std_err_fbar = eb.std_err;
    row.ln_p_fbar = std::log(eb.p_hat);
    rep.rows.push_back(row);
    xs.push_back(0.5 * g * g);
    ys.push_back(row.ln_p);
  }

  // OLS with intercept; the intercept absorbs the sub-quadratic terms.
  const double m = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < xs.size(); ++k) {
    sx += xs[k];
    sy += ys[k];
    sxx += xs[k] * xs[k];
    sxy += xs[k] * ys[k];
  }
  const double denom = m * sxx - sx * sx;
  rep.slope = denom != 0.0 ? (m * sxy - sx * sy) / denom : 0.0;
  rep.ratio = rep.target != 0.0 ? rep.slope / rep.target : 0.0;
  return rep;
}

}  // namespace awf
