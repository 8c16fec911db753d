#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "awf/bounds.hpp"
#include "awf/builtins.hpp"
#include "awf/cone.hpp"
#include "awf/field_sim.hpp"
#include "awf/io.hpp"

namespace awf {

struct VerifyConfig {
  GridSpec grid = make_grid(1.0, 8);
  long n_samples = 20000;
  std::uint64_t seed = 1;
  int threads = 1;
  ProjectionOptions projection;
};

struct CheckResult {
  std::string name;
  bool pass = false;
  nlohmann::json detail;
};

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

inline double theory_cov(GridSpec g, int i1, int j1, int i2, int j2) {
  const double s1 = g.node(std::min(i1, i2)), s2 = g.node(std::min(j1, j2));
  return s1 + s2 + s1 * s2;
}

}  // namespace detail

/// Statistical and algebraic invariants of the whole stack at desk scale.
/// Deterministic for a fixed config; every threshold is fixed here.
inline std::vector<CheckResult> run_verify_suite(const VerifyConfig& cfg) {
  using nlohmann::json;
  std::vector<CheckResult> out;
  const GridSpec grid = cfg.grid;
  const int n = grid.n;
  EstimatorOptions mc;
  mc.threads = cfg.threads;

  // --- empirical covariance against the field's covariance function --------
  {
    Xoshiro256pp pick(cfg.seed, 0x9E3779B9ull);
    auto draw = [&]() {
      return 1 + static_cast<int>(pick.next_unit() * n);  // node index in [1, n]
    };
    std::vector<std::array<int, 4>> pairs;
    pairs.push_back({n, n, n, n});  // variance at (T,T)
    while (pairs.size() < 11) pairs.push_back({draw(), draw(), draw(), draw()});
    std::vector<double> sum(pairs.size(), 0.0), sum2(pairs.size(), 0.0);
    for (long s = 0; s < cfg.n_samples; ++s) {
      FieldSample fs = sample_field(grid, cfg.seed, static_cast<std::uint64_t>(s));
      for (std::size_t p = 0; p < pairs.size(); ++p) {
        const auto& q = pairs[p];
        const double prod = fs.w_at(q[0], q[1]) * fs.w_at(q[2], q[3]);
        sum[p] += prod;
        sum2[p] += prod * prod;
      }
    }
    bool pass = true;
    double worst_z = 0.0;
    const double N = static_cast<double>(cfg.n_samples);
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto& q = pairs[p];
      const double emp = sum[p] / N;
      const double se = std::sqrt(std::max(sum2[p] / N - emp * emp, 0.0) / N);
      const double theory = detail::theory_cov(grid, q[0], q[1], q[2], q[3]);
      const double z = std::abs(emp - theory) / std::max(se, 1e-300);
      worst_z = std::max(worst_z, z);
      pass = pass && z <= 4.0;
    }
    out.push_back({"covariance", pass, json{{"pairs", pairs.size()}, {"worst_z", worst_z}}});
  }

  // --- Moreau decomposition, orthogonality, membership, idempotence --------
  {
    bool pass = true;
    double worst = 0.0;
    auto track = [&](double v, double lim) {
      worst = std::max(worst, v / std::max(lim, 1e-300));
      pass = pass && v <= lim;
    };
    NormalStream rng(cfg.seed, 0xA11CEull);
    for (int rep = 0; rep < 12; ++rep) {
      AdditiveRkhsFn x(grid);
      for (auto& v : x.h1.d) v = rng.next();
      for (auto& v : x.h2.d) v = rng.next();
      for (auto& v : x.h3.c) v = rng.next();
      const double scale1 = 1.0 + std::sqrt(x.norm_sq());
      const double scale2 = 1.0 + x.norm_sq();
      auto r = project_v2plus(x, cfg.projection);
      // split adds back to the input
      double split = 0.0;
      for (int k = 0; k < n; ++k)
        split = std::max(split, std::abs(r.projection.h1.d[k] + r.polar_part.h1.d[k] - x.h1.d[k]));
      for (std::size_t k = 0; k < x.h3.c.size(); ++k)
        split = std::max(split,
                         std::abs(r.projection.h3.c[k] + r.polar_part.h3.c[k] - x.h3.c[k]));
      track(split, 1e-12 * scale1);
      track(std::abs(r.orthogonality_defect), 1e-8 * scale2);
      track(check_cone_membership(r.projection, ConeId::V2Plus), 1e-8 * scale1);
      track(check_cone_membership(r.polar_part, ConeId::V2PlusPolar), 1e-8 * scale1);
      auto rr = project_v2plus(r.projection, cfg.projection);
      track(std::sqrt(rr.polar_part.norm_sq()), 1e-8 * scale1);
      // positive homogeneity
      auto rg = project_v2plus(x.scaled(2.5), cfg.projection);
      double hom = 0.0;
      for (int k = 0; k < n; ++k)
        hom = std::max(hom, std::abs(rg.projection.h1.d[k] - 2.5 * r.projection.h1.d[k]));
      for (std::size_t k = 0; k < x.h3.c.size(); ++k)
        hom = std::max(hom, std::abs(rg.projection.h3.c[k] - 2.5 * r.projection.h3.c[k]));
      track(hom, 1e-7 * scale1);
      auto pv = polar_verify(r, 50, cfg.seed + rep, 1e-8 * scale2);
      pass = pass && pv.ok;
    }
    out.push_back({"moreau_projection", pass, json{{"worst_ratio", worst}}});
  }

  // --- integration-by-parts identity under refinement ----------------------
  {
    const double T = grid.T;
    GridField A32 = GridField::from_function(make_grid(T, 32), [T](double s, double t) {
      return (T - s) * (T - t) / (T * T);
    });
    GridField A16 = GridField::from_function(make_grid(T, 16), [T](double s, double t) {
      return (T - s) * (T - t) / (T * T);
    });
    GridField A8 = GridField::from_function(make_grid(T, 8), [T](double s, double t) {
      return (T - s) * (T - t) / (T * T);
    });
    std::vector<double> r8, r16, r32;
    for (int rep = 0; rep < 50; ++rep) {
      FieldSample fine = sample_field(make_grid(T, 32), cfg.seed, 0xB00ull + rep);
      r32.push_back(verify_ibp(A32, fine));
      r16.push_back(verify_ibp(A16, coarsen(fine, 2)));
      r8.push_back(verify_ibp(A8, coarsen(fine, 4)));
    }
    const double m8 = detail::median(r8), m16 = detail::median(r16), m32 = detail::median(r32);
    // exactness for a constant integrand, and a corrupted-sample control
    FieldSample s0 = sample_field(grid, cfg.seed, 0xB00ull);
    const double flat = verify_ibp(GridField::constant(grid, 0.7), s0);
    FieldSample bad = s0;
    bad.dW3[0] += 1.0;
    GridField Ag = GridField::from_function(
        grid, [T](double s, double t) { return (T - s) * (T - t) / (T * T); });
    const double clean = verify_ibp(Ag, s0);
    const double corrupted = verify_ibp(Ag, bad);
    const bool pass = m8 / m16 >= 1.3 && m16 / m32 >= 1.3 && flat <= 1e-10 &&
                      corrupted >= clean + 0.5;
    out.push_back({"ibp_refinement", pass,
                   json{{"median_n8", m8},
                        {"median_n16", m16},
                        {"median_n32", m32},
                        {"flat_residual", flat},
                        {"corrupted_residual", corrupted}}});
  }

  // --- one-parameter marginal against the reflection formula ---------------
  {
    const GridSpec g1 = make_grid(1.0, 1024);
    std::vector<double> zero(g1.n + 1, 0.0), one(g1.n + 1, 1.0);
    CrossingEstimate e = estimate_axis(zero, one, g1, cfg.n_samples, cfg.seed + 11, mc);
    const double exact = oracle_1d(0.0, 1.0, 1.0);
    const bool pass = std::abs(e.p_hat - exact) <= 0.02 && e.p_hat + 3 * e.std_err >= exact;
    out.push_back({"axis_marginal_1d", pass,
                   json{{"p_hat", e.p_hat}, {"exact", exact}, {"std_err", e.std_err}}});
  }

  // --- importance sampling agrees with the plain estimator -----------------
  {
    GridField F = builtin_trend("tsquared", grid);
    GridField U = builtin_boundary("constant", grid, 1.0);
    AdditiveRkhsFn f = differentiate(decompose_trend(F));
    auto proj = project_v2plus(f, cfg.projection);
    CrossingEstimate ep = estimate_plain(F, U, cfg.n_samples, cfg.seed + 21, mc);
    CrossingEstimate ei =
        estimate_importance(F, U, proj.projection, cfg.n_samples, cfg.seed + 22, mc);
    const double gap = std::abs(ep.p_hat - ei.p_hat);
    const double lim = 3.0 * std::sqrt(ep.std_err * ep.std_err + ei.std_err * ei.std_err);
    out.push_back({"importance_consistency", gap <= lim,
                   json{{"plain", ep.p_hat}, {"importance", ei.p_hat}, {"gap", gap},
                        {"limit", lim}}});
  }

  // --- sandwich bracket and exponential-bound dominance on the corpus ------
  {
    GridField U = builtin_boundary("constant", grid, 1.0);
    CrossingEstimate p0 = estimate_plain(GridField(grid), U, cfg.n_samples, cfg.seed + 31, mc);
    const double eps = 0.5 / static_cast<double>(p0.n_samples);
    const double alpha_lo =
        normal_quantile(std::clamp(p0.p_hat - 3 * p0.std_err, eps, 1.0 - eps));
    const double alpha_hi =
        normal_quantile(std::clamp(p0.p_hat + 3 * p0.std_err, eps, 1.0 - eps));

    bool sandwich_pass = true, dominance_pass = true;
    int inapplicable = 0;
    json rows = json::array();
    std::uint64_t k = 0;
    for (const auto& [name, F] : standard_corpus(grid)) {
      ++k;
      AdditiveRkhsFn f = differentiate(decompose_trend(F));
      auto proj = project_v2plus(f, cfg.projection);
      GridField Fb = evaluate_field(proj.projection);
      CrossingEstimate pf = estimate_plain(F, U, cfg.n_samples, cfg.seed + 100 + 2 * k, mc);
      CrossingEstimate pb = estimate_plain(Fb, U, cfg.n_samples, cfg.seed + 101 + 2 * k, mc);
      const double nf = std::sqrt(f.norm_sq()), nb = std::sqrt(proj.projection.norm_sq());
      const bool mid = pb.p_hat <= pf.p_hat + 3 * std::sqrt(pf.std_err * pf.std_err +
                                                            pb.std_err * pb.std_err);
      const bool lower = normal_cdf(alpha_lo - nb) <= pb.p_hat + 3 * pb.std_err;
      const bool upper = pf.p_hat <= normal_cdf(alpha_hi + nf) + 3 * pf.std_err;
      sandwich_pass = sandwich_pass && mid && lower && upper;

      BoundConfig bc;
      bc.residual_mode = ResidualMode::MonteCarlo;
      bc.n_samples = cfg.n_samples;
      bc.seed = cfg.seed + 500 + k;
      bc.threads = cfg.threads;
      bc.projection = cfg.projection;
      BoundReport rep = theorem1_upper_bound(f, U, bc);
      bool dom = true;
      if (rep.applicable) dom = *rep.theorem1_bound >= pf.p_hat - 3 * pf.std_err;
      else ++inapplicable;
      dominance_pass = dominance_pass && dom;
      rows.push_back(json{{"trend", name},
                          {"p_f", pf.p_hat},
                          {"p_fbar", pb.p_hat},
                          {"applicable", rep.applicable},
                          {"bound", rep.applicable ? json(*rep.theorem1_bound) : json()},
                          {"sandwich", json{{"mid", mid}, {"lower", lower}, {"upper", upper}}}});
    }
    out.push_back({"sandwich_bracket", sandwich_pass, rows});
    out.push_back({"theorem1_dominance", dominance_pass && inapplicable >= 1,
                   json{{"inapplicable_count", inapplicable}}});
  }

  return out;
}

}  // namespace awf
