// Acceptance suite: end-to-end statistical and algebraic checks at the
// documented tolerances, one PASS/FAIL line per criterion. Exit code is the
// number of failed criteria.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <string>
#include <thread>
#include <vector>

#include "awf/bounds.hpp"
#include "awf/builtins.hpp"
#include "awf/cli.hpp"
#include "awf/cone.hpp"
#include "awf/field_sim.hpp"
#include "../oracles.hpp"

using namespace awf;

namespace {

int g_failures = 0;

void report(const std::string& id, bool pass, const std::string& detail) {
  std::printf("[%s] %s: %s\n", pass ? "PASS" : "FAIL", id.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

int hw_threads() {
  const unsigned h = std::thread::hardware_concurrency();
  return h == 0 ? 2 : static_cast<int>(h);
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

AdditiveRkhsFn trend_fn(const GridField& F) { return differentiate(decompose_trend(F)); }

// ---------------------------------------------------------------------------
// C1: empirical covariance vs the covariance function, 16x16, 1e5 samples,
//     10 random node pairs plus the variance at (T,T), within 4 standard errors
void criterion1() {
  const GridSpec g = make_grid(1.0, 16);
  const long N = 100000;
  Xoshiro256pp pick(2026, 0);
  auto draw = [&]() { return 1 + static_cast<int>(pick.next_unit() * g.n); };
  std::vector<std::array<int, 4>> pairs{{g.n, g.n, g.n, g.n}};
  while (pairs.size() < 11) pairs.push_back({draw(), draw(), draw(), draw()});

  std::vector<double> sum(pairs.size(), 0.0), sum2(pairs.size(), 0.0);
  for (long k = 0; k < N; ++k) {
    FieldSample s = sample_field(g, 101, static_cast<std::uint64_t>(k));
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const auto& q = pairs[p];
      const double prod = s.w_at(q[0], q[1]) * s.w_at(q[2], q[3]);
      sum[p] += prod;
      sum2[p] += prod * prod;
    }
  }
  bool pass = true;
  double worst = 0.0;
  for (std::size_t p = 0; p < pairs.size(); ++p) {
    const auto& q = pairs[p];
    const double s1 = g.node(std::min(q[0], q[2])), s2 = g.node(std::min(q[1], q[3]));
    const double theory = s1 + s2 + s1 * s2;
    const double emp = sum[p] / N;
    const double se = std::sqrt(std::max(sum2[p] / N - emp * emp, 0.0) / N);
    const double z = std::abs(emp - theory) / se;
    worst = std::max(worst, z);
    pass = pass && z <= 4.0;
  }
  report("C1 covariance", pass,
         fmt("10 pairs + Var W(1,1); worst |z| = %.2f (limit 4)", worst));
}

// ---------------------------------------------------------------------------
// C2: projections match exhaustive active-set enumeration (200 instances each,
//     n <= 8 for the 1D cone, n = 3 for the 2D cone) within 1e-6, and the
//     Moreau identities hold at their stated tolerances
void criterion2() {
  bool pass = true;
  double worst_gap = 0.0, worst_ortho = 0.0, worst_node = 0.0;

  NormalStream rng(424242, 0);
  for (int inst = 0; inst < 200; ++inst) {
    const int n = 2 + inst % 7;  // n in 2..8
    GridSpec g = make_grid(1.0, n);
    H1Fn h(g);
    for (auto& v : h.d) v = 1.5 * rng.next();
    auto r = project_v1(h);
    auto oracle = oracles::enumerate_projection(oracles::v1_constraints(n), h.d);
    for (int k = 0; k < n; ++k)
      worst_gap = std::max(worst_gap, std::abs(r.projection.d[k] - oracle[k]));
    worst_ortho = std::max(worst_ortho, std::abs(r.orthogonality_defect) / h.norm_sq());
    double node = 0.0, acc = 0.0;
    for (int k = 0; k < n; ++k) {
      acc += r.polar_part.d[k];
      node = std::max(node, g.delta * acc);
    }
    worst_node = std::max(worst_node, node);
  }
  for (int inst = 0; inst < 200; ++inst) {
    GridSpec g = make_grid(1.0, 3);
    H2Fn h(g);
    for (auto& v : h.c) v = 1.5 * rng.next();
    auto r = project_v2(h);
    auto oracle = oracles::enumerate_projection(oracles::v2_constraints(3), h.c);
    for (std::size_t k = 0; k < h.c.size(); ++k)
      worst_gap = std::max(worst_gap, std::abs(r.projection.c[k] - oracle[k]));
    worst_ortho = std::max(worst_ortho, std::abs(r.orthogonality_defect) / h.norm_sq());
    GridField rec = reconstruct(r.polar_part);
    for (double v : rec.values) worst_node = std::max(worst_node, v);
  }
  pass = worst_gap <= 1e-6 && worst_ortho <= 1e-8 && worst_node <= 1e-8;
  report("C2 projection oracle", pass,
         fmt("400 instances; worst oracle gap %.2e (1e-6), <p,q>/|x|^2 %.2e (1e-8), "
             "polar node %.2e (1e-8)",
             worst_gap, worst_ortho, worst_node));
}

// ---------------------------------------------------------------------------
// C3: minimal-norm property of the projection over random feasible dominating
//     cone members, 5 trends x 100 candidates
void criterion3() {
  const GridSpec g = make_grid(1.0, 16);
  bool pass = true;
  double worst = 1e300;
  NormalStream rng(777, 0);
  for (const auto& [name, F] : standard_corpus(g)) {
    AdditiveRkhsFn f = trend_fn(F);
    auto proj = project_v2plus(f);
    const double pnorm = std::sqrt(proj.projection.norm_sq());
    for (int trial = 0; trial < 100; ++trial) {
      AdditiveRkhsFn v = random_v2plus_member(g, rng);
      const double lam = 0.5 * std::abs(rng.next());
      AdditiveRkhsFn cand(g);
      for (int k = 0; k < g.n; ++k) {
        cand.h1.d[k] = proj.projection.h1.d[k] + lam * v.h1.d[k];
        cand.h2.d[k] = proj.projection.h2.d[k] + lam * v.h2.d[k];
      }
      for (std::size_t k = 0; k < cand.h3.c.size(); ++k)
        cand.h3.c[k] = proj.projection.h3.c[k] + lam * v.h3.c[k];
      const double margin = std::sqrt(cand.norm_sq()) - pnorm;
      worst = std::min(worst, margin);
      pass = pass && margin >= -1e-10;
    }
  }
  report("C3 minimization", pass,
         fmt("500 feasible candidates; worst |g|-|fbar| margin %.2e (>= -1e-10)", worst));
}

// ---------------------------------------------------------------------------
// C4: Lipschitz bound |P_f - P_0| <= |f|/sqrt(2 pi) + 3 SE, 20 random small
//     trends, 16x16 grid, 1e5 samples each
void criterion4() {
  const GridSpec g = make_grid(1.0, 16);
  const long N = 100000;
  EstimatorOptions opts;
  opts.threads = hw_threads();
  GridField U = GridField::constant(g, 1.0);
  CrossingEstimate p0 = estimate_plain(GridField(g), U, N, 4040, opts);

  bool pass = true;
  double worst = -1e300;
  NormalStream rng(555111, 0);
  for (int t = 0; t < 20; ++t) {
    AdditiveRkhsFn f(g);
    const double scale = 0.1 + 0.02 * t;
    for (auto& v : f.h1.d) v = scale * rng.next();
    for (auto& v : f.h2.d) v = scale * rng.next();
    for (auto& v : f.h3.c) v = scale * rng.next();
    CrossingEstimate pf =
        estimate_plain(f, U, N, 5000 + static_cast<std::uint64_t>(t), opts);
    const double lhs = std::abs(pf.p_hat - p0.p_hat);
    const double rhs = li_kuelbs_delta(f) +
                       3.0 * std::sqrt(pf.std_err * pf.std_err + p0.std_err * p0.std_err);
    worst = std::max(worst, lhs - rhs);
    pass = pass && lhs <= rhs;
  }
  report("C4 Lipschitz radius", pass,
         fmt("20 small trends; worst |P_f-P_0| - bound = %.2e (<= 0)", worst));
}

// ---------------------------------------------------------------------------
// C5: Phi sandwich around the corpus estimates with the alpha uncertainty
//     propagated from the P_0 estimate
void criterion5() {
  const GridSpec g = make_grid(1.0, 16);
  const long N = 100000;
  EstimatorOptions opts;
  opts.threads = hw_threads();
  GridField U = GridField::constant(g, 1.0);
  CrossingEstimate p0 = estimate_plain(GridField(g), U, N, 6060, opts);
  const double eps = 0.5 / static_cast<double>(N);
  const double alpha_lo = normal_quantile(std::clamp(p0.p_hat - 3 * p0.std_err, eps, 1 - eps));
  const double alpha_hi = normal_quantile(std::clamp(p0.p_hat + 3 * p0.std_err, eps, 1 - eps));

  bool pass = true;
  std::string detail;
  std::uint64_t k = 0;
  for (const auto& [name, F] : standard_corpus(g)) {
    ++k;
    AdditiveRkhsFn f = trend_fn(F);
    auto proj = project_v2plus(f);
    GridField Fb = evaluate_field(proj.projection);
    CrossingEstimate pf = estimate_plain(F, U, N, 7000 + 2 * k, opts);
    CrossingEstimate pb = estimate_plain(Fb, U, N, 7001 + 2 * k, opts);
    const double nf = std::sqrt(f.norm_sq()), nb = std::sqrt(proj.projection.norm_sq());
    const bool lower = normal_cdf(alpha_lo - nb) <= pb.p_hat + 3 * pb.std_err;
    const bool mid = pb.p_hat <= pf.p_hat + 3 * std::sqrt(pf.std_err * pf.std_err +
                                                          pb.std_err * pb.std_err);
    const bool upper = pf.p_hat <= normal_cdf(alpha_hi + nf) + 3 * pf.std_err;
    if (!(lower && mid && upper)) {
      pass = false;
      detail += name + " violated; ";
    }
  }
  report("C5 sandwich", pass,
         detail.empty() ? "bracket holds on all 5 corpus trends" : detail);
}

// ---------------------------------------------------------------------------
// C6: exponential upper bound dominates the plain estimate on every applicable
//     corpus instance; inapplicable instances are flagged, never bounded
void criterion6() {
  const GridSpec g = make_grid(1.0, 16);
  const long N = 100000;
  EstimatorOptions opts;
  opts.threads = hw_threads();
  GridField U = GridField::constant(g, 1.0);

  bool pass = true;
  int applicable = 0, flagged = 0;
  std::string detail;
  std::uint64_t k = 0;
  for (const auto& [name, F] : standard_corpus(g)) {
    ++k;
    AdditiveRkhsFn f = trend_fn(F);
    BoundConfig bc;
    bc.residual_mode = ResidualMode::MonteCarlo;
    bc.n_samples = N;
    bc.seed = 8000 + 10 * k;
    bc.threads = opts.threads;
    BoundReport rep = theorem1_upper_bound(f, U, bc);
    CrossingEstimate pf = estimate_plain(F, U, N, 9000 + 10 * k, opts);
    if (rep.applicable) {
      ++applicable;
      if (!(*rep.theorem1_bound >= pf.p_hat - 3 * pf.std_err)) {
        pass = false;
        detail += name + " bound below estimate; ";
      }
    } else {
      ++flagged;
      if (rep.theorem1_bound.has_value()) {
        pass = false;
        detail += name + " flagged but carries a bound; ";
      }
    }
  }
  pass = pass && applicable >= 1 && flagged >= 1;
  report("C6 exponential bound dominance", pass,
         detail.empty()
             ? fmt("%d applicable instances dominate; %d flagged NOT-APPLICABLE",
                   applicable, flagged)
             : detail);
}

// ---------------------------------------------------------------------------
// C7: large-deviation asymptotics with importance sampling, gamma in {1,2,3,4}
void criterion7() {
  const GridSpec g = make_grid(1.0, 16);
  GridField U = GridField::constant(g, 1.0);
  AdditiveRkhsFn f = trend_fn(builtin_trend("tsquared+product", g));
  LdOptions opts;
  opts.n_samples = 100000;
  opts.seed = 13131;
  opts.threads = hw_threads();
  LdReport rep = ld_slope(f, U, {1.0, 2.0, 3.0, 4.0}, opts);

  // (a) per-gamma agreement of ln P_{gamma f} and ln P_{gamma fbar} within CI
  bool pass_a = true;
  double worst_gap = 0.0, worst_ci = 0.0;
  for (const auto& row : rep.rows) {
    const double se_f = row.std_err / row.p_hat;
    const double se_b = row.std_err_fbar / row.p_hat_fbar;
    const double gap = std::abs(row.ln_p - row.ln_p_fbar);
    const double ci = 3.0 * std::sqrt(se_f * se_f + se_b * se_b);
    if (gap > ci) pass_a = false;
    worst_gap = std::max(worst_gap, gap);
    worst_ci = std::max(worst_ci, ci);
  }
  report("C7a ln-asymptotics agreement", pass_a,
         fmt("worst |ln Pf - ln Pfbar| = %.3f vs CI %.3f "
             "(the gap is a genuine O(gamma) quantity; see ledger)",
             worst_gap, worst_ci));

  // (b) fitted slope within 30%% of -|fbar|^2, per-gamma ratio improving
  const double ratio = rep.ratio;
  bool mono = true;
  double prev = 1e300;
  std::string seq;
  for (const auto& row : rep.rows) {
    const double r = row.ln_p / (-0.5 * row.gamma * row.gamma * (-rep.target));
    const double dist = std::abs(r - 1.0);
    seq += fmt("%.3f ", dist);
    if (dist > prev + 1e-12) mono = false;
    prev = dist;
  }
  const bool pass_b = ratio >= 0.7 && ratio <= 1.3 && mono;
  report("C7b slope and trend", pass_b,
         fmt("slope/target = %.3f (within [0.7,1.3]); |ratio-1| sequence: %s(monotone=%s)",
             ratio, seq.c_str(), mono ? "yes" : "no"));
  if (!pass_a || !pass_b) {
    // counted through the two sub-reports above
  }
}

// ---------------------------------------------------------------------------
// C8: integration-by-parts residual decays by >= 1.5x per grid doubling,
//     median over 100 common-noise samples, n in {8,16,32,64}
void criterion8() {
  const double T = 1.0;
  auto Afun = [T](double s, double t) { return (T - s) * (T - t) / (T * T); };
  GridField A8 = GridField::from_function(make_grid(T, 8), Afun);
  GridField A16 = GridField::from_function(make_grid(T, 16), Afun);
  GridField A32 = GridField::from_function(make_grid(T, 32), Afun);
  GridField A64 = GridField::from_function(make_grid(T, 64), Afun);
  std::vector<double> r8, r16, r32, r64;
  for (std::uint64_t k = 0; k < 100; ++k) {
    FieldSample fine = sample_field(make_grid(T, 64), 321, k);
    r64.push_back(verify_ibp(A64, fine));
    r32.push_back(verify_ibp(A32, coarsen(fine, 2)));
    r16.push_back(verify_ibp(A16, coarsen(fine, 4)));
    r8.push_back(verify_ibp(A8, coarsen(fine, 8)));
  }
  auto med = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return 0.5 * (v[49] + v[50]);
  };
  const double m8 = med(r8), m16 = med(r16), m32 = med(r32), m64 = med(r64);
  const bool pass = m8 / m16 >= 1.5 && m16 / m32 >= 1.5 && m32 / m64 >= 1.5;
  report("C8 integration-by-parts refinement", pass,
         fmt("medians %.4f / %.4f / %.4f / %.4f; ratios %.2f, %.2f, %.2f (>= 1.5)", m8, m16,
             m32, m64, m8 / m16, m16 / m32, m32 / m64));
}

// ---------------------------------------------------------------------------
// C9: axis-mode Monte Carlo at n = 4096, 1e6 paths reproduces the reflection
//     value from above within 0.01, and the gap shrinks with n
void criterion9() {
  const double exact = oracle_1d(0.0, 1.0, 1.0);
  EstimatorOptions opts;
  opts.threads = hw_threads();

  auto run = [&](int n) {
    GridSpec g = make_grid(1.0, n);
    std::vector<double> zero(g.n + 1, 0.0), one(g.n + 1, 1.0);
    return estimate_axis(zero, one, g, 1000000, 31415, opts);
  };
  CrossingEstimate coarse = run(1024);
  CrossingEstimate fine = run(4096);
  const double gap_fine = fine.p_hat - exact;
  const double gap_coarse = coarse.p_hat - exact;
  const bool pass = gap_fine >= -3.0 * fine.std_err && gap_fine <= 0.01 &&
                    gap_fine < gap_coarse;
  report("C9 one-parameter marginal", pass,
         fmt("exact %.6f; gap at n=4096: %+.5f (<= 0.01, from above), at n=1024: %+.5f",
             exact, gap_fine, gap_coarse));
}

// ---------------------------------------------------------------------------
// C10: the verify command is byte-deterministic for a fixed config and seed
void criterion10() {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "awf_acceptance";
  fs::create_directories(dir);
  const std::string cfg_path = (dir / "verify_cfg.json").string();
  io::atomic_write_file(cfg_path, R"({
    "grid": {"T": 1.0, "n": 8},
    "estimator": {"n_samples": 20000, "seed": 1}
  })");
  const std::string o1 = (dir / "v1.json").string(), o2 = (dir / "v2.json").string();
  const int c1 = cli::run({"verify", "--config", cfg_path, "--out", o1});
  const int c2 =
      cli::run({"verify", "--config", cfg_path, "--out", o2, "--threads", "2"});
  const bool identical = io::read_file(o1) == io::read_file(o2);
  const bool pass = c1 == 0 && c2 == 0 && identical;
  report("C10 determinism", pass,
         fmt("verify run twice (1 and 2 threads): exit %d/%d, byte-identical=%s", c1, c2,
             identical ? "yes" : "no"));
  std::error_code ec;
  fs::remove_all(dir, ec);
}

}  // namespace

int main() {
  criterion1();
  criterion2();
  criterion3();
  criterion4();
  criterion5();
  criterion6();
  criterion7();
  criterion8();
  criterion9();
  criterion10();
  if (g_failures == 0) std::printf("acceptance: all criteria passed\n");
  else std::printf("acceptance: %d criterion check(s) failed\n", g_failures);
  return g_failures;
}
