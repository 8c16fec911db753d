#include <catch_amalgamated.hpp>

#include <cmath>

#include "awf/cone.hpp"
#include "oracles.hpp"

using namespace awf;

namespace {

H1Fn random_h1(GridSpec g, std::uint64_t seed, double scale = 1.0) {
  H1Fn h(g);
  NormalStream rng(seed, 0);
  for (auto& v : h.d) v = scale * rng.next();
  return h;
}

H2Fn random_h2(GridSpec g, std::uint64_t seed, double scale = 1.0) {
  H2Fn h(g);
  NormalStream rng(seed, 1);
  for (auto& v : h.c) v = scale * rng.next();
  return h;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

}  // namespace

TEST_CASE("project_v1 fixed points and two-point averaging") {
  GridSpec g = make_grid(1.0, 4);

  H1Fn fixed(g, {1, 0, 0, 0});
  auto r = project_v1(fixed);
  CHECK(max_abs_diff(r.projection.d, fixed.d) == 0.0);
  for (double v : r.polar_part.d) CHECK(v == 0.0);

  GridSpec g2 = make_grid(1.0, 2);
  H1Fn pair(g2, {0, 1});
  auto r2 = project_v1(pair);
  CHECK(r2.projection.d[0] == 0.5);
  CHECK(r2.projection.d[1] == 0.5);

  H1Fn bad(g2, {1.0, std::nan("")});
  CHECK_THROWS_AS(project_v1(bad), std::invalid_argument);
}

TEST_CASE("project_v1 of the capped quadratic ramp is the unit block") {
  // derivative of min(t,1)^2 on a [0,2] horizon: ramp to 2 on [0,1], zero after
  GridSpec g = make_grid(2.0, 8);
  H1Fn h(g);
  for (int k = 0; k < 4; ++k) h.d[k] = (g.node(k + 1) + g.node(k));  // exact differences of t^2
  auto r = project_v1(h);
  for (int k = 0; k < 4; ++k) CHECK(r.projection.d[k] == Catch::Approx(1.0).margin(1e-12));
  for (int k = 4; k < 8; ++k) CHECK(r.projection.d[k] == 0.0);
  CHECK(r.projection.norm_sq() == Catch::Approx(1.0).margin(1e-12));

  // enumeration oracle confirms the block solution at this size
  auto oracle = oracles::enumerate_projection(oracles::v1_constraints(8), h.d);
  CHECK(max_abs_diff(r.projection.d, oracle) < 1e-9);

  // continuum limit: the reconstruction approaches min(t,1)
  GridSpec gf = make_grid(2.0, 100);
  H1Fn hf(gf);
  for (int k = 0; k < gf.n; ++k) {
    const double t1 = gf.node(k + 1);
    hf.d[k] = t1 <= 1.0 ? (gf.node(k + 1) + gf.node(k)) : 0.0;
  }
  auto rf = project_v1(hf);
  std::vector<double> vals = reconstruct(rf.projection);
  for (int k = 0; k <= gf.n; ++k)
    CHECK(std::abs(vals[k] - std::min(gf.node(k), 1.0)) < 2e-2);
}

TEST_CASE("project_v1 matches exhaustive active-set enumeration") {
  for (int n = 2; n <= 8; ++n) {
    GridSpec g = make_grid(1.0, n);
    for (std::uint64_t seed = 0; seed < 8; ++seed) {
      H1Fn h = random_h1(g, 900 + 10 * n + seed, 2.0);
      auto r = project_v1(h);
      auto oracle = oracles::enumerate_projection(oracles::v1_constraints(n), h.d);
      CHECK(max_abs_diff(r.projection.d, oracle) < 1e-6);
    }
  }
}

TEST_CASE("project_v2 fixed points") {
  GridSpec g = make_grid(1.0, 3);

  H2Fn flat(g);
  for (auto& v : flat.c) v = 0.7;
  auto r = project_v2(flat);
  CHECK(max_abs_diff(r.projection.c, flat.c) < 1e-12);
  CHECK(r.residual <= 1e-12);

  // outer product of a non-increasing non-negative sequence with itself
  H2Fn outer(g);
  const double d[3] = {2.0, 1.0, 0.5};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) outer.cell(i, j) = d[i] * d[j];
  CHECK(check_cone_membership(outer, ConeId::V2) == 0.0);
  auto r2 = project_v2(outer);
  CHECK(max_abs_diff(r2.projection.c, outer.c) < 1e-12);
}

TEST_CASE("project_v2 matches exhaustive active-set enumeration at n=3") {
  GridSpec g = make_grid(1.0, 3);
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    H2Fn h = random_h2(g, 4000 + seed, 1.5);
    auto r = project_v2(h);
    auto oracle = oracles::enumerate_projection(oracles::v2_constraints(3), h.c);
    CHECK(max_abs_diff(r.projection.c, oracle) < 1e-6);
  }
}

TEST_CASE("project_v2 degenerate one-cell grid keeps only the sign constraint") {
  GridSpec g = make_grid(1.0, 1);
  H2Fn pos(g, {3.0});
  CHECK(max_abs_diff(project_v2(pos).projection.c, {3.0}) == 0.0);
  H2Fn neg(g, {-2.0});
  auto r = project_v2(neg);
  CHECK(r.projection.c[0] == 0.0);
  CHECK(r.polar_part.c[0] == -2.0);
}

TEST_CASE("project_v2 reports non-convergence with the residual attached") {
  GridSpec g = make_grid(1.0, 6);
  H2Fn h = random_h2(g, 77, 3.0);
  ProjectionOptions opts;
  opts.max_cycles = 1;
  opts.cycle_tol = 1e-16;
  CHECK_THROWS_AS(project_v2(h, opts), ConvergenceError);
}

TEST_CASE("project_v2plus applies the component projections") {
  GridSpec g = make_grid(2.0, 8);

  AdditiveRkhsFn inside(g);
  for (int k = 0; k < g.n; ++k) inside.h1.d[k] = 1.0 - 0.1 * k;
  for (int k = 0; k < g.n; ++k) inside.h2.d[k] = 0.5;
  for (int i = 0; i < g.n; ++i)
    for (int j = 0; j < g.n; ++j) inside.h3.cell(i, j) = (1.0 - 0.1 * i) * (1.0 - 0.1 * j);
  REQUIRE(check_cone_membership(inside, ConeId::V2Plus) == 0.0);
  auto rfix = project_v2plus(inside);
  CHECK(std::sqrt(rfix.polar_part.norm_sq()) < 1e-12);

  // capped quadratic on the first axis only
  AdditiveRkhsFn tsq(g);
  for (int k = 0; k < 4; ++k) tsq.h1.d[k] = g.node(k + 1) + g.node(k);
  auto r = project_v2plus(tsq);
  CHECK(r.projection.norm_sq() == Catch::Approx(1.0).margin(1e-12));
  for (int k = 0; k < 4; ++k) CHECK(r.projection.h1.d[k] == Catch::Approx(1.0).margin(1e-12));
  CHECK(std::sqrt(r.projection.h2.norm_sq()) == 0.0);
  CHECK(std::sqrt(r.projection.h3.norm_sq()) == 0.0);

  // minimality against random feasible cone members dominating the input
  NormalStream rng(555, 0);
  const double pnorm = std::sqrt(r.projection.norm_sq());
  for (int trial = 0; trial < 100; ++trial) {
    AdditiveRkhsFn v = random_v2plus_member(g, rng);
    const double lambda = 0.25 * std::abs(rng.next());
    AdditiveRkhsFn cand(g);
    for (int k = 0; k < g.n; ++k) cand.h1.d[k] = r.projection.h1.d[k] + lambda * v.h1.d[k];
    for (int k = 0; k < g.n; ++k) cand.h2.d[k] = r.projection.h2.d[k] + lambda * v.h2.d[k];
    for (std::size_t k = 0; k < cand.h3.c.size(); ++k)
      cand.h3.c[k] = r.projection.h3.c[k] + lambda * v.h3.c[k];
    CHECK(check_cone_membership(cand, ConeId::V2Plus) <= 1e-10);
    CHECK(std::sqrt(cand.norm_sq()) >= pnorm - 1e-10);
  }
}

TEST_CASE("membership margins") {
  GridSpec g = make_grid(1.0, 2);
  CHECK(check_cone_membership(H1Fn(g, {1.0, 0.5}), ConeId::V1) == 0.0);
  CHECK(check_cone_membership(H1Fn(g, {0.0, 1.0}), ConeId::V1) == 1.0);

  GridSpec g3 = make_grid(1.0, 3);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    auto r = project_v2(random_h2(g3, 600 + seed));
    CHECK(check_cone_membership(r.projection, ConeId::V2) <= std::max(r.residual, 1e-12));
  }

  CHECK_THROWS_AS(check_cone_membership(H1Fn(g), ConeId::V2), std::invalid_argument);
}

TEST_CASE("Moreau split, orthogonality and majorant property") {
  GridSpec g = make_grid(1.0, 10);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    H1Fn h = random_h1(g, 1700 + seed, 1.5);
    auto r = project_v1(h);
    const double scale2 = 1.0 + h.norm_sq();
    for (int k = 0; k < g.n; ++k)
      CHECK(r.projection.d[k] + r.polar_part.d[k] == Catch::Approx(h.d[k]).margin(1e-13));
    CHECK(std::abs(r.orthogonality_defect) <= 1e-8 * scale2);
    CHECK(check_cone_membership(r.polar_part, ConeId::V1Polar) <= 1e-10 * scale2);
    // majorant: reconstructed projection dominates the input at nodes
    std::vector<double> ph = reconstruct(r.projection), xh = reconstruct(h);
    for (int k = 0; k <= g.n; ++k) CHECK(ph[k] >= xh[k] - 1e-10 * scale2);
    // idempotence
    auto rr = project_v1(r.projection);
    CHECK(std::sqrt(rr.polar_part.norm_sq()) <= 1e-10 * scale2);
    // positive homogeneity
    auto rs = project_v1(H1Fn(g, [&] {
      std::vector<double> d = h.d;
      for (auto& v : d) v *= 3.0;
      return d;
    }()));
    for (int k = 0; k < g.n; ++k)
      CHECK(rs.projection.d[k] == Catch::Approx(3.0 * r.projection.d[k]).margin(1e-10));
  }

  GridSpec g4 = make_grid(1.0, 4);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    H2Fn h = random_h2(g4, 1800 + seed, 1.5);
    auto r = project_v2(h);
    const double scale2 = 1.0 + h.norm_sq();
    CHECK(std::abs(r.orthogonality_defect) <= 1e-8 * scale2);
    CHECK(check_cone_membership(r.polar_part, ConeId::V2Polar) <= 1e-7 * scale2);
    GridField ph = reconstruct(r.projection), xh = reconstruct(h);
    for (std::size_t k = 0; k < ph.values.size(); ++k)
      CHECK(ph.values[k] >= xh.values[k] - 1e-7 * scale2);
  }
}

TEST_CASE("a valid split certifies itself as the projection") {
  // build x = p0 + q0 with p0 in the cone, q0 polar, <p0,q0> = 0: block
  // structure with zero block sums and non-positive prefixes inside blocks
  GridSpec g = make_grid(1.0, 6);
  H1Fn p0(g, {3, 3, 1, 1, 1, 0});
  H1Fn q0(g, {-0.5, 0.5, -1, 0.5, 0.5, 0});
  REQUIRE(check_cone_membership(p0, ConeId::V1) == 0.0);
  REQUIRE(check_cone_membership(q0, ConeId::V1Polar) == 0.0);
  REQUIRE(h1_inner(p0, q0) == 0.0);
  H1Fn x(g);
  for (int k = 0; k < g.n; ++k) x.d[k] = p0.d[k] + q0.d[k];
  auto r = project_v1(x);
  CHECK(max_abs_diff(r.projection.d, p0.d) < 1e-12);
  CHECK(max_abs_diff(r.polar_part.d, q0.d) < 1e-12);
}

TEST_CASE("polar_verify accepts clean splits and flags corrupted ones") {
  GridSpec g = make_grid(2.0, 8);
  H1Fn h(g);
  for (int k = 0; k < 4; ++k) h.d[k] = g.node(k + 1) + g.node(k);
  auto r = project_v1(h);

  auto rep = polar_verify(r, 200, 42);
  CHECK(rep.ok);
  CHECK(rep.max_inner <= 1e-8);

  ProjectionResult<H1Fn> zero_split{H1Fn(g), H1Fn(g), 0, 0.0, 0.0};
  CHECK(polar_verify(zero_split, 50, 1).ok);

  auto corrupted = r;
  corrupted.polar_part.d[0] += 0.2;  // pushes a node value positive
  CHECK_FALSE(polar_verify(corrupted, 200, 42).ok);

  GridSpec g3 = make_grid(1.0, 3);
  auto r2 = project_v2(random_h2(g3, 999));
  CHECK(polar_verify(r2, 200, 7, 1e-7 * (1.0 + random_h2(g3, 999).norm_sq())).ok);
}
