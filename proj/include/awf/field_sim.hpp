#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

#include "awf/grid.hpp"
#include "awf/normal.hpp"
#include "awf/rkhs.hpp"
#include "awf/rng.hpp"

namespace awf {

// Diagnostic component switches: estimates can suppress field components to
// isolate the one-parameter marginals.
inline constexpr unsigned kCompW1 = 1u;
inline constexpr unsigned kCompW2 = 2u;
inline constexpr unsigned kCompW3 = 4u;
inline constexpr unsigned kCompAll = kCompW1 | kCompW2 | kCompW3;

/// One realization of the additive field on the grid. Increments dW1, dW2 have
/// variance delta, dW3 has variance delta^2; node values are cumulative sums
/// and W = W1 + W2 + W3 nodewise.
struct FieldSample {
  GridSpec grid;
  std::vector<double> dW1, dW2;  // n
  std::vector<double> dW3;       // n*n row-major
  std::vector<double> W1, W2;    // n+1
  std::vector<double> W3, W;     // (n+1)^2 row-major

  double w_at(int i, int j) const { return W[static_cast<std::size_t>(i) * (grid.n + 1) + j]; }
};

/// Draw order is pinned: dW1[0..n), dW2[0..n), dW3 row-major. Components not
/// selected are left identically zero and consume no randomness.
inline FieldSample sample_field(GridSpec grid, NormalStream& rng, unsigned components = kCompAll) {
  const int n = grid.n;
  const double sd1 = std::sqrt(grid.delta);
  FieldSample s;
  s.grid = grid;
  s.dW1.assign(n, 0.0);
  s.dW2.assign(n, 0.0);
  s.dW3.assign(static_cast<std::size_t>(n) * n, 0.0);
  if (components & kCompW1)
    for (int k = 0; k < n; ++k) s.dW1[k] = sd1 * rng.next();
  if (components & kCompW2)
    for (int k = 0; k < n; ++k) s.dW2[k] = sd1 * rng.next();
  if (components & kCompW3)
    for (auto& v : s.dW3) v = grid.delta * rng.next();

  s.W1.assign(n + 1, 0.0);
  s.W2.assign(n + 1, 0.0);
  for (int k = 0; k < n; ++k) s.W1[k + 1] = s.W1[k] + s.dW1[k];
  for (int k = 0; k < n; ++k) s.W2[k + 1] = s.W2[k] + s.dW2[k];
  s.W3.assign(static_cast<std::size_t>(n + 1) * (n + 1), 0.0);
  s.W.assign(static_cast<std::size_t>(n + 1) * (n + 1), 0.0);
  std::vector<double> colacc(n, 0.0);
  for (int i = 1; i <= n; ++i) {
    double row = 0.0;
    for (int j = 1; j <= n; ++j) {
      colacc[j - 1] += s.dW3[static_cast<std::size_t>(i - 1) * n + (j - 1)];
      row += colacc[j - 1];
      s.W3[static_cast<std::size_t>(i) * (n + 1) + j] = row;
    }
  }
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j <= n; ++j)
      s.W[static_cast<std::size_t>(i) * (n + 1) + j] =
          s.W1[i] + s.W2[j] + s.W3[static_cast<std::size_t>(i) * (n + 1) + j];
  return s;
}

inline FieldSample sample_field(GridSpec grid, std::uint64_t seed, std::uint64_t index = 0,
                                unsigned components = kCompAll) {
  NormalStream rng(seed, index);
  return sample_field(grid, rng, components);
}

/// Restriction to a coarser nested grid: node values are exact restrictions of
/// the fine sample, increments are block sums.
inline FieldSample coarsen(const FieldSample& s, int factor) {
  if (factor < 1 || s.grid.n % factor != 0)
    throw std::invalid_argument("coarsen: factor must divide n");
  const int nf = s.grid.n, nc = nf / factor;
  FieldSample c;
  c.grid = GridSpec{s.grid.T, nc, s.grid.T / nc};
  c.dW1.assign(nc, 0.0);
  c.dW2.assign(nc, 0.0);
  c.dW3.assign(static_cast<std::size_t>(nc) * nc, 0.0);
  for (int k = 0; k < nf; ++k) {
    c.dW1[k / factor] += s.dW1[k];
    c.dW2[k / factor] += s.dW2[k];
  }
  for (int i = 0; i < nf; ++i)
    for (int j = 0; j < nf; ++j)
      c.dW3[static_cast<std::size_t>(i / factor) * nc + (j / factor)] +=
          s.dW3[static_cast<std::size_t>(i) * nf + j];
  c.W1.assign(nc + 1, 0.0);
  c.W2.assign(nc + 1, 0.0);
  c.W3.assign(static_cast<std::size_t>(nc + 1) * (nc + 1), 0.0);
  c.W.assign(static_cast<std::size_t>(nc + 1) * (nc + 1), 0.0);
  for (int i = 0; i <= nc; ++i) {
    c.W1[i] = s.W1[static_cast<std::size_t>(i) * factor];
    c.W2[i] = s.W2[static_cast<std::size_t>(i) * factor];
    for (int j = 0; j <= nc; ++j) {
      c.W3[static_cast<std::size_t>(i) * (nc + 1) + j] =
          s.W3[static_cast<std::size_t>(i) * factor * (nf + 1) + static_cast<std::size_t>(j) * factor];
      c.W[static_cast<std::size_t>(i) * (nc + 1) + j] =
          s.W[static_cast<std::size_t>(i) * factor * (nf + 1) + static_cast<std::size_t>(j) * factor];
    }
  }
  return c;
}

/// Non-crossing indicator of one sample: trend + field below the boundary at
/// every node.
inline bool non_crossing(const GridField& F, const GridField& U, const FieldSample& s) {
  if (F.grid != s.grid || U.grid != s.grid)
    throw std::invalid_argument("non_crossing: grid mismatch");
  const int m = s.grid.n + 1;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (F.values[static_cast<std::size_t>(i) * m + j] + s.w_at(i, j) >
          U.values[static_cast<std::size_t>(i) * m + j])
        return false;
  return true;
}

enum class Method { Plain, Importance };

struct CrossingEstimate {
  double p_hat = 0.0;
  double std_err = 0.0;
  long n_samples = 0;
  Method method = Method::Plain;
  std::uint64_t seed = 0;
  GridSpec grid;
  long rejected = 0;  // importance samples dropped for non-finite weight
};

struct EstimatorOptions {
  int threads = 1;
  long block_size = 1024;      // fixed accumulation unit; independent of thread count
  unsigned components = kCompAll;
};

namespace detail {

struct EstimatorProblem {
  const GridSpec grid;
  const std::vector<double>& bound;   // U - F (plain) or U - F + G (importance), (n+1)^2
  const AdditiveRkhsFn* shift;        // importance only
  double half_shift_norm_sq;
};

/// One sample of the 2D field against precomputed nodewise bounds.
/// Returns the weighted indicator. Draw order matches sample_field exactly.
template <bool kImportance>
inline double one_sample(const EstimatorProblem& p, NormalStream& rng, unsigned components,
                         std::vector<double>& dW1, std::vector<double>& dW2,
                         std::vector<double>& dW3, std::vector<double>& W1,
                         std::vector<double>& W2, std::vector<double>& colacc, long& rejected) {
  const int n = p.grid.n;
  const int m = n + 1;
  const double sd1 = std::sqrt(p.grid.delta);
  if (components & kCompW1)
    for (int k = 0; k < n; ++k) dW1[k] = sd1 * rng.next();
  if (components & kCompW2)
    for (int k = 0; k < n; ++k) dW2[k] = sd1 * rng.next();
  if (components & kCompW3)
    for (std::size_t k = 0; k < dW3.size(); ++k) dW3[k] = p.grid.delta * rng.next();

  W1[0] = 0.0;
  W2[0] = 0.0;
  for (int k = 0; k < n; ++k) W1[k + 1] = W1[k] + dW1[k];
  for (int k = 0; k < n; ++k) W2[k + 1] = W2[k] + dW2[k];

  // node (0,0) then sweep rows with a running 2D prefix of dW3
  if (0.0 > p.bound[0]) return 0.0;
  for (int j = 1; j <= n; ++j)
    if (W2[j] > p.bound[static_cast<std::size_t>(j)]) return 0.0;
  std::fill(colacc.begin(), colacc.end(), 0.0);
  for (int i = 1; i <= n; ++i) {
    const std::size_t row = static_cast<std::size_t>(i) * m;
    if (W1[i] > p.bound[row]) return 0.0;
    double acc = 0.0;
    for (int j = 1; j <= n; ++j) {
      colacc[j - 1] += dW3[static_cast<std::size_t>(i - 1) * n + (j - 1)];
      acc += colacc[j - 1];
      if (W1[i] + W2[j] + acc > p.bound[row + j]) return 0.0;
    }
  }

  if constexpr (!kImportance) return 1.0;

  // survived: discrete Paley-Wiener pairing against the increments
  double pw = 0.0;
  const AdditiveRkhsFn& g = *p.shift;
  for (int k = 0; k < n; ++k) pw += g.h1.d[k] * dW1[k];
  for (int k = 0; k < n; ++k) pw += g.h2.d[k] * dW2[k];
  for (std::size_t k = 0; k < dW3.size(); ++k) pw += g.h3.c[k] * dW3[k];
  const double w = std::exp(pw - p.half_shift_norm_sq);
  if (!std::isfinite(w)) {
    ++rejected;
    return 0.0;
  }
  return w;
}

struct BlockResult {
  double sum = 0.0;
  double sum_sq = 0.0;
  long count = 0;
  long rejected = 0;
};

template <bool kImportance>
inline CrossingEstimate run_estimator(const EstimatorProblem& p, long n_samples,
                                      std::uint64_t seed, const EstimatorOptions& opts) {
  if (n_samples < 1) throw std::invalid_argument("estimator: n_samples must be >= 1");
  const long block = std::max<long>(1, opts.block_size);
  const long n_blocks = (n_samples + block - 1) / block;
  std::vector<BlockResult> results(static_cast<std::size_t>(n_blocks));

  std::atomic<long> next_block{0};
  auto worker = [&]() {
    const int n = p.grid.n;
    std::vector<double> dW1(n, 0.0), dW2(n, 0.0), dW3(static_cast<std::size_t>(n) * n, 0.0);
    std::vector<double> W1(n + 1), W2(n + 1), colacc(n);
    for (;;) {
      const long b = next_block.fetch_add(1);
      if (b >= n_blocks) break;
      const long lo = b * block;
      const long hi = std::min(n_samples, lo + block);
      NeumaierSum sy, sy2;
      long cnt = 0, rej = 0;
      for (long i = lo; i < hi; ++i) {
        NormalStream rng(seed, static_cast<std::uint64_t>(i));
        const double y =
            one_sample<kImportance>(p, rng, opts.components, dW1, dW2, dW3, W1, W2, colacc, rej);
        if constexpr (kImportance) {
          sy.add(y);
          sy2.add(y * y);
        } else {
          cnt += (y != 0.0);
        }
      }
      results[static_cast<std::size_t>(b)] =
          BlockResult{sy.value(), sy2.value(), cnt, rej};
    }
  };

  const int nthreads = std::max(1, opts.threads);
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  CrossingEstimate est;
  est.grid = p.grid;
  est.n_samples = n_samples;
  est.seed = seed;
  const double nn = static_cast<double>(n_samples);
  if constexpr (kImportance) {
    NeumaierSum sy, sy2;
    long rej = 0;
    for (const auto& r : results) {
      sy.add(r.sum);
      sy2.add(r.sum_sq);
      rej += r.rejected;
    }
    est.method = Method::Importance;
    est.rejected = rej;
    est.p_hat = sy.value() / nn;
    const double var = std::max(sy2.value() / nn - est.p_hat * est.p_hat, 0.0);
    est.std_err = std::sqrt(var / nn);
  } else {
    long cnt = 0;
    for (const auto& r : results) cnt += r.count;
    est.method = Method::Plain;
    est.p_hat = static_cast<double>(cnt) / nn;
    est.std_err = std::sqrt(est.p_hat * (1.0 - est.p_hat) / nn);
  }
  return est;
}

}  // namespace detail

/// Fraction of samples keeping trend + field below the boundary at all nodes.
inline CrossingEstimate estimate_plain(const GridField& F, const GridField& U, long n_samples,
                                       std::uint64_t seed, const EstimatorOptions& opts = {}) {
  if (F.grid != U.grid) throw std::invalid_argument("estimate_plain: grid mismatch");
  std::vector<double> bound(F.values.size());
  for (std::size_t k = 0; k < bound.size(); ++k) bound[k] = U.values[k] - F.values[k];
  detail::EstimatorProblem p{F.grid, bound, nullptr, 0.0};
  return detail::run_estimator<false>(p, n_samples, seed, opts);
}

inline CrossingEstimate estimate_plain(const AdditiveRkhsFn& f, const GridField& U, long n_samples,
                                       std::uint64_t seed, const EstimatorOptions& opts = {}) {
  return estimate_plain(evaluate_field(f), U, n_samples, seed, opts);
}

/// Unbiased importance-sampled estimator through the Cameron-Martin identity:
/// mean of exp(<g,W>_pw - |g|^2/2) * 1{F - G + W <= U} over plain samples,
/// where <g,W>_pw pairs the shift's derivative data with the raw increments.
inline CrossingEstimate estimate_importance(const GridField& F, const GridField& U,
                                            const AdditiveRkhsFn& shift, long n_samples,
                                            std::uint64_t seed, const EstimatorOptions& opts = {}) {
  if (F.grid != U.grid || shift.grid() != F.grid)
    throw std::invalid_argument("estimate_importance: grid mismatch");
  GridField G = evaluate_field(shift);
  std::vector<double> bound(F.values.size());
  for (std::size_t k = 0; k < bound.size(); ++k)
    bound[k] = U.values[k] - F.values[k] + G.values[k];
  detail::EstimatorProblem p{F.grid, bound, &shift, 0.5 * shift.norm_sq()};
  return detail::run_estimator<true>(p, n_samples, seed, opts);
}

inline CrossingEstimate estimate_importance(const AdditiveRkhsFn& f, const GridField& U,
                                            const AdditiveRkhsFn& shift, long n_samples,
                                            std::uint64_t seed, const EstimatorOptions& opts = {}) {
  return estimate_importance(evaluate_field(f), U, shift, n_samples, seed, opts);
}

/// One-parameter diagnostic estimator (W1 marginal only): non-crossing of
/// f(t) + W1(t) below u(t) along the axis. Used for validating the simulator
/// against the closed-form reflection bound without allocating 2D state.
inline CrossingEstimate estimate_axis(const std::vector<double>& f_trace,
                                      const std::vector<double>& u_trace, GridSpec grid,
                                      long n_samples, std::uint64_t seed,
                                      const EstimatorOptions& opts = {}) {
  const int n = grid.n;
  if (f_trace.size() != static_cast<std::size_t>(n + 1) || u_trace.size() != f_trace.size())
    throw std::invalid_argument("estimate_axis: traces must have n+1 nodes");
  if (n_samples < 1) throw std::invalid_argument("estimate_axis: n_samples must be >= 1");
  std::vector<double> bound(n + 1);
  for (int k = 0; k <= n; ++k) bound[k] = u_trace[k] - f_trace[k];
  const bool origin_ok = bound[0] >= 0.0;

  const long block = std::max<long>(1, opts.block_size);
  const long n_blocks = (n_samples + block - 1) / block;
  std::vector<long> counts(static_cast<std::size_t>(n_blocks), 0);
  std::atomic<long> next_block{0};
  const double sd1 = std::sqrt(grid.delta);

  auto worker = [&]() {
    for (;;) {
      const long b = next_block.fetch_add(1);
      if (b >= n_blocks) break;
      const long lo = b * block;
      const long hi = std::min(n_samples, lo + block);
      long cnt = 0;
      for (long i = lo; i < hi; ++i) {
        if (!origin_ok) continue;
        NormalStream rng(seed, static_cast<std::uint64_t>(i));
        double w = 0.0;
        bool ok = true;
        for (int k = 1; k <= n; ++k) {
          w += sd1 * rng.next();
          if (w > bound[k]) {
            ok = false;
            break;
          }
        }
        cnt += ok;
      }
      counts[static_cast<std::size_t>(b)] = cnt;
    }
  };
  const int nthreads = std::max(1, opts.threads);
  if (nthreads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < nthreads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  long cnt = 0;
  for (long c : counts) cnt += c;
  CrossingEstimate est;
  est.grid = grid;
  est.n_samples = n_samples;
  est.seed = seed;
  est.method = Method::Plain;
  est.p_hat = static_cast<double>(cnt) / static_cast<double>(n_samples);
  est.std_err = std::sqrt(est.p_hat * (1.0 - est.p_hat) / static_cast<double>(n_samples));
  return est;
}

/// Closed-form non-crossing probability of drifted Brownian motion below a
/// constant level: P(W(t) + c t <= u0 for all t <= T).
inline double oracle_1d(double drift, double u0, double T) {
  if (!(u0 > 0.0)) throw std::domain_error("oracle_1d: level u0 must be positive");
  if (!(T > 0.0)) throw std::invalid_argument("oracle_1d: horizon T must be positive");
  const double rt = std::sqrt(T);
  const double first = normal_cdf((u0 - drift * T) / rt);
  const double tail = normal_cdf((-u0 - drift * T) / rt);
  if (tail == 0.0) return first;
  return first - std::exp(2.0 * drift * u0) * tail;
}

/// Both sides of the discrete integration-by-parts identity for a monotone
/// integrand A (non-increasing in each variable, adjacent 2D increments >= 0)
/// against one field realization; returns |LHS - RHS|. All Stieltjes sums use
/// left-endpoint evaluation, so the residual vanishes only in the refinement
/// limit.
inline double verify_ibp(const GridField& A, const FieldSample& s) {
  if (A.grid != s.grid) throw std::invalid_argument("verify_ibp: grid mismatch");
  const int n = s.grid.n;
  const int m = n + 1;
  const double mono_tol = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= n; ++j)
      if (A.at(i + 1, j) - A.at(i, j) > mono_tol)
        throw std::domain_error("verify_ibp: A must be non-increasing in the first variable");
  for (int i = 0; i <= n; ++i)
    for (int j = 0; j < n; ++j)
      if (A.at(i, j + 1) - A.at(i, j) > mono_tol)
        throw std::domain_error("verify_ibp: A must be non-increasing in the second variable");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (A.at(i + 1, j + 1) - A.at(i, j + 1) - A.at(i + 1, j) + A.at(i, j) < -mono_tol)
        throw std::domain_error("verify_ibp: A must have non-negative 2D increments");

  // LHS: Ito-type sum, A at the lower-left corner against the 2D increments
  // of W (which are exactly the sheet increments dW3).
  double lhs = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      lhs += A.at(i, j) * s.dW3[static_cast<std::size_t>(i) * n + j];

  auto Wn = [&](int i, int j) { return s.W[static_cast<std::size_t>(i) * m + j]; };

  double s_WdA = 0.0;  // 2D Stieltjes of W against dA
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      s_WdA += Wn(i, j) *
               (A.at(i + 1, j + 1) - A.at(i, j + 1) - A.at(i + 1, j) + A.at(i, j));
  double s_top = 0.0, s_right = 0.0, s_ax1 = 0.0, s_ax2 = 0.0;
  for (int i = 0; i < n; ++i) s_top += Wn(i, n) * (-(A.at(i + 1, n) - A.at(i, n)));
  for (int j = 0; j < n; ++j) s_right += Wn(n, j) * (-(A.at(n, j + 1) - A.at(n, j)));
  for (int i = 0; i < n; ++i) s_ax1 += s.W1[i] * (A.at(i + 1, 0) - A.at(i, 0));
  for (int j = 0; j < n; ++j) s_ax2 += s.W2[j] * (A.at(0, j + 1) - A.at(0, j));

  const double rhs = A.at(n, n) * Wn(n, n) - A.at(n, 0) * Wn(n, 0) - A.at(0, n) * Wn(0, n) +
                     s_WdA + s_top + s_right + s_ax1 + s_ax2;
  return std::abs(lhs - rhs);
}

}  // namespace awf
