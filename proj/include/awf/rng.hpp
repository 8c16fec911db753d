#pragma once

#include <cmath>
#include <cstdint>

namespace awf {

// Reproducibility contract: every Monte Carlo routine derives one generator
// per (seed, sample index) pair, so results are independent of thread count
// and identical across runs. The algorithms are pinned:
//   - stream keys: splitmix64 applied to seed, offset by index * golden ratio
//   - generator:   xoshiro256++ seeded from four splitmix64 outputs
//   - gaussians:   Marsaglia polar method (variable uniform consumption is
//                  fine because streams never share state)

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

class Xoshiro256pp {
 public:
  Xoshiro256pp() : Xoshiro256pp(0, 0) {}

  Xoshiro256pp(std::uint64_t seed, std::uint64_t stream_index) {
    std::uint64_t key = seed;
    key = splitmix64_next(key);  // decorrelate adjacent user seeds
    key += stream_index * 0x9E3779B97F4A7C15ull;
    std::uint64_t st = key;
    bool nonzero = false;
    for (auto& si : s_) {
      si = splitmix64_next(st);
      nonzero |= (si != 0);
    }
    if (!nonzero) s_[0] = 1;
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  /// Uniform in [0, 1), 53-bit resolution.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

/// Standard normal stream over one xoshiro instance.
class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t stream_index) : rng_(seed, stream_index) {}

  double next() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double x, y, s;
    do {
      x = 2.0 * rng_.next_unit() - 1.0;
      y = 2.0 * rng_.next_unit() - 1.0;
      s = x * x + y * y;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = y * m;
    have_spare_ = true;
    return x * m;
  }

  Xoshiro256pp& raw() { return rng_; }

 private:
  Xoshiro256pp rng_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Compensated (Neumaier) accumulator; summation order is pinned by the
/// caller, this only removes the round-off drift of long sums.
struct NeumaierSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double x) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

}  // namespace awf
