// Shared numeric utilities: complex alias, deterministic RNG, parallel loops.
#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace ellipq {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846264338327950288;
inline constexpr double kTwoPi = 2.0 * kPi;
inline const cplx kI{0.0, 1.0};

// Number of worker threads: ELLIPQ_THREADS if set (>=1), else hardware concurrency.
int thread_count();

// Runs body(i) for i in [0, count). Work is split statically across threads;
// each index must write only to its own output slot, which keeps results
// independent of the thread count.
void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body);

// Deterministic random helper used by every seeded check.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  double real(double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    return d(gen_);
  }
  // Complex number with Re in [re_lo, re_hi], Im in [im_lo, im_hi].
  cplx box(double re_lo, double re_hi, double im_lo, double im_hi) {
    double re = real(re_lo, re_hi);
    double im = real(im_lo, im_hi);
    return {re, im};
  }
  // Generic "small generic complex" draw for parameters.
  cplx generic(double scale = 0.4) { return box(-scale, scale, -scale, scale); }
  int integer(int lo, int hi) {
    std::uniform_int_distribution<int> d(lo, hi);
    return d(gen_);
  }

 private:
  std::mt19937_64 gen_;
};

// Relative deviation |a-b| / max(|a|,|b|,floor).
inline double rel_dev(cplx a, cplx b, double floor = 1e-300) {
  double s = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / s;
}

}  // namespace ellipq
