#pragma once

// Evaluation of the omega basis functions: symmetric multi-site elliptic
// weight functions built from theta-function ratios.  The one-point function
// is
//
//   omega_m(t_1..t_m, lambda; z, a)
//     = prod_{i<j} theta(t_i - t_j) / theta(t_i - t_j + 2 eta)
//       * prod_j theta(lambda + 2 eta m + t_j - z - a) / theta(t_j - z - a),
//
// and the multi-site function omega_{m_1..m_n} is given by an explicit sum
// over assignments of the variables t_i to the n sites (equivalently over
// disjoint index subsets I_1..I_n with |I_k| = m_k):
//
//   omega_{m_1..m_n}(t, lambda; z)
//     = u(t)^{-1} sum_{I_1..I_n}
//         prod_{i in I_l, k < l} theta(t_i - z_k + a_k) / theta(t_i - z_k - a_k)
//       * prod_{k<l} prod_{i in I_k, j in I_l}
//                                theta(t_i - t_j + 2 eta) / theta(t_i - t_j)
//       * prod_k prod_{j in I_k}
//           theta(lambda_k + 2 eta m_k + t_j - z_k - a_k) / theta(t_j - z_k - a_k),
//
// with u(t) = prod_{i<j} theta(t_i - t_j + 2 eta)/theta(t_i - t_j) and the
// site-dependent dynamical shift lambda_k = lambda - 2 eta sum_{l<k} (Lambda_l - 2 m_l).
//
// An independent construction route (the symmetrization oracle) combines
// one-point blocks on consecutive variable ranges with connecting theta-ratio
// factors and applies the twisted symmetrization
//
//   (s_j f)(t) = f(.., t_{j+1}, t_j, ..) * theta(t_j - t_{j+1} - 2 eta)
//                                        / theta(t_j - t_{j+1} + 2 eta),
//   Sym = sum over all permutations,
//
// computed through the intertwining identity  Sym0(u f) = u Sym(f)  where
// Sym0 is plain argument permutation.  Functions in the underlying space are
// 1-periodic in each t_j and pick up the factor exp(-2 pi i (lambda + 4 eta j
// - 2 eta)) under t_j -> t_j + tau; after multiplication by u(t) the factor
// becomes exp(-2 pi i (lambda + 2 eta m)), independent of j.  check_membership
// verifies these three transformation laws on sample points.

#include <cstddef>
#include <functional>
#include <vector>

#include "ellipq/elliptic.hpp"
#include "ellipq/model.hpp"
#include "ellipq/util.hpp"

namespace ellipq {

// Point in the evaluation domain: the tuple of spectral variables together
// with the dynamical variable.
struct OmegaPoint {
  std::vector<cplx> t;
  cplx lambda{0.0, 0.0};

  std::size_t size() const { return t.size(); }
};

// Function handle of the spectral variables alone (dynamical variable bound).
using TFunc = std::function<cplx(const std::vector<cplx>&)>;

// Function family carrying an explicit dynamical argument.
using LFunc = std::function<cplx(const std::vector<cplx>&, cplx)>;

// Deviations measured by check_membership (relative, max over samples and
// variable indices).
struct MembershipReport {
  double period_dev = 0.0;          // 1-periodicity in each variable
  double tau_multiplier_dev = 0.0;  // tau-shift factor exp(-2 pi i (lambda + 4 eta j - 2 eta))
  double sym_multiplier_dev = 0.0;  // tau-shift factor of u^{-1} f: exp(-2 pi i (lambda + 2 eta m))

  double max_dev() const;
};

class OmegaEvaluator {
 public:
  explicit OmegaEvaluator(ModelConfig config);

  const ModelConfig& config() const { return config_; }
  const ThetaEngine& engine() const { return engine_; }

  // u(t) = prod_{i<j} theta(t_i - t_j + 2 eta) / theta(t_i - t_j).
  // Throws PoleProximity when two variables collide modulo the lattice
  // (separation guard 1e-8) or when t_i - t_j + 2 eta hits a lattice point.
  cplx u_factor(const std::vector<cplx>& t) const;

  // One-point function omega_m for a single site at z with weight parameter a.
  // Requires point.t.size() == m; m = 0 yields 1.
  cplx one_point(std::size_t m, const OmegaPoint& point, cplx z, cplx a) const;

  // Multi-site function omega_{comp} by the explicit assignment sum.
  // Requires comp.size() == config.n() and comp.total() == point.size().
  cplx multi(const Composition& comp, const OmegaPoint& point) const;

  // All omega_{comp} of total degree m at one point, sharing theta tables.
  // Order matches enumerate_compositions(config.n(), m).
  std::vector<cplx> all(std::size_t m, const OmegaPoint& point) const;

  // Handle evaluating omega_{comp}(t, lambda) at fixed lambda.
  TFunc multi_handle(const Composition& comp, cplx lambda) const;

  // Handle producing the full degree-m batch at fixed lambda.
  std::function<std::vector<cplx>(const std::vector<cplx>&)> batch_handle(
      std::size_t m, cplx lambda) const;

  // Independent oracle: single twisted symmetrization of the product of
  // one-point blocks on consecutive index ranges times connecting factors,
  // normalized by 1/prod(m_k!).  Cost grows as m! — intended for m <= 3.
  cplx sym_oracle(const Composition& comp, const OmegaPoint& point) const;

  // Twisted transposition action on a function handle, 1 <= j <= m-1
  // (1-based): (s_j f)(t) = f(swap_j t) * theta(t_j - t_{j+1} - 2 eta)
  //                                     / theta(t_j - t_{j+1} + 2 eta).
  cplx s_action(std::size_t j, const TFunc& f, const std::vector<cplx>& t) const;

  // Verify the three transformation laws for a degree-m function handle at
  // the given dynamical value on `samples` random points (default 5).
  MembershipReport check_membership(const TFunc& f, std::size_t m, cplx lambda,
                                    std::size_t samples = 5,
                                    std::uint64_t seed = 20240817ull) const;

  // Random point of the given degree inside the fundamental cell, at distance
  // at least `margin` from every pole divisor used by the omega functions.
  std::vector<cplx> sample_point(std::size_t m, Rng& rng,
                                 double margin = 1e-3) const;

 private:
  ModelConfig config_;
  ThetaEngine engine_;
  double sep_guard_ = 1e-8;

  struct Tables;  // shared theta tables for the assignment sum
  Tables make_tables(const OmegaPoint& point) const;
  cplx multi_from_tables(const Composition& comp, const OmegaPoint& point,
                         const Tables& tab) const;
};

// Pairwise combination of two function families carried by complementary
// site groups: with nu = a_1 + .. + a_{n1} - 2 eta m1,
//
//   (f * g)(t_1..t_m, lambda)
//     = 1/(m1! m2!) Sym( f(t_1..t_m1, lambda)
//                        * g(t_{m1+1}..t_m, lambda - 2 nu)
//                        * prod_{j>m1} prod_{l<=n1}
//                            theta(t_j - z_l + a_l) / theta(t_j - z_l - a_l) ).
//
// `z1`/`a1` are the site positions and weight parameters of the first group.
// The result is associative, which the tests verify numerically.
LFunc phi_combine(const OmegaEvaluator& ev, const LFunc& f, std::size_t m1,
                  std::vector<cplx> z1, std::vector<cplx> a1, const LFunc& g);

}  // namespace ellipq
