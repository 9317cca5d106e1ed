// Odd Jacobi theta function, its derivative, and one-variable phase functions.
//
// theta(t) = -sum_{j in Z} exp(pi*i*tau*(j+1/2)^2 + 2*pi*i*(j+1/2)*(t+1/2))
//          = 2 * sum_{j>=0} (-1)^j exp(pi*i*tau*(j+1/2)^2) * sin((2j+1)*pi*t).
// It is odd and entire, vanishes on Z + tau*Z, and satisfies
//   theta(t+1) = -theta(t),
//   theta(t+tau) = -exp(-2*pi*i*t - pi*i*tau) * theta(t).
#pragma once

#include <optional>
#include <vector>

#include "ellipq/errors.hpp"
#include "ellipq/util.hpp"

namespace ellipq {

struct EllipticParams {
  cplx tau;                 // modulus, Im tau > 0
  cplx eta{0.0};            // Planck constant
  // Step for the difference connection and phase functions.  Any finite value
  // is accepted (p = 0 is the degenerate connection); the convergent-product
  // evaluators (nome_r, PhaseEvaluator) additionally require Im p > 0.
  std::optional<cplx> p{};

  void validate() const;    // throws ConfigError on violated invariants
  cplx nome_q() const { return std::exp(kTwoPi * kI * tau); }
  cplx nome_r() const;      // requires p
};

class ThetaEngine {
 public:
  explicit ThetaEngine(cplx tau);
  explicit ThetaEngine(const EllipticParams& params) : ThetaEngine(params.tau) {}

  cplx theta(cplx t) const;
  cplx theta_deriv(cplx t) const;
  cplx theta_prime0() const { return theta_prime0_; }
  cplx tau() const { return tau_; }
  int series_cutoff() const { return cutoff_; }
  // Local magnitude scale used for "compared to zero" tolerances.
  double scale() const { return std::abs(theta_prime0_); }

  // Distance from x to the nearest point of Z + tau*Z.
  double lattice_distance(cplx x) const;
  // Canonical representative x - round(beta)*tau - round(alpha) with
  // x = alpha + beta*tau (alpha, beta real); used for deduplication.
  cplx lattice_reduce_point(cplx x) const;

 private:
  struct Reduced {
    cplx t0;      // representative with |Im-strip| and |Re| both reduced
    cplx factor;  // theta(t) = factor * theta(t0)
    double k;     // tau-direction shift count (for the derivative transform)
  };
  Reduced reduce(cplx t) const;
  cplx series(cplx t0) const;
  cplx series_deriv(cplx t0) const;

  cplx tau_;
  int cutoff_ = 0;                // series terms j = 0..cutoff_-1
  std::vector<cplx> coeff_;       // 2*(-1)^j * exp(pi*i*tau*(j+1/2)^2)
  cplx theta_prime0_{};
};

// One-variable phase function Phi_a for the step p:
//   Phi_a(t+p) = theta(t+a)/theta(t-a) * Phi_a(t),
// realized by the explicit double product
//   Phi_a(t) = exp(-2*pi*i*a*t/p) * prod_{j,k>=0}
//     (1 - r^j q^k E(t-a)) (1 - r^(j+1) q^(k+1) / E(t+a))
//   / [(1 - r^j q^k E(t+a)) (1 - r^(j+1) q^(k+1) / E(t-a))],
// with E(x) = exp(2*pi*i*x), q = exp(2*pi*i*tau), r = exp(2*pi*i*p).
class PhaseEvaluator {
 public:
  // extra_cutoff extends both truncation bounds (for convergence tests).
  PhaseEvaluator(const EllipticParams& params, cplx a, int extra_cutoff = 0);

  cplx phi(cplx t) const;  // throws PoleProximity if a product factor < 1e-13
  cplx a() const { return a_; }
  int cutoff_j() const { return jmax_; }
  int cutoff_k() const { return kmax_; }

 private:
  cplx tau_, p_, a_;
  cplx q_, r_;
  int jmax_ = 0, kmax_ = 0;
};

}  // namespace ellipq
