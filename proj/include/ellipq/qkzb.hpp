#pragma once

// Lattice-sum machinery for the difference-equation connection: the
// m-variable phase function
//
//   Phi(t, z) = prod_{j<=m, l<=n} Phi_{a_l}(t_j - z_l)
//             * prod_{i<j} Phi_{-2 eta}(t_i - t_j)
//
// built from one-variable phase functions Phi_a(t+p) = theta(t+a)/theta(t-a)
// Phi_a(t), the vector-valued integrand Phi(t,z) psi^xi(t,z,lambda) with
//
//   psi^xi = xi(p lambda - 2 sum_l a_l z_l + 4 eta sum_j t_j)
//            * sum_c omega_c(t, lambda) e_c,
//
// and the exact shift identities it satisfies:
//
//   Phi(t, z + p delta_j) = rho_j(t, z) Phi(t, z),
//     rho_j = prod_i theta(t_i - z_j - a_j - p) / theta(t_i - z_j + a_j - p),
//
//   Q_1 ... Q_m' h(t) = h(t_1+p, .., t_m'+p, t_m'+1, ..) phi^{m'}(t),
//     (Q_i f)(t) = f(.., t_i + p, ..) phi_i(t),
//
// with phi_i and phi^{m'} explicit theta-ratio products given in the
// implementation.  On top of these, jackson_sum_diagnostic forms the
// truncated lattice sum  Psi_K(z, lambda) = sum_{alpha in {-K..K}^m}
// (Phi psi^xi)(t0 + p alpha, z, lambda)  and reports the residual of the
// difference equation  Psi(z + p delta_j) = K_j(z) Psi(z)  as a function of
// the truncation level K.  The residual trend is a DIAGNOSTIC: the equation
// holds only up to terms that telescope under t_i -> t_i + p, so the
// truncated residual measures the decay of the integrand at the truncation
// edge and is reported, never asserted.

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "ellipq/diffop.hpp"
#include "ellipq/model.hpp"
#include "ellipq/omega.hpp"

namespace ellipq {

// Entire function of one complex variable (the free factor of the integrand).
using XiFunc = std::function<cplx(cplx)>;

struct JacksonIntegrand {
  ModelConfig config;  // elliptic.p must be set with Im p > 0
  XiFunc xi;           // defaults to the constant 1
};

// Validates the step parameter and installs the default xi.
JacksonIntegrand make_integrand(ModelConfig config, XiFunc xi = nullptr);

// m-variable phase at the point (t, z); z must have one entry per site.
cplx phase_eval(const JacksonIntegrand& J, const std::vector<cplx>& t,
                const std::vector<cplx>& z);

// Argument handed to xi: p lambda - 2 sum_l a_l z_l + 4 eta sum_j t_j.
cplx xi_argument(const JacksonIntegrand& J, const std::vector<cplx>& t,
                 const std::vector<cplx>& z, cplx lambda);

// Coefficients of psi^xi over the zero-weight basis (requires
// sum Lambda = 2 m and t.size() == m).
Eigen::VectorXcd psi_xi(const JacksonIntegrand& J, const std::vector<cplx>& t,
                        const std::vector<cplx>& z, cplx lambda);

// Full integrand Phi(t,z) psi^xi(t,z,lambda).
Eigen::VectorXcd integrand_eval(const JacksonIntegrand& J,
                                const std::vector<cplx>& t,
                                const std::vector<cplx>& z, cplx lambda);

// Relative deviation of Phi(t, z + p delta_j) from rho_j(t,z) Phi(t,z);
// j is 1-based.
double verify_phase_shift(const JacksonIntegrand& J, const std::vector<cplx>& t,
                          const std::vector<cplx>& z, int j);

// Relative deviation of the composed translation operators Q_1..Q_m' applied
// to the handle h from the closed product form, evaluated at t.  Holds for
// arbitrary h (the factors telescope).
double verify_q_product(const JacksonIntegrand& J, const TFunc& h, int mprime,
                        const std::vector<cplx>& t);

// Bookkeeping identity for the xi argument: shifting z_1 and t_1..t_m' by p
// changes it exactly as shifting lambda by -2 eta (Lambda_1 - 2 m') does.
// Returns the max of the argument deviation and the xi-value deviation.
double xi_shift_residual(const JacksonIntegrand& J, const std::vector<cplx>& t,
                         const std::vector<cplx>& z, cplx lambda, int mprime);

struct JacksonReport {
  std::vector<int> levels;        // truncation levels 0..K
  std::vector<double> residuals;  // difference-equation residual per level
  std::vector<double> psi_norms;  // max-norm of the truncated sum per level
  int skipped = 0;                // lattice points dropped near poles
  bool monotone = false;          // residuals strictly decreasing in the level
};

// Truncated lattice sums over t0 + p {-K..K}^m for both sides of the
// difference equation in the j-th point (1-based), evaluated at lambda.
// K is capped at 6; lattice points are evaluated in parallel and summed in a
// fixed order.
JacksonReport jackson_sum_diagnostic(RBlockCache& cache, const JacksonIntegrand& J,
                                     const std::vector<cplx>& t0, int j, int K,
                                     cplx lambda);

}  // namespace ellipq
