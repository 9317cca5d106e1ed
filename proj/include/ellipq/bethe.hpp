#pragma once

// Quasiperiodic common eigenfunctions of the commuting difference operators.
//
// The roots t_1..t_m and a constant c obeying, for j = 1..m,
//
//   prod_l theta(t_j - z_l + a_l)/theta(t_j - z_l - a_l)
//     * prod_{k != j} theta(t_j - t_k - 2 eta)/theta(t_j - t_k + 2 eta)
//   = e^{-4 eta c}
//
// determine the vector-valued function
//
//   psi(lambda) = sum_{|j| = m} e^{c lambda} omega_{j_1..j_n}(t, lambda)
//                 e_{j_1} (x) ... (x) e_{j_n}
//
// which is a common eigenfunction of the difference operators with
// eigenvalues eps_j = e^{-2 c a_j} prod_k theta(t_k - z_j - a_j)/
// theta(t_k - z_j + a_j) and multiplier psi(lambda + 1) = (-1)^m e^c
// psi(lambda).  The solver works on the logarithmic form of the equations
// with per-iteration branch re-rounding; solutions are deduplicated modulo
// lattice translations and permutations of the roots, and configurations
// with two roots coinciding modulo the lattice are discarded.
//
// When 2 eta = 1/N (N odd, integer weights), the eigenfunctions attached to
// a fixed multiplier alpha = e^c (-1)^m span the space of functions with
// that multiplier: stacking psi(mu0), psi(mu0 + 1/N), .., psi(mu0+(N-1)/N)
// for all solutions gives a square matrix whose determinant stays away from
// zero; completeness_det measures it at large real alpha, starting the root
// search from first-order asymptotic positions.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "ellipq/diffop.hpp"
#include "ellipq/model.hpp"

namespace ellipq {

struct BetheSolution {
  std::vector<cplx> t;   // roots
  cplx c{0.0};           // spectral constant
  std::vector<cplx> eps; // per-factor eigenvalues
  double residual = 0.0; // max_j |LHS_j e^{4 eta c} - 1| in product form
  cplx multiplier{0.0};  // (-1)^m e^c
};

struct NewtonOptions {
  int max_iterations = 60;
  double tolerance = 1e-13;      // stop when the log-form residual is below
  double accept = 1e-10;         // product-form residual bound for acceptance
  double dedup_distance = 1e-8;  // lattice distance identifying two solutions
  double singular_floor = 1e-12; // relative smallest singular value of the Jacobian
};

// max_j |LHS_j e^{4 eta c} - 1| of the root equations in product form.
double bethe_residual(const ModelConfig& config, const std::vector<cplx>& t, cplx c);

// eps_j = e^{-2 c a_j} prod_k theta(t_k - z_j - a_j)/theta(t_k - z_j + a_j).
std::vector<cplx> bethe_eigenvalues(const ModelConfig& config,
                                    const std::vector<cplx>& t, cplx c);

// Solution record (eigenvalues, product residual, multiplier) for given roots.
BetheSolution make_solution(const ModelConfig& config, std::vector<cplx> t, cplx c);

// Damped Newton on the logarithmic form from one start point.  Throws
// ConvergenceFailure when the iteration stalls or exceeds max_iterations,
// JacobianSingular when the linearization collapses.
std::vector<cplx> bethe_newton(const ModelConfig& config, cplx c,
                               std::vector<cplx> start,
                               const NewtonOptions& opt = {});

// Multi-start driver: Newton from every start in parallel; failed starts are
// skipped; converged roots are filtered (product residual, no coinciding
// roots) and deduplicated modulo lattice translations and permutations.
std::vector<BetheSolution> bethe_solve(const ModelConfig& config, cplx c,
                                       const std::vector<std::vector<cplx>>& starts,
                                       const NewtonOptions& opt = {});

// Coefficients of psi(lambda) over the zero-weight basis.
Eigen::VectorXcd bethe_psi(const ModelConfig& config, const BetheSolution& sol,
                           cplx lambda);

struct BetheVerifyReport {
  std::vector<double> eigen_residual;  // per factor: |H_j psi - eps_j psi|/|psi|
  double multiplier_residual = 0.0;    // psi(lambda+1) vs multiplier * psi(lambda)
  double e09_residual = 0.0;           // dual-pairing identity at the roots
};

// Verifies the eigenvalue equations over sampled lambda, the multiplier
// relation, and the graded dual-pairing identity behind them: for u in the
// dual weight-mu slice of the first factor and v dual in the rest,
//   omega(lambda - 2 eta mu) (tilde_h1(lambda - 2 eta mu))^* (u (x) v) |_t
//     = e^{2 eta c mu} eps_1 omega(lambda) (u (x) v) |_t.
BetheVerifyReport bethe_verify(RBlockCache& cache, const ModelConfig& config,
                               const BetheSolution& sol, int lambda_samples = 5,
                               std::uint64_t seed = 20240817ull);

struct CompletenessTask {
  int N = 3;            // 2 eta = 1/N, N odd, N > m
  cplx alpha{0.0};      // multiplier, large real for the asymptotic starts
  cplx mu0{0.0};        // base point of the evaluation grid mu0 + r/N
  int expected_count = 0;  // N * dim V[0]; 0 = derive from the config
};

struct CompletenessReport {
  int found = 0;                 // accepted solutions across all branches
  double det_abs = 0.0;          // |det| of the stacked-value matrix
  double det_normalized = 0.0;   // |det| / prod of row norms
  cplx vandermonde{0.0};         // prod_{r>s} (e^{4 pi i r/N} - e^{4 pi i s/N})
  std::vector<BetheSolution> solutions;
};

// Finds the N * dim V[0] solutions with multiplier alpha from the asymptotic
// start positions (one per weight-basis label and phase branch), stacks the
// eigenfunction values on the grid, and reports the determinant.  Throws
// ConfigError when N is even, N <= m, 2 eta != 1/N, or a weight is not a
// nonnegative integer; SolutionDeficit when fewer solutions survive.
CompletenessReport completeness_det(const CompletenessTask& task,
                                    const ModelConfig& config);

}  // namespace ellipq
