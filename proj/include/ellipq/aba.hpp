#pragma once

// Operator-algebra side of the eigenvalue problem: the two-by-two operator
// matrix L(z, lambda) of the module V_Lambda1(z_1) (x) ... (x) V_Lambdan(z_n)
// with a two-dimensional auxiliary factor, its blocks a, b, c, d, the chain
// states built by repeated application of the weight-lowering block b, and
// the transfer matrix
//
//   T(w) f(lambda) = a(w, lambda) f(lambda - 2 eta) +
//                    d(w, lambda) f(lambda + 2 eta)
//
// acting on functions with values in the zero-weight space.
//
// L(z, lambda) is the ordered product of the closed-form one-row blocks
// R_{1,Lambda_k}(z - z_k, lambda - 2 eta sum_{l<k} h^{(l)}) with the site-1
// factor applied first; it satisfies the exchange relation
//
//   R^{(12)}(z-w, lambda-2 eta h^(3)) L^{(13)}(z, lambda) L^{(23)}(w, lambda-2 eta h^(1))
//   = L^{(23)}(w, lambda) L^{(13)}(z, lambda-2 eta h^(2)) R^{(12)}(z-w, lambda)
//
// and the defining intertwining property against the function-space basis,
// both of which have numeric verifiers below.
//
// All matrices here are written in the natural site order 1..n.  The module
// conventionally acts with the reversed factor order; the reversal is a pure
// relabeling applied at the data boundary, and the identities verified here
// are stated so that no implicit reversal is needed.
//
// Chain states: with v_c(lambda) = e^{c lambda} prod_{j=1}^m
// theta(lambda - 2 eta j)/theta(2 eta) and (b(t) f)(lambda) =
// b(t, lambda) f(lambda + 2 eta),
//
//   (b(t_1 + eta) ... b(t_m + eta) v_c)(lambda)
//     = e^{c(lambda + 2 eta m)} (-1)^m
//       prod_{i<j} theta(t_i - t_j + 2 eta)/theta(t_i - t_j)
//       sum_j omega_{j_1..j_n}(t, lambda) e_{j_n} (x) ... (x) e_{j_1},
//
// which identifies the chain states with the weight-function basis.  The
// root equations in this convention use arguments t_i - z_k - (1 +- Lambda_k)
// eta and are carried into the convention of bethe.hpp by t -> t - eta.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "ellipq/diffop.hpp"
#include "ellipq/model.hpp"

namespace ellipq {

// The module data plus the extended slot layout (two-dimensional auxiliary
// factor in slot 0, sites in slots 1..n).
struct LOperator {
  ModelConfig config;
  std::vector<cplx> ext_weights;  // {1, Lambda_1, .., Lambda_n}
  std::vector<int> ext_caps;      // {1, site caps (-1 = unbounded)}
};

LOperator build_L(const ModelConfig& config);

// Basis of the sector of the extended module with total weight drop `drop`.
std::vector<Composition> l_sector(const LOperator& op, int drop);

// Matrix of L(z, lambda) on that sector basis.
Eigen::MatrixXcd l_matrix(const LOperator& op, cplx z, cplx lambda, int drop);

// One of the four operator blocks between weight sectors of the module:
// which = 'a' (aux 0 -> 0), 'b' (1 -> 0), 'c' (0 -> 1), 'd' (1 -> 1), taking
// the sector with total drop v_drop_in to the sector whose drop is fixed by
// weight conservation.  Rows and columns are indexed by the capped
// compositions of the respective drops.
Eigen::MatrixXcd l_block(const LOperator& op, char which, cplx z, cplx lambda,
                         int v_drop_in);

// Residual of the defining intertwining property: the pairing of L(z,lambda)
// against the function basis with z first equals the basis with z last and
// the auxiliary label rotated to the back, evaluated at sampled t-points.
double l_defining_residual(const LOperator& op, cplx z, cplx lambda, int drop,
                           int t_samples = 2, std::uint64_t seed = 20240817ull);

// Residual of the exchange relation on the two-auxiliary extended sector.
double rll_residual(const LOperator& op, cplx z, cplx w, cplx lambda, int drop);

// Transfer matrix at spectral point w as a lambda-shift operator on the
// zero-weight basis (requires sum Lambda = 2 m).
ShiftOperator transfer_from_L(const LOperator& op, cplx w);

// Root-convention converters between this header (arguments shifted by eta)
// and the convention of bethe.hpp.
std::vector<cplx> to_aba_roots(const ModelConfig& config, const std::vector<cplx>& t);
std::vector<cplx> from_aba_roots(const ModelConfig& config, const std::vector<cplx>& t);

// max_i |LHS_i e^{-4 eta c} - 1| of the root equations in this convention.
double aba_bethe_residual(const ModelConfig& config, const std::vector<cplx>& t_aba,
                          cplx c);

// Two-term transfer-matrix eigenvalue at spectral point w.
cplx aba_eigenvalue(const ModelConfig& config, const std::vector<cplx>& t_aba,
                    cplx c, cplx w);

// Coefficients of (b(t_1 + eta) ... b(t_m + eta) v_c)(lambda) over the
// drop-m sector labels in natural site order; t is in the convention of
// bethe.hpp (the eta shift is applied internally).  Throws
// SingularConfiguration when two roots coincide modulo the lattice.
Eigen::VectorXcd b_product_state(const ModelConfig& config,
                                 const std::vector<cplx>& t, cplx c, cplx lambda);

struct AbaVerifyReport {
  double bae_residual = 0.0;         // root equations in this convention
  double transfer_residual = 0.0;    // T(w) psi vs eigenvalue * psi
  double multiplier_residual = 0.0;  // psi(lambda+1) vs (-1)^m e^c psi(lambda)
};

// Verifies that the chain state built from a solution of the shifted root
// equations is a common eigenvector of the transfer matrices.
AbaVerifyReport aba_transfer_verify(const ModelConfig& config,
                                    const std::vector<cplx>& t_aba, cplx c,
                                    int w_samples = 5, int lambda_samples = 3,
                                    std::uint64_t seed = 20240817ull);

}  // namespace ellipq
