#pragma once

// Exchange blocks on weight spaces of two-factor tensor products.
//
// For weights (Lambda, M) at points (z, w) the degree-m weight functions
// omega_{ij} (labels i+j = m) and their point-swapped partners
// omega~_{kl} = omega(w,z,lambda) e_l* (x) e_k* span the same function space;
// the block is the transition matrix
//
//   omega~_{kl} = sum_{ij} R^{kl}_{ij} omega_{ij},
//
// equivalently the operator R(e_i (x) e_j) = sum_{kl} R^{kl}_{ij} e_k (x) e_l
// on the weight space (V_Lambda (x) V_M)[Lambda+M-2m].  It depends on z and w
// only through zdiff = z - w.  Rows index the output label (k,l), columns the
// input label (i,j), both in lexicographic composition order.
//
// The residue construction evaluates both function families against the
// iterated-residue functionals of every degree-m composition and solves
// B R^T = B~ (B[alpha,(ij)] = res_alpha omega_{ij}); the closed construction
// returns the explicit one-variable product formulas where they exist.
// At zdiff -> 0 with equal weights the block tends to the flip, and the
// coinciding-point functionals reproduce the flip at zdiff = 0 exactly.

#include <array>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "ellipq/model.hpp"
#include "ellipq/residues.hpp"

namespace ellipq {

struct WeightBlockMatrix {
  int m = 0;                           // total drop selecting the weight space
  std::vector<Composition> row_index;  // output labels (k,l)
  std::vector<Composition> col_index;  // input labels (i,j)
  Eigen::MatrixXcd entries;            // entries(r,c) = R^{row r}_{col c}
  double pairing_condition = 0.0;      // condition number of the residue solve

  int find_row(const Composition& c) const;
  int find_col(const Composition& c) const;
};

enum class RMethod { residue, closed };

// The degree-m exchange block for weights (Lambda, M) at separation
// zdiff = z - w and spectral parameter lambda.  The residue method works for
// generic parameters (throws SingularPairing past condition 1e10, and
// SingularConfiguration when zdiff sits on the lattice so the two pole
// staircases coincide); the closed method exists for m <= 1 and, on the
// two-dimensional quotients, for Lambda = M = 1, m = 2.
WeightBlockMatrix rblock(const EllipticParams& par, cplx Lambda, cplx M, cplx zdiff,
                         cplx lambda, int m, RMethod method = RMethod::residue,
                         const ContourSpec& spec = {});

// Exchange block at exactly coinciding points (zdiff = 0, equal weights),
// built from the coinciding-point functionals; equals the flip for generic
// parameters and serves as the zdiff -> 0 reference.
WeightBlockMatrix rblock_coincident(const EllipticParams& par, cplx Lambda,
                                    cplx lambda, int m, const ContourSpec& spec = {});

// The 4x4 operator on C^2 (x) C^2 in the basis e00, e01, e10, e11:
//   [[1, 0,           0,            0],
//    [0, alpha(z,l),  beta(z,l),    0],
//    [0, beta(z,-l),  alpha(z,-l),  0],
//    [0, 0,           0,            1]],
// alpha(z,l) = theta(l+2eta) theta(z) / (theta(l) theta(z-2eta)),
// beta(z,l) = -theta(l+z) theta(2eta) / (theta(l) theta(z-2eta)).
Eigen::Matrix4cd fundamental_r(const EllipticParams& par, cplx zdiff, cplx lambda);

// The four explicit entries of the mixed block with a two-dimensional first
// factor (weight 1) against a generic weight Lambda, at integer level k.
struct EvaluationEntries {
  cplx stay0;  // R^{0k}_{0k}
  cplx raise;  // R^{0,k+1}_{1k}
  cplx lower;  // R^{1,k-1}_{0k}
  cplx stay1;  // R^{1k}_{1k}
};
EvaluationEntries r_one_lambda(const EllipticParams& par, cplx Lambda, cplx zdiff,
                               cplx lambda, int k);

// Quotient block for nonnegative-integer weights: keeps labels (i,j) with
// i <= cap1 and j <= cap2 (unset caps keep everything).  Throws
// MethodUnavailable when neither cap is set, InvarianceViolated when a kept
// output couples to a deleted input beyond 1e-8 of the block scale.
WeightBlockMatrix reduce_to_L(const WeightBlockMatrix& block, std::optional<int> cap1,
                              std::optional<int> cap2);

// Flip block P(e_i (x) e_j) = e_j (x) e_i on the same index sets.
Eigen::MatrixXcd flip_matrix(const std::vector<Composition>& rows,
                             const std::vector<Composition>& cols);

// --- identity verifiers (max-norm residuals over the weight block) ---

// ||R_{Lambda,M}(z,.) R_{M,Lambda}(-z,.)^{(21)} - Id|| on the degree-m block.
double unitarity_residual(const EllipticParams& par, cplx Lambda, cplx M, cplx zdiff,
                          cplx lambda, int m, const ContourSpec& spec = {});

// Max-norm difference of both orderings of the three-factor exchange identity
//   R^{(12)}(z, l-2eta h^(3)) R^{(13)}(z+w, l) R^{(23)}(w, l-2eta h^(1))
// = R^{(23)}(w, l) R^{(13)}(z+w, l-2eta h^(2)) R^{(12)}(z, l)
// on the degree-m weight block of the triple tensor product.
double dybe_residual(const EllipticParams& par, const std::array<cplx, 3>& Lambda,
                     cplx z, cplx w, cplx lambda, int m, const ContourSpec& spec = {});

// Function-space check that the block really is the transition matrix on its
// own weight space: max relative deviation of omega~_{kl}(t) from
// sum_{ij} R^{kl}_{ij} omega_{ij}(t) over sample points t.
double transition_identity_residual(const EllipticParams& par, cplx Lambda, cplx M,
                                    cplx zdiff, cplx lambda, int m, int samples = 3,
                                    unsigned long long seed = 20240817ull,
                                    const ContourSpec& spec = {});

// Reversal of all signs: every theta argument of the construction is built
// from z, lambda, eta and the spectral variables, all of which flip together,
// so the block is invariant under (z, lambda, eta) -> (-z, -lambda, -eta) at
// fixed weights.  Returns the entrywise max-norm difference.
double sign_reversal_residual(const EllipticParams& par, cplx Lambda, cplx M,
                              cplx zdiff, cplx lambda, int m,
                              const ContourSpec& spec = {});

// ||rblock(Lambda, Lambda, delta, lambda) - P|| together with the deviation of
// the coinciding-point reference from P.
struct ZLimitReport {
  double near_deviation = 0.0;       // block at zdiff = delta vs the flip
  double reference_deviation = 0.0;  // coinciding-point block vs the flip
};
ZLimitReport z_limit_report(const EllipticParams& par, cplx Lambda, cplx lambda,
                            int m, cplx delta, const ContourSpec& spec = {});

// Memoizing store for repeated block requests (operator assembly evaluates
// the same block at many spectral parameters).  Thread-safe.
class RBlockCache {
 public:
  explicit RBlockCache(EllipticParams par, ContourSpec spec = {});

  const EllipticParams& params() const { return par_; }
  const ContourSpec& contour() const { return spec_; }

  // Cached rblock(par, Lambda, M, zdiff, lambda, m) via the residue method.
  WeightBlockMatrix get(cplx Lambda, cplx M, cplx zdiff, cplx lambda, int m);
  std::size_t size() const;

 private:
  EllipticParams par_;
  ContourSpec spec_;
  mutable std::mutex mu_;
  std::map<std::string, WeightBlockMatrix> store_;
};

}  // namespace ellipq
