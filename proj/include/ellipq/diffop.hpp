#pragma once

// Difference operators in the dynamical variable lambda acting on functions
// with values in a fixed weight space.  Every operator here is a finite sum
//
//   (A f)(lambda) = sum_s A_s(lambda) f(lambda - 2 eta s),
//
// stored as a map from the integer shift s to the matrix-valued evaluator
// A_s.  Composition follows from substituting one sum into the other:
//
//   (A o B)_s(lambda) = sum_{s1+s2=s} A_{s1}(lambda) B_{s2}(lambda - 2 eta s1).
//
// The concrete operators are assembled from two-factor exchange blocks with
// the dynamical argument resolved per basis component: an operator factor
// acting on tensor slots (k,l) with argument lambda - 2 eta sum h^{(i)}
// becomes a block matrix whose (row, column) entry is evaluated at
// lambda - 2 eta sum_i (Lambda_i - 2 j_i), the j_i taken from the column's
// composition label.  Coinciding evaluation points with equal weights
// resolve to the flip (the regular limit of the block).
//
// Operators are immutable once built.  The builders capture the supplied
// block cache by reference; the cache must outlive every evaluation.

#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include <Eigen/Dense>

#include "ellipq/model.hpp"
#include "ellipq/rmatrix.hpp"

namespace ellipq {

using MatrixFunc = std::function<Eigen::MatrixXcd(cplx)>;
using VectorFunc = std::function<Eigen::VectorXcd(cplx)>;

struct ShiftOperator {
  std::vector<Composition> codomain;  // row basis labels
  std::vector<Composition> domain;    // column basis labels
  cplx two_eta{0.0};
  std::map<int, MatrixFunc> terms;    // s -> A_s

  std::size_t rows() const { return codomain.size(); }
  std::size_t cols() const { return domain.size(); }
  // A_s(lambda); the zero matrix when the shift is absent.
  Eigen::MatrixXcd term(int s, cplx lambda) const;
};

// {0 -> Id} on the given basis.
ShiftOperator identity_op(std::vector<Composition> basis, cplx two_eta);

// Pure multiplication operator {0 -> mat(lambda)} (square when the bases
// coincide; rectangular operators map between different weight orderings).
ShiftOperator mult_op(std::vector<Composition> codomain, std::vector<Composition> domain,
                      cplx two_eta, MatrixFunc mat);

// A o B (apply B first).  Requires A.domain == B.codomain and equal steps.
ShiftOperator compose(const ShiftOperator& A, const ShiftOperator& B);

// (A f)(lambda) for a vector-valued function handle.
Eigen::VectorXcd apply_op(const ShiftOperator& A, const VectorFunc& f, cplx lambda);

// Max over the union of shifts and sampled lambda of ||A_s - B_s||_max;
// missing shifts compare against zero.  Samples run in parallel.
double op_equal(const ShiftOperator& A, const ShiftOperator& B, int lambda_samples = 5,
                std::uint64_t seed = 20240817ull);

// ||A o B - B o A|| via op_equal.
double commutator_residual(const ShiftOperator& A, const ShiftOperator& B,
                           int lambda_samples = 5, std::uint64_t seed = 20240817ull);

// Basis of the zero-weight space (compositions of (sum Lambda)/2 respecting
// the truncation caps).  Throws UnreachableWeight when sum Lambda is not a
// nonnegative even integer.
std::vector<Composition> zero_weight_basis(const ModelConfig& config);

// The weight-shift operator of factor j (1-based): f(lambda) restricted to
// the h^(j)-eigenspace of eigenvalue mu maps to f(lambda - 2 eta mu).
// Requires Lambda_j to make every mu an integer within 1e-9.
ShiftOperator gamma_op(const ModelConfig& config, int j);

// The j-th commuting difference operator: the ordered product of exchange
// factors at arguments z_j - z_k for k < j, the weight shift of factor j,
// then the factors at z_j - z_l for l > j, dynamical arguments resolved per
// component.
ShiftOperator build_H(RBlockCache& cache, const ModelConfig& config, int j);

// Multiplication operator by the right factor product of the first operator,
// so that H_1 = gamma_1 o tilde_h1.  Used by the eigenfunction identities.
ShiftOperator tilde_h1(RBlockCache& cache, const ModelConfig& config);

// Transfer matrix with auxiliary weight Lambda (the common value of the
// config weights, required nonnegative integer): partial trace over the
// auxiliary factor of the ordered product of blocks at w - z_n .. w - z_1,
// the term of auxiliary weight mu shifting lambda by 2 eta mu.
ShiftOperator build_T(RBlockCache& cache, const ModelConfig& config, cplx w);

// The discrete-connection operator: as build_H but with the factors to the
// left of the weight shift taken at arguments z_j - z_k + p.  Requires the
// step p to be set in config.elliptic.
ShiftOperator build_K(RBlockCache& cache, const ModelConfig& config, int j);

// Exchange operator (1 <= j <= n-1): multiplication by the flip composed
// with the (j, j+1) block at z_j - z_{j+1}, dynamical argument shifted by
// the weights of factors 1..j-1.  Maps functions on the (Lambda, z) ordering
// to functions on the ordering with factors j, j+1 swapped.
ShiftOperator exchange_op(RBlockCache& cache, const ModelConfig& config, int j);

struct ExchangeReport {
  double intertwine = 0.0;  // H_{j+1}(swapped) o S_j  vs  S_j o H_j
  double inverse = 0.0;     // S_j(swapped) o S_j  vs  Id
};
ExchangeReport verify_exchange(RBlockCache& cache, const ModelConfig& config, int j,
                               int lambda_samples = 5,
                               std::uint64_t seed = 20240817ull);

// Horizontality of the discrete connection: residual of
//   K_i(.., z_j + p, ..) o K_j(z)  -  K_j(.., z_i + p, ..) o K_i(z).
double flatness_residual(RBlockCache& cache, const ModelConfig& config, int i, int j,
                         int lambda_samples = 3, std::uint64_t seed = 20240817ull);

}  // namespace ellipq
