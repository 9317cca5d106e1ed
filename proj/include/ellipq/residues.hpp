#pragma once

// Iterated contour residues against the pole staircases of the weight
// functions, and the residue/weight-function pairing matrix.
//
// Conventions.  For a composition (m_1,...,m_n) of m, group l occupies the
// variable indices M_{l-1}+1..M_l (M_l = m_1+...+m_l, 1-based), and variable
// t_{M_{l-1}+r} is pinned at z_l + a_l - 2*eta*(m_l - r).  Residues are taken
// innermost-first in t_m, i.e.
//
//   res = res_{t_1} ( res_{t_2} ( ... res_{t_m} f ) ),
//
// so each outer residue picks up the simple pole created by pinning its inner
// neighbour on the hyperplane t_v - t_{v+1} = -2*eta.
//
// Every 1-D residue is an M-point trapezoid rule on a circle,
//
//   res_{t=c} g = (1/M) sum_k g(c + rho e^{2 pi i k/M}) rho e^{2 pi i k/M},
//
// which extracts the full Laurent coefficient a_{-1} exactly for poles of any
// order; no knowledge of the pole order is required.  Nested radii shrink
// strictly (factor 1/3 per level) so the moving pole contributed by the
// adjacent outer variable -- which circles at exactly the outer radius around
// the inner centre -- always stays outside the inner contour.
//
// res_tilde handles the coinciding-point functionals at z = w: label (k,m-k)
// pins t_1..t_k at z+a-2*eta*(k-1),...,z+a and t_{k+1}..t_m at
// z+a-2*eta*(m-k-1),...,z+a; for k < m the integrand carries the extra factor
// (t_m - z - a), and k = m is the plain staircase residue.
//
// res_resonance pins only the trailing ell+1 variables at u, u-2*eta, ...,
// u-2*eta*ell (t_m innermost at u) and returns a handle in the remaining
// m-ell-1 variables; it vanishes identically on the image of the quotient
// coupling when the corresponding weight is a nonnegative integer.

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "ellipq/model.hpp"
#include "ellipq/omega.hpp"

namespace ellipq {

// Contour quadrature parameters: requested circle radius (may be shrunk by
// the pole-safety planner) and number of trapezoid sample points.
struct ContourSpec {
  double radius = 1e-2;
  int points = 32;
};

using Func1 = std::function<cplx(cplx)>;
// Batch integrand: one point in C^m -> a vector of component values, so a
// whole family (e.g. all weight functions of fixed degree) shares one nested
// contour sweep.
using VFunc = std::function<std::vector<cplx>(const std::vector<cplx>&)>;

// Single contour residue of f at t0 with a built-in consistency check: the
// integral is evaluated on 2M nodes and compared against the M-node subset.
// Throws ContourError if a sample magnitude exceeds 1e12 * scale_hint (the
// contour grazes a pole) and AdaptivityFailure if the two estimates disagree
// beyond 1e-8 relative (floored at 1e-10 * scale_hint for regular points).
cplx residue_1d(const Func1& f, cplx t0, const ContourSpec& spec = {},
                double scale_hint = 1.0);

// Pin locations and per-variable contour radii for one composition staircase.
struct StaircasePlan {
  std::vector<cplx> pins;     // pins[v] for t_{v+1}, v = 0..m-1
  std::vector<double> radii;  // strictly decreasing inward
};

// Plans the staircase for comp against config's pole catalog (site staircases
// z_k + a_k - 2*eta*s and their +-2*eta shifts).  Each radius is capped by
// half the distance to the nearest foreign catalog point and by 1/3 of the
// enclosing level's radius.  Throws ContourError if no safe radius remains.
StaircasePlan plan_staircase(const ModelConfig& config, const Composition& comp,
                             const ContourSpec& spec);

// Iterated residue of f along the staircase of comp (comp.total() variables,
// t_m innermost).  comp must have config.n() parts.  Throws DepthLimit for
// more than four variables.  m = 0 returns f({}).
cplx res_iterated(const ModelConfig& config, const TFunc& f, const Composition& comp,
                  const ContourSpec& spec = {});

// Batch variant: f maps a point to `width` component values; returns the
// iterated residue of every component from a single nested sweep.
std::vector<cplx> res_iterated_vec(const ModelConfig& config, const VFunc& f,
                                   std::size_t width, const Composition& comp,
                                   const ContourSpec& spec = {});

// Coinciding-point functional (k, m-k) at a double point z (= w) with common
// weight offset a: k = m is the plain m-step staircase residue at z + a; for
// 0 <= k < m the integrand gains the factor (t_m - z - a) and both groups pin
// onto the same staircase.  lambda only labels error messages.
cplx res_tilde(const EllipticParams& params, const TFunc& f, int k, int m, cplx z,
               cplx a, cplx lambda, const ContourSpec& spec = {});

// Partial residue pinning the last ell+1 of m variables at u - 2*eta*s
// (s = 0 at t_m, innermost).  Returns a handle in the first m-ell-1
// variables; ell >= m yields the zero function.  The free arguments must stay
// clear of the pinned contours (checked per call).
TFunc res_resonance(const EllipticParams& params, const TFunc& f, int m, cplx u,
                    int ell, const ContourSpec& spec = {});

// Closed product form for the diagonal pairing value res_comp omega_comp:
//   prod_{i=1}^n prod_{j=1}^{m_i} theta(lambda - 2*eta*w_i + 2*eta*j)/theta'(0)
//   * prod_{l<k} prod_{j=1}^{m_k} theta(z_k+a_k-z_l+a_l-2*eta*(j-1)) /
//                                theta(z_k+a_k-z_l-a_l-2*eta*(j-1)),
// with w_i = sum_{l<i} (Lambda_l - 2 m_l).
cplx res_pairing_diagonal(const ModelConfig& config, const Composition& comp,
                          cplx lambda);

// Tail-sum dominance: the pairing res_{mcomp} omega_{jcomp} is forced to
// vanish unless m_l+...+m_n <= j_l+...+j_n for every l.
bool pairing_allowed(const Composition& functional, const Composition& label);

// Pairing of every degree-m residue functional against every degree-m weight
// function: entries(r, c) = res_{rows[r]} omega_{cols[c]}.
struct PairingMatrix {
  std::vector<Composition> rows;  // residue functionals
  std::vector<Composition> cols;  // weight-function labels
  Eigen::MatrixXcd entries;
};

// Builds the full pairing matrix at spectral parameter lambda; rows and cols
// are enumerate_compositions(n, m) in lexicographic order.  Row sweeps run in
// parallel, each integrating the batch of all weight functions at once.
PairingMatrix pairing_matrix(const OmegaEvaluator& ev, int m, cplx lambda,
                             const ContourSpec& spec = {});

}  // namespace ellipq
