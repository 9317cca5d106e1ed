#include "ellipq/rmatrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <utility>

#include <Eigen/LU>
#include <Eigen/SVD>

#include "ellipq/elliptic.hpp"
#include "ellipq/errors.hpp"
#include "ellipq/omega.hpp"
#include "ellipq/util.hpp"

namespace ellipq {
namespace {

// Two-site model with the second point at the origin; separation checks are
// waived because near-coincident blocks are exactly the interesting limit and
// the contour planner guards the actual geometry.
ModelConfig pair_config(const EllipticParams& par, cplx Lambda, cplx M, cplx zdiff,
                        int m) {
  ModelConfig cfg;
  cfg.elliptic = par;
  cfg.Lambda = {Lambda, M};
  cfg.z = {zdiff, cplx(0.0)};
  cfg.m = m;
  cfg.allow_coincident_z = true;
  return cfg;
}

ModelConfig swapped_pair_config(const EllipticParams& par, cplx Lambda, cplx M,
                                cplx zdiff, int m) {
  ModelConfig cfg;
  cfg.elliptic = par;
  cfg.Lambda = {M, Lambda};
  cfg.z = {cplx(0.0), zdiff};
  cfg.m = m;
  cfg.allow_coincident_z = true;
  return cfg;
}

double condition_number(const Eigen::MatrixXcd& mat) {
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(mat);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
  return sv(0) / smin;
}

WeightBlockMatrix solve_transition(const Eigen::MatrixXcd& B, const Eigen::MatrixXcd& Bt,
                                   int m) {
  const double cond = condition_number(B);
  if (!(cond < 1e10)) {
    throw SingularPairing("residue pairing matrix has condition number " +
                          std::to_string(cond));
  }
  WeightBlockMatrix out;
  out.m = m;
  out.row_index = enumerate_compositions(2, m);
  out.col_index = out.row_index;
  out.entries = B.partialPivLu().solve(Bt).transpose();
  out.pairing_condition = cond;
  return out;
}

void guard_theta(const ThetaEngine& eng, cplx arg, const char* what) {
  if (std::abs(eng.theta(arg)) < 1e-10 * eng.scale()) {
    throw PoleProximity(std::string(what) + " vanishes at the requested parameters");
  }
}

}  // namespace

int WeightBlockMatrix::find_row(const Composition& c) const {
  for (std::size_t i = 0; i < row_index.size(); ++i) {
    if (row_index[i] == c) return static_cast<int>(i);
  }
  throw ConfigError("label " + c.str() + " is not a row of this block");
}

int WeightBlockMatrix::find_col(const Composition& c) const {
  for (std::size_t i = 0; i < col_index.size(); ++i) {
    if (col_index[i] == c) return static_cast<int>(i);
  }
  throw ConfigError("label " + c.str() + " is not a column of this block");
}

WeightBlockMatrix rblock(const EllipticParams& par, cplx Lambda, cplx M, cplx zdiff,
                         cplx lambda, int m, RMethod method, const ContourSpec& spec) {
  par.validate();
  if (m < 0) throw ConfigError("the weight-block label m must be nonnegative");
  if (m == 0) {
    WeightBlockMatrix out;
    out.m = 0;
    out.row_index = {Composition{{0, 0}}};
    out.col_index = out.row_index;
    out.entries = Eigen::MatrixXcd::Ones(1, 1);
    out.pairing_condition = 1.0;
    return out;
  }

  if (method == RMethod::closed) {
    const ThetaEngine eng(par.tau);
    const cplx eta = par.eta;
    if (m == 1) {
      const cplx a = eta * Lambda;
      const cplx b = eta * M;
      guard_theta(eng, zdiff - a - b, "the separation denominator");
      guard_theta(eng, lambda + 2.0 * eta * (1.0 - Lambda), "the spectral denominator");
      const cplx den = eng.theta(zdiff - a - b) * eng.theta(lambda + 2.0 * eta * (1.0 - Lambda));
      WeightBlockMatrix out;
      out.m = 1;
      out.row_index = enumerate_compositions(2, 1);
      out.col_index = out.row_index;
      out.entries.resize(2, 2);
      // Rows/cols ordered (0,1), (1,0).
      out.entries(0, 0) = eng.theta(zdiff + a - b) * eng.theta(lambda + 2.0 * eta) / den;
      out.entries(0, 1) = -eng.theta(lambda + 2.0 * eta + zdiff - a - b) * eng.theta(2.0 * a) / den;
      out.entries(1, 0) = -eng.theta(lambda + 2.0 * eta - zdiff - a - b) * eng.theta(2.0 * b) / den;
      out.entries(1, 1) =
          eng.theta(zdiff + b - a) * eng.theta(lambda + 2.0 * eta * (1.0 - Lambda - M)) / den;
      return out;
    }
    const bool fundamental_weights =
        std::abs(Lambda - 1.0) < 1e-12 && std::abs(M - 1.0) < 1e-12;
    if (m == 2 && fundamental_weights) {
      // On the two-dimensional quotients the top block is one-dimensional and
      // the swapped basis function coincides with the direct one.
      WeightBlockMatrix out;
      out.m = 2;
      out.row_index = {Composition{{1, 1}}};
      out.col_index = out.row_index;
      out.entries = Eigen::MatrixXcd::Ones(1, 1);
      return out;
    }
    throw MethodUnavailable("closed block formulas exist only for m <= 1 or the m = 2 "
                            "quotient at unit weights");
  }

  const ThetaEngine eng(par.tau);
  if (eng.lattice_distance(zdiff) <= 1e-9) {
    throw SingularConfiguration("the two pole staircases coincide at this separation; "
                                "use the coinciding-point construction");
  }

  const ModelConfig direct = pair_config(par, Lambda, M, zdiff, m);
  const ModelConfig swapped = swapped_pair_config(par, Lambda, M, zdiff, m);
  const OmegaEvaluator dev(direct);
  const OmegaEvaluator sev(swapped);
  const auto dbatch = dev.batch_handle(m, lambda);
  const auto sbatch = sev.batch_handle(m, lambda);
  const std::size_t dim = static_cast<std::size_t>(m) + 1;
  const VFunc both = [&dbatch, &sbatch, dim](const std::vector<cplx>& t) {
    std::vector<cplx> vals = dbatch(t);
    const std::vector<cplx> sw = sbatch(t);
    vals.insert(vals.end(), sw.begin(), sw.end());
    if (vals.size() != 2 * dim) throw ConfigError("unexpected batch width");
    return vals;
  };

  Eigen::MatrixXcd B(dim, dim);
  Eigen::MatrixXcd Bt(dim, dim);
  const std::vector<Composition> comps = enumerate_compositions(2, m);
  parallel_for(dim, [&](std::size_t r) {
    const std::vector<cplx> row = res_iterated_vec(direct, both, 2 * dim, comps[r], spec);
    for (std::size_t c = 0; c < dim; ++c) {
      B(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c];
      // omega~ labelled (k,l) = (c, m-c) is the swapped-model function with
      // composition (l, k), stored at batch slot l = m - c.
      Bt(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          row[dim + (dim - 1 - c)];
    }
  });
  return solve_transition(B, Bt, m);
}

WeightBlockMatrix rblock_coincident(const EllipticParams& par, cplx Lambda, cplx lambda,
                                    int m, const ContourSpec& spec) {
  par.validate();
  if (m < 0) throw ConfigError("the weight-block label m must be nonnegative");
  if (m == 0) {
    WeightBlockMatrix out;
    out.m = 0;
    out.row_index = {Composition{{0, 0}}};
    out.col_index = out.row_index;
    out.entries = Eigen::MatrixXcd::Ones(1, 1);
    out.pairing_condition = 1.0;
    return out;
  }
  const ModelConfig cfg = pair_config(par, Lambda, Lambda, cplx(0.0), m);
  const OmegaEvaluator ev(cfg);
  const cplx a = par.eta * Lambda;
  const std::size_t dim = static_cast<std::size_t>(m) + 1;
  Eigen::MatrixXcd B(dim, dim);
  const std::vector<Composition> comps = enumerate_compositions(2, m);
  for (std::size_t k = 0; k < dim; ++k) {
    for (std::size_t c = 0; c < dim; ++c) {
      const TFunc f = ev.multi_handle(comps[c], lambda);
      B(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) =
          res_tilde(par, f, static_cast<int>(k), m, cplx(0.0), a, lambda, spec);
    }
  }
  // With coinciding points the swapped family is the same model with reversed
  // labels: column c of the swapped matrix is column m-c of B.
  Eigen::MatrixXcd Bt(dim, dim);
  for (std::size_t c = 0; c < dim; ++c) {
    Bt.col(static_cast<Eigen::Index>(c)) = B.col(static_cast<Eigen::Index>(dim - 1 - c));
  }
  return solve_transition(B, Bt, m);
}

Eigen::Matrix4cd fundamental_r(const EllipticParams& par, cplx zdiff, cplx lambda) {
  par.validate();
  const ThetaEngine eng(par.tau);
  const cplx two_eta = 2.0 * par.eta;
  guard_theta(eng, lambda, "the spectral denominator");
  guard_theta(eng, zdiff - two_eta, "the separation denominator");
  const auto alpha = [&](cplx z, cplx l) {
    return eng.theta(l + two_eta) * eng.theta(z) / (eng.theta(l) * eng.theta(z - two_eta));
  };
  const auto beta = [&](cplx z, cplx l) {
    return -eng.theta(l + z) * eng.theta(two_eta) / (eng.theta(l) * eng.theta(z - two_eta));
  };
  Eigen::Matrix4cd out = Eigen::Matrix4cd::Zero();
  out(0, 0) = 1.0;
  out(1, 1) = alpha(zdiff, lambda);
  out(1, 2) = beta(zdiff, lambda);
  out(2, 1) = beta(zdiff, -lambda);
  out(2, 2) = alpha(zdiff, -lambda);
  out(3, 3) = 1.0;
  return out;
}

EvaluationEntries r_one_lambda(const EllipticParams& par, cplx Lambda, cplx zdiff,
                               cplx lambda, int k) {
  par.validate();
  if (k < 0) throw ConfigError("the level k must be nonnegative");
  const ThetaEngine eng(par.tau);
  const cplx eta = par.eta;
  guard_theta(eng, zdiff - (Lambda + 1.0) * eta, "the separation denominator");
  guard_theta(eng, lambda, "the spectral denominator");
  const cplx zden = eng.theta(zdiff - (Lambda + 1.0) * eta);
  const cplx lden = eng.theta(lambda);
  const double kk = static_cast<double>(k);
  EvaluationEntries out;
  out.stay0 = eng.theta(zdiff - (Lambda + 1.0 - 2.0 * kk) * eta) / zden *
              eng.theta(lambda + 2.0 * kk * eta) / lden;
  out.raise = -eng.theta(lambda + zdiff - (Lambda - 1.0 - 2.0 * kk) * eta) / zden *
              eng.theta(2.0 * eta) / lden;
  out.lower = -eng.theta(lambda - zdiff - (Lambda + 1.0 - 2.0 * kk) * eta) / zden *
              eng.theta(2.0 * (Lambda + 1.0 - kk) * eta) / lden *
              eng.theta(2.0 * kk * eta) / eng.theta(2.0 * eta);
  out.stay1 = eng.theta(zdiff - (-Lambda + 1.0 + 2.0 * kk) * eta) / zden *
              eng.theta(lambda - 2.0 * (Lambda - kk) * eta) / lden;
  return out;
}

WeightBlockMatrix reduce_to_L(const WeightBlockMatrix& block, std::optional<int> cap1,
                              std::optional<int> cap2) {
  if (!cap1 && !cap2) {
    throw MethodUnavailable("quotient reduction needs at least one integer weight");
  }
  const auto kept_label = [&](const Composition& c) {
    if (cap1 && c[0] > *cap1) return false;
    if (cap2 && c[1] > *cap2) return false;
    return true;
  };
  std::vector<int> kept;
  std::vector<int> dropped;
  for (std::size_t i = 0; i < block.col_index.size(); ++i) {
    (kept_label(block.col_index[i]) ? kept : dropped).push_back(static_cast<int>(i));
  }
  const double scale = block.entries.size() > 0 ? block.entries.cwiseAbs().maxCoeff() : 1.0;
  for (int r : kept) {
    for (int c : dropped) {
      if (std::abs(block.entries(r, c)) > 1e-8 * scale) {
        throw InvarianceViolated("kept label " + block.row_index[static_cast<std::size_t>(r)].str() +
                                 " couples to deleted label " +
                                 block.col_index[static_cast<std::size_t>(c)].str());
      }
    }
  }
  WeightBlockMatrix out;
  out.m = block.m;
  out.pairing_condition = block.pairing_condition;
  out.entries.resize(static_cast<Eigen::Index>(kept.size()),
                     static_cast<Eigen::Index>(kept.size()));
  for (std::size_t r = 0; r < kept.size(); ++r) {
    out.row_index.push_back(block.row_index[static_cast<std::size_t>(kept[r])]);
    out.col_index.push_back(block.col_index[static_cast<std::size_t>(kept[r])]);
    for (std::size_t c = 0; c < kept.size(); ++c) {
      out.entries(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          block.entries(kept[r], kept[c]);
    }
  }
  return out;
}

Eigen::MatrixXcd flip_matrix(const std::vector<Composition>& rows,
                             const std::vector<Composition>& cols) {
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(rows.size()),
                                                static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      const Composition& a = rows[r];
      const Composition& b = cols[c];
      if (a.size() == 2 && b.size() == 2 && a[0] == b[1] && a[1] == b[0]) {
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = 1.0;
      }
    }
  }
  return out;
}

double unitarity_residual(const EllipticParams& par, cplx Lambda, cplx M, cplx zdiff,
                          cplx lambda, int m, const ContourSpec& spec) {
  const WeightBlockMatrix A = rblock(par, Lambda, M, zdiff, lambda, m, RMethod::residue, spec);
  const WeightBlockMatrix Bm =
      rblock(par, M, Lambda, -zdiff, lambda, m, RMethod::residue, spec);
  const Eigen::Index dim = A.entries.rows();
  // (R^(21))^{(kl)}_{(ij)} = R_{M,Lambda}^{(lk)}_{(ji)}: conjugate by the
  // label-reversal permutation.
  Eigen::MatrixXcd Q(dim, dim);
  for (Eigen::Index r = 0; r < dim; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) {
      Q(r, c) = Bm.entries(dim - 1 - r, dim - 1 - c);
    }
  }
  const Eigen::MatrixXcd prod = A.entries * Q;
  return (prod - Eigen::MatrixXcd::Identity(dim, dim)).cwiseAbs().maxCoeff();
}

namespace {

// One exchange factor acting on slots (s1, s2) of a three-factor block basis,
// with the spectral parameter optionally shifted by the weight of the
// remaining slot (lambda - 2 eta h at that slot, resolved per component).
Eigen::MatrixXcd assemble_pair_factor(const EllipticParams& par,
                                      const std::array<cplx, 3>& L,
                                      const std::vector<Composition>& basis, int s1,
                                      int s2, bool shift_by_spectator, cplx zdiff,
                                      cplx lambda, const ContourSpec& spec) {
  const int spectator = 3 - s1 - s2;
  const Eigen::Index dim = static_cast<Eigen::Index>(basis.size());
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim, dim);
  std::map<std::pair<int, int>, WeightBlockMatrix> cache;  // (drop, spectator part)
  for (Eigen::Index c = 0; c < dim; ++c) {
    const Composition& in = basis[static_cast<std::size_t>(c)];
    const int js = in[spectator];
    const int drop = in[s1] + in[s2];
    const std::pair<int, int> key{drop, shift_by_spectator ? js : -1};
    auto it = cache.find(key);
    if (it == cache.end()) {
      const cplx lam = shift_by_spectator
                           ? lambda - 2.0 * par.eta * (L[static_cast<std::size_t>(spectator)] -
                                                       2.0 * static_cast<double>(js))
                           : lambda;
      it = cache
               .emplace(key, rblock(par, L[static_cast<std::size_t>(s1)],
                                    L[static_cast<std::size_t>(s2)], zdiff, lam, drop,
                                    RMethod::residue, spec))
               .first;
    }
    const WeightBlockMatrix& blk = it->second;
    for (Eigen::Index r = 0; r < dim; ++r) {
      const Composition& outc = basis[static_cast<std::size_t>(r)];
      if (outc[spectator] != js) continue;
      const int br = blk.find_row(Composition{{outc[s1], outc[s2]}});
      const int bc = blk.find_col(Composition{{in[s1], in[s2]}});
      out(r, c) = blk.entries(br, bc);
    }
  }
  return out;
}

}  // namespace

double dybe_residual(const EllipticParams& par, const std::array<cplx, 3>& Lambda,
                     cplx z, cplx w, cplx lambda, int m, const ContourSpec& spec) {
  const std::vector<Composition> basis = enumerate_compositions(3, m);
  const auto factor = [&](int s1, int s2, bool shifted, cplx zd, cplx lam) {
    return assemble_pair_factor(par, Lambda, basis, s1, s2, shifted, zd, lam, spec);
  };
  const Eigen::MatrixXcd lhs = factor(0, 1, true, z, lambda) *
                               factor(0, 2, false, z + w, lambda) *
                               factor(1, 2, true, w, lambda);
  const Eigen::MatrixXcd rhs = factor(1, 2, false, w, lambda) *
                               factor(0, 2, true, z + w, lambda) *
                               factor(0, 1, false, z, lambda);
  return (lhs - rhs).cwiseAbs().maxCoeff();
}

double transition_identity_residual(const EllipticParams& par, cplx Lambda, cplx M,
                                    cplx zdiff, cplx lambda, int m, int samples,
                                    unsigned long long seed, const ContourSpec& spec) {
  const WeightBlockMatrix blk = rblock(par, Lambda, M, zdiff, lambda, m, RMethod::residue, spec);
  const OmegaEvaluator dev(pair_config(par, Lambda, M, zdiff, m));
  const OmegaEvaluator sev(swapped_pair_config(par, Lambda, M, zdiff, m));
  const auto dbatch = dev.batch_handle(m, lambda);
  const auto sbatch = sev.batch_handle(m, lambda);
  const std::size_t dim = static_cast<std::size_t>(m) + 1;
  Rng rng(seed);
  double worst = 0.0;
  for (int s = 0; s < samples; ++s) {
    const std::vector<cplx> t = dev.sample_point(static_cast<std::size_t>(m), rng);
    const std::vector<cplx> direct = dbatch(t);
    const std::vector<cplx> swapped = sbatch(t);
    double scale = 0.0;
    for (const cplx& v : direct) scale = std::max(scale, std::abs(v));
    for (const cplx& v : swapped) scale = std::max(scale, std::abs(v));
    for (std::size_t k = 0; k < dim; ++k) {
      // omega~ labelled (k, m-k) is the swapped-model batch slot m-k.
      cplx expand(0.0);
      for (std::size_t c = 0; c < dim; ++c) {
        expand += blk.entries(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(c)) *
                  direct[c];
      }
      const double dev_abs = std::abs(swapped[dim - 1 - k] - expand);
      worst = std::max(worst, dev_abs / std::max(scale, 1e-300));
    }
  }
  return worst;
}

double sign_reversal_residual(const EllipticParams& par, cplx Lambda, cplx M,
                              cplx zdiff, cplx lambda, int m, const ContourSpec& spec) {
  const WeightBlockMatrix plus =
      rblock(par, Lambda, M, zdiff, lambda, m, RMethod::residue, spec);
  EllipticParams reversed = par;
  reversed.eta = -par.eta;
  const WeightBlockMatrix minus =
      rblock(reversed, Lambda, M, -zdiff, -lambda, m, RMethod::residue, spec);
  return (plus.entries - minus.entries).cwiseAbs().maxCoeff();
}

ZLimitReport z_limit_report(const EllipticParams& par, cplx Lambda, cplx lambda, int m,
                            cplx delta, const ContourSpec& spec) {
  ZLimitReport rep;
  const WeightBlockMatrix near =
      rblock(par, Lambda, Lambda, delta, lambda, m, RMethod::residue, spec);
  const Eigen::MatrixXcd P = flip_matrix(near.row_index, near.col_index);
  rep.near_deviation = (near.entries - P).cwiseAbs().maxCoeff();
  const WeightBlockMatrix ref = rblock_coincident(par, Lambda, lambda, m, spec);
  rep.reference_deviation = (ref.entries - P).cwiseAbs().maxCoeff();
  return rep;
}

RBlockCache::RBlockCache(EllipticParams par, ContourSpec spec)
    : par_(std::move(par)), spec_(spec) {
  par_.validate();
}

WeightBlockMatrix RBlockCache::get(cplx Lambda, cplx M, cplx zdiff, cplx lambda, int m) {
  char key[256];
  std::snprintf(key, sizeof(key), "%.17g_%.17g|%.17g_%.17g|%.17g_%.17g|%.17g_%.17g|%d",
                Lambda.real(), Lambda.imag(), M.real(), M.imag(), zdiff.real(),
                zdiff.imag(), lambda.real(), lambda.imag(), m);
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = store_.find(key);
    if (it != store_.end()) return it->second;
  }
  WeightBlockMatrix blk = rblock(par_, Lambda, M, zdiff, lambda, m, RMethod::residue, spec_);
  std::lock_guard<std::mutex> lock(mu_);
  return store_.emplace(key, std::move(blk)).first->second;
}

std::size_t RBlockCache::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return store_.size();
}

}  // namespace ellipq
