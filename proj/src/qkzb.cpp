#include "ellipq/qkzb.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "ellipq/elliptic.hpp"
#include "ellipq/errors.hpp"
#include "ellipq/util.hpp"

namespace ellipq {

namespace {

cplx step_of(const ModelConfig& cfg) {
  if (!cfg.elliptic.p.has_value()) {
    throw ConfigError("the lattice-sum machinery needs the step p");
  }
  return *cfg.elliptic.p;
}

// One-variable phase evaluators shared by every factor of the product: one
// per site parameter a_l plus the pair parameter -2 eta.  They depend on z
// only through their argument, so one set serves every z tuple.
struct PhaseSet {
  std::vector<PhaseEvaluator> site;
  std::vector<PhaseEvaluator> pair;  // single entry, parameter -2 eta
};

PhaseSet make_phase_set(const ModelConfig& cfg) {
  PhaseSet set;
  set.site.reserve(static_cast<std::size_t>(cfg.n()));
  for (int l = 0; l < cfg.n(); ++l) {
    set.site.emplace_back(cfg.elliptic, cfg.a(l));
  }
  set.pair.emplace_back(cfg.elliptic, -2.0 * cfg.eta());
  return set;
}

cplx phase_from_set(const PhaseSet& set, const std::vector<cplx>& t,
                    const std::vector<cplx>& z) {
  cplx out{1.0, 0.0};
  for (const cplx& tj : t) {
    for (std::size_t l = 0; l < z.size(); ++l) {
      out *= set.site[l].phi(tj - z[l]);
    }
  }
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t j = i + 1; j < t.size(); ++j) {
      out *= set.pair.front().phi(t[i] - t[j]);
    }
  }
  return out;
}

void require_sites(const ModelConfig& cfg, const std::vector<cplx>& z) {
  if (static_cast<int>(z.size()) != cfg.n()) {
    throw ConfigError("point tuple must have one entry per site");
  }
}

void require_degree(const ModelConfig& cfg, const std::vector<cplx>& t) {
  if (static_cast<int>(t.size()) != cfg.m) {
    throw ConfigError("variable tuple must match the configured drop");
  }
}

// psi^xi coefficients from a prebuilt evaluator whose config carries z.
Eigen::VectorXcd psi_from(const JacksonIntegrand& J, const OmegaEvaluator& ev,
                          const std::vector<Composition>& basis,
                          const std::vector<cplx>& t, const std::vector<cplx>& z,
                          cplx lambda) {
  const cplx front = J.xi(xi_argument(J, t, z, lambda));
  const OmegaPoint point{t, lambda};
  Eigen::VectorXcd out(static_cast<Eigen::Index>(basis.size()));
  for (std::size_t r = 0; r < basis.size(); ++r) {
    out(static_cast<Eigen::Index>(r)) = front * ev.multi(basis[r], point);
  }
  return out;
}

}  // namespace

JacksonIntegrand make_integrand(ModelConfig config, XiFunc xi) {
  config.validate();
  const cplx p = step_of(config);
  if (!(p.imag() > 0.0)) {
    throw ConfigError("phase products converge only for Im p > 0");
  }
  JacksonIntegrand J;
  J.config = std::move(config);
  J.xi = xi ? std::move(xi) : XiFunc([](cplx) { return cplx{1.0, 0.0}; });
  return J;
}

cplx phase_eval(const JacksonIntegrand& J, const std::vector<cplx>& t,
                const std::vector<cplx>& z) {
  require_sites(J.config, z);
  const PhaseSet set = make_phase_set(J.config);
  return phase_from_set(set, t, z);
}

cplx xi_argument(const JacksonIntegrand& J, const std::vector<cplx>& t,
                 const std::vector<cplx>& z, cplx lambda) {
  require_sites(J.config, z);
  const cplx p = step_of(J.config);
  cplx arg = p * lambda;
  for (int l = 0; l < J.config.n(); ++l) {
    arg -= 2.0 * J.config.a(l) * z[static_cast<std::size_t>(l)];
  }
  for (const cplx& tj : t) arg += 4.0 * J.config.eta() * tj;
  return arg;
}

Eigen::VectorXcd psi_xi(const JacksonIntegrand& J, const std::vector<cplx>& t,
                        const std::vector<cplx>& z, cplx lambda) {
  require_sites(J.config, z);
  require_degree(J.config, t);
  if (!J.config.zero_weight_consistent()) {
    throw ConfigError("integrand coefficients need sum Lambda = 2 m");
  }
  ModelConfig at = J.config;
  at.z = z;
  const OmegaEvaluator ev(at);
  return psi_from(J, ev, zero_weight_basis(at), t, z, lambda);
}

Eigen::VectorXcd integrand_eval(const JacksonIntegrand& J,
                                const std::vector<cplx>& t,
                                const std::vector<cplx>& z, cplx lambda) {
  return phase_eval(J, t, z) * psi_xi(J, t, z, lambda);
}

double verify_phase_shift(const JacksonIntegrand& J, const std::vector<cplx>& t,
                          const std::vector<cplx>& z, int j) {
  require_sites(J.config, z);
  if (j < 1 || j > J.config.n()) {
    throw ConfigError("site index out of range");
  }
  const cplx p = step_of(J.config);
  const ThetaEngine engine(J.config.elliptic);
  const cplx zj = z[static_cast<std::size_t>(j - 1)];
  const cplx aj = J.config.a(j - 1);

  std::vector<cplx> shifted = z;
  shifted[static_cast<std::size_t>(j - 1)] += p;

  cplx rho{1.0, 0.0};
  for (const cplx& ti : t) {
    rho *= engine.theta(ti - zj - aj - p) / engine.theta(ti - zj + aj - p);
  }
  return rel_dev(phase_eval(J, t, shifted), rho * phase_eval(J, t, z));
}

double verify_q_product(const JacksonIntegrand& J, const TFunc& h, int mprime,
                        const std::vector<cplx>& t) {
  const ModelConfig& cfg = J.config;
  const int m = static_cast<int>(t.size());
  if (mprime < 0 || mprime > m) {
    throw ConfigError("translated prefix must fit inside the variable tuple");
  }
  const cplx p = step_of(cfg);
  const ThetaEngine engine(cfg.elliptic);
  const cplx two_eta = 2.0 * cfg.eta();

  // (Q_i f)(t) = f(.., t_i + p, ..) phi_i(t): site ratios at t_i, untranslated
  // partners ahead of i at +-2 eta, already-translated partners behind i at
  // +-2 eta shifted by p.
  auto phi_i = [&](const std::vector<cplx>& tt, int i) -> cplx {
    const cplx ti = tt[static_cast<std::size_t>(i - 1)];
    cplx out{1.0, 0.0};
    for (int l = 0; l < cfg.n(); ++l) {
      const cplx base = ti - cfg.z[static_cast<std::size_t>(l)];
      out *= engine.theta(base + cfg.a(l)) / engine.theta(base - cfg.a(l));
    }
    for (int k = 1; k <= m; ++k) {
      if (k == i) continue;
      const cplx diff = ti - tt[static_cast<std::size_t>(k - 1)];
      if (k > i) {
        out *= engine.theta(diff - two_eta) / engine.theta(diff + two_eta);
      } else {
        out *= engine.theta(diff - two_eta + p) / engine.theta(diff + two_eta + p);
      }
    }
    return out;
  };

  TFunc acc = h;
  for (int i = mprime; i >= 1; --i) {
    const TFunc prev = acc;
    acc = [prev, i, p, &phi_i](const std::vector<cplx>& tt) -> cplx {
      std::vector<cplx> moved = tt;
      moved[static_cast<std::size_t>(i - 1)] += p;
      return prev(moved) * phi_i(tt, i);
    };
  }
  const cplx lhs = acc(t);

  std::vector<cplx> moved = t;
  for (int i = 0; i < mprime; ++i) moved[static_cast<std::size_t>(i)] += p;
  cplx closed{1.0, 0.0};
  for (int jj = 1; jj <= mprime; ++jj) {
    const cplx tj = t[static_cast<std::size_t>(jj - 1)];
    for (int l = 0; l < cfg.n(); ++l) {
      const cplx base = tj - cfg.z[static_cast<std::size_t>(l)];
      closed *= engine.theta(base + cfg.a(l)) / engine.theta(base - cfg.a(l));
    }
    for (int k = mprime + 1; k <= m; ++k) {
      const cplx diff = tj - t[static_cast<std::size_t>(k - 1)];
      closed *= engine.theta(diff - two_eta) / engine.theta(diff + two_eta);
    }
  }
  return rel_dev(lhs, h(moved) * closed);
}

double xi_shift_residual(const JacksonIntegrand& J, const std::vector<cplx>& t,
                         const std::vector<cplx>& z, cplx lambda, int mprime) {
  require_sites(J.config, z);
  if (mprime < 0 || mprime > static_cast<int>(t.size())) {
    throw ConfigError("translated prefix must fit inside the variable tuple");
  }
  const cplx p = step_of(J.config);

  std::vector<cplx> z_moved = z;
  z_moved.front() += p;
  std::vector<cplx> t_moved = t;
  for (int i = 0; i < mprime; ++i) t_moved[static_cast<std::size_t>(i)] += p;
  const cplx direct = xi_argument(J, t_moved, z_moved, lambda);

  const cplx mu = J.config.Lambda.front() - 2.0 * static_cast<double>(mprime);
  const cplx via_lambda =
      xi_argument(J, t, z, lambda - 2.0 * J.config.eta() * mu);

  double worst = rel_dev(direct, via_lambda);
  worst = std::max(worst, rel_dev(J.xi(direct), J.xi(via_lambda)));
  return worst;
}

JacksonReport jackson_sum_diagnostic(RBlockCache& cache, const JacksonIntegrand& J,
                                     const std::vector<cplx>& t0, int j, int K,
                                     cplx lambda) {
  const ModelConfig& cfg = J.config;
  cfg.validate();
  const cplx p = step_of(cfg);
  if (!(p.imag() > 0.0)) {
    throw ConfigError("phase products converge only for Im p > 0");
  }
  if (K < 0 || K > 6) {
    throw ConfigError("truncation level must lie in 0..6");
  }
  if (j < 1 || j > cfg.n()) {
    throw ConfigError("site index out of range");
  }
  require_degree(cfg, t0);
  if (!cfg.zero_weight_consistent()) {
    throw ConfigError("integrand coefficients need sum Lambda = 2 m");
  }

  const int m = cfg.m;
  const ModelConfig shifted_cfg = cfg.shifted_z(j - 1, p);
  const OmegaEvaluator ev_base(cfg);
  const OmegaEvaluator ev_shift(shifted_cfg);
  const std::vector<Composition> basis = zero_weight_basis(cfg);
  const Eigen::Index dim = static_cast<Eigen::Index>(basis.size());
  const PhaseSet phases = make_phase_set(cfg);

  const ShiftOperator Kop = build_K(cache, cfg, j);
  std::vector<int> svals;
  std::vector<Eigen::MatrixXcd> smats;
  for (const auto& [s, fn] : Kop.terms) {
    svals.push_back(s);
    smats.push_back(Kop.term(s, lambda));
  }

  // Lattice offsets in fixed lexicographic order, tagged with their level.
  std::vector<std::vector<int>> alphas;
  {
    std::vector<int> alpha(static_cast<std::size_t>(m), -K);
    if (m == 0) {
      alphas.push_back({});
    } else {
      while (true) {
        alphas.push_back(alpha);
        int pos = m - 1;
        while (pos >= 0 && alpha[static_cast<std::size_t>(pos)] == K) {
          alpha[static_cast<std::size_t>(pos)] = -K;
          --pos;
        }
        if (pos < 0) break;
        ++alpha[static_cast<std::size_t>(pos)];
      }
    }
  }
  const std::size_t count = alphas.size();
  std::vector<int> level(count, 0);
  for (std::size_t idx = 0; idx < count; ++idx) {
    int lvl = 0;
    for (int v : alphas[idx]) lvl = std::max(lvl, std::abs(v));
    level[idx] = lvl;
  }

  // Per-point contributions: the shifted-z side at lambda, the base side at
  // every lambda the connection terms request, and the base side at lambda
  // itself for the reported norm.
  struct PointVals {
    bool ok = false;
    Eigen::VectorXcd lhs;
    Eigen::VectorXcd norm_side;
    std::vector<Eigen::VectorXcd> rhs;
  };
  std::vector<PointVals> vals(count);
  parallel_for(count, [&](std::size_t idx) {
    std::vector<cplx> t = t0;
    for (int i = 0; i < m; ++i) {
      t[static_cast<std::size_t>(i)] +=
          p * static_cast<double>(alphas[idx][static_cast<std::size_t>(i)]);
    }
    PointVals pv;
    try {
      pv.lhs = phase_from_set(phases, t, shifted_cfg.z) *
               psi_from(J, ev_shift, basis, t, shifted_cfg.z, lambda);
      const cplx base_phase = phase_from_set(phases, t, cfg.z);
      pv.norm_side = base_phase * psi_from(J, ev_base, basis, t, cfg.z, lambda);
      pv.rhs.reserve(svals.size());
      for (int s : svals) {
        pv.rhs.push_back(base_phase *
                         psi_from(J, ev_base, basis, t, cfg.z,
                                  lambda - 2.0 * cfg.eta() * static_cast<double>(s)));
      }
      pv.ok = true;
    } catch (const PoleProximity&) {
      pv.ok = false;
    }
    vals[idx] = std::move(pv);
  });

  JacksonReport report;
  for (std::size_t idx = 0; idx < count; ++idx) {
    if (!vals[idx].ok) ++report.skipped;
  }
  for (int k = 0; k <= K; ++k) {
    Eigen::VectorXcd lhs = Eigen::VectorXcd::Zero(dim);
    Eigen::VectorXcd norm_side = Eigen::VectorXcd::Zero(dim);
    std::vector<Eigen::VectorXcd> rhs_parts(
        svals.size(), Eigen::VectorXcd::Zero(dim));
    for (std::size_t idx = 0; idx < count; ++idx) {
      if (level[idx] > k || !vals[idx].ok) continue;
      lhs += vals[idx].lhs;
      norm_side += vals[idx].norm_side;
      for (std::size_t si = 0; si < svals.size(); ++si) {
        rhs_parts[si] += vals[idx].rhs[si];
      }
    }
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(dim);
    for (std::size_t si = 0; si < svals.size(); ++si) {
      rhs += smats[si] * rhs_parts[si];
    }
    const double scale = std::max(
        {lhs.cwiseAbs().maxCoeff(), rhs.cwiseAbs().maxCoeff(), 1e-300});
    report.levels.push_back(k);
    report.residuals.push_back((lhs - rhs).cwiseAbs().maxCoeff() / scale);
    report.psi_norms.push_back(norm_side.cwiseAbs().maxCoeff());
  }
  report.monotone = report.residuals.size() > 1;
  for (std::size_t k = 0; k + 1 < report.residuals.size(); ++k) {
    if (!(report.residuals[k + 1] < report.residuals[k])) {
      report.monotone = false;
      break;
    }
  }
  return report;
}

}  // namespace ellipq
