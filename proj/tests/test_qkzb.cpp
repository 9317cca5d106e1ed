#include "ellipq/qkzb.hpp"

#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "ellipq/bethe.hpp"
#include "ellipq/diffop.hpp"
#include "ellipq/elliptic.hpp"
#include "ellipq/errors.hpp"
#include "ellipq/omega.hpp"
#include "ellipq/util.hpp"

namespace ellipq {
namespace {

EllipticParams base_params() {
  EllipticParams par;
  par.tau = cplx(0.0, 0.85);
  par.eta = cplx(0.21, 0.03);
  return par;
}

// Zero-weight two-site chain used by the lattice-sum diagnostic.
ModelConfig pair_config() {
  ModelConfig cfg;
  cfg.elliptic = base_params();
  cfg.elliptic.p = cplx(0.0, 0.31);
  cfg.Lambda = {cplx(1.0), cplx(1.0)};
  cfg.z = {cplx(0.41, 0.13), cplx(-0.17, 0.29)};
  cfg.m = 1;
  cfg.truncation = {1, 1};
  return cfg;
}

// Generic weights (no zero-weight constraint) for the pure shift identities.
ModelConfig generic_config(cplx L1, cplx L2, int m) {
  ModelConfig cfg;
  cfg.elliptic = base_params();
  cfg.elliptic.p = cplx(0.0, 0.31);
  cfg.Lambda = {L1, L2};
  cfg.z = {cplx(0.41, 0.13), cplx(-0.17, 0.29)};
  cfg.m = m;
  return cfg;
}

// For one root the equation fixes e^{-4 eta c} as an explicit product, so a
// generic root plus the matching c is an exact solution by construction.
cplx derive_c(const ModelConfig& cfg, cplx t) {
  const ThetaEngine engine(cfg.elliptic);
  cplx prod(1.0, 0.0);
  for (int l = 0; l < cfg.n(); ++l) {
    const cplx base = t - cfg.z[static_cast<std::size_t>(l)];
    prod *= engine.theta(base + cfg.a(l)) / engine.theta(base - cfg.a(l));
  }
  return -std::log(prod) / (4.0 * cfg.eta());
}

}  // namespace

TEST_CASE("the integrand factors into the phase and the coefficient vector") {
  ModelConfig cfg = pair_config();
  const JacksonIntegrand J = make_integrand(cfg);
  const std::vector<cplx> t{cplx(0.23, 0.19)};
  const cplx lambda(0.11, 0.21);

  SUBCASE("one-variable phase is the product of per-site factors") {
    const PhaseEvaluator f0(cfg.elliptic, cfg.a(0));
    const PhaseEvaluator f1(cfg.elliptic, cfg.a(1));
    const cplx direct = f0.phi(t[0] - cfg.z[0]) * f1.phi(t[0] - cfg.z[1]);
    CHECK(rel_dev(phase_eval(J, t, cfg.z), direct) < 1e-12);
  }

  SUBCASE("two-variable phase picks up the pair factor") {
    ModelConfig two = generic_config(cplx(1.1), cplx(0.7), 2);
    const JacksonIntegrand J2 = make_integrand(two);
    const std::vector<cplx> tt{cplx(0.23, 0.19), cplx(-0.31, 0.08)};
    const PhaseEvaluator f0(two.elliptic, two.a(0));
    const PhaseEvaluator f1(two.elliptic, two.a(1));
    const PhaseEvaluator pair(two.elliptic, -2.0 * two.eta());
    cplx direct(1.0, 0.0);
    for (const cplx& v : tt) direct *= f0.phi(v - two.z[0]) * f1.phi(v - two.z[1]);
    direct *= pair.phi(tt[0] - tt[1]);
    CHECK(rel_dev(phase_eval(J2, tt, two.z), direct) < 1e-12);
  }

  SUBCASE("coefficients are the free factor times the weight functions") {
    const XiFunc xi = [](cplx x) { return std::exp(cplx(0.0, 0.37) * x); };
    const JacksonIntegrand Jxi = make_integrand(cfg, xi);
    const OmegaEvaluator ev(cfg);
    const std::vector<Composition> basis = zero_weight_basis(cfg);
    const Eigen::VectorXcd coeff = psi_xi(Jxi, t, cfg.z, lambda);
    REQUIRE(coeff.size() == static_cast<Eigen::Index>(basis.size()));
    const cplx front = xi(xi_argument(Jxi, t, cfg.z, lambda));
    for (std::size_t r = 0; r < basis.size(); ++r) {
      const cplx expect = front * ev.multi(basis[r], OmegaPoint{t, lambda});
      CHECK(rel_dev(coeff(static_cast<Eigen::Index>(r)), expect) < 1e-12);
    }
    const Eigen::VectorXcd full = integrand_eval(Jxi, t, cfg.z, lambda);
    const cplx phase = phase_eval(Jxi, t, cfg.z);
    for (Eigen::Index r = 0; r < full.size(); ++r) {
      CHECK(rel_dev(full(r), phase * coeff(r)) < 1e-13);
    }
  }

  SUBCASE("swapping the free factor rescales by its value at the argument") {
    const XiFunc xi = [](cplx x) { return std::exp(cplx(0.0, 0.37) * x); };
    const JacksonIntegrand Jxi = make_integrand(cfg, xi);
    const Eigen::VectorXcd with = psi_xi(Jxi, t, cfg.z, lambda);
    const Eigen::VectorXcd flat = psi_xi(J, t, cfg.z, lambda);
    const cplx factor = xi(xi_argument(J, t, cfg.z, lambda));
    for (Eigen::Index r = 0; r < with.size(); ++r) {
      CHECK(rel_dev(with(r), factor * flat(r)) < 1e-12);
    }
  }

  SUBCASE("empty variable tuple gives the constant integrand") {
    ModelConfig cfg0;
    cfg0.elliptic = base_params();
    cfg0.elliptic.p = cplx(0.0, 0.31);
    cfg0.Lambda = {cplx(0.0)};
    cfg0.z = {cplx(0.13, -0.07)};
    cfg0.m = 0;
    const JacksonIntegrand J0 = make_integrand(cfg0);
    const std::vector<cplx> none;
    CHECK(rel_dev(phase_eval(J0, none, cfg0.z), cplx(1.0)) < 1e-13);
    const Eigen::VectorXcd out = integrand_eval(J0, none, cfg0.z, lambda);
    REQUIRE(out.size() == 1);
    CHECK(rel_dev(out(0), cplx(1.0)) < 1e-13);
  }

  SUBCASE("configs without a usable step are rejected") {
    ModelConfig bad = pair_config();
    bad.elliptic.p.reset();
    CHECK_THROWS_AS(make_integrand(bad), ConfigError);
    bad.elliptic.p = cplx(0.2, 0.0);
    CHECK_THROWS_AS(make_integrand(bad), ConfigError);
    ModelConfig unbal = generic_config(cplx(1.3), cplx(0.5), 1);
    const JacksonIntegrand Ju = make_integrand(unbal);
    CHECK_THROWS_AS(psi_xi(Ju, t, unbal.z, lambda), ConfigError);
    CHECK_THROWS_AS(psi_xi(J, std::vector<cplx>{}, cfg.z, lambda), ConfigError);
    CHECK_THROWS_AS(phase_eval(J, t, std::vector<cplx>{cplx(0.1)}), ConfigError);
  }
}

TEST_CASE("shifting one site multiplies the phase by the theta ratio") {
  SUBCASE("single site, single variable") {
    ModelConfig cfg;
    cfg.elliptic = base_params();
    cfg.elliptic.p = cplx(0.0, 0.31);
    cfg.Lambda = {cplx(2.0)};
    cfg.z = {cplx(0.13, -0.07)};
    cfg.m = 1;
    const JacksonIntegrand J = make_integrand(cfg);
    CHECK(verify_phase_shift(J, {cplx(0.23, 0.19)}, cfg.z, 1) < 1e-10);
  }

  SUBCASE("two sites, two variables, both directions") {
    ModelConfig cfg = generic_config(cplx(1.3), cplx(0.7), 2);
    const JacksonIntegrand J = make_integrand(cfg);
    const std::vector<cplx> t{cplx(0.23, 0.19), cplx(-0.31, 0.08)};
    CHECK(verify_phase_shift(J, t, cfg.z, 1) < 1e-10);
    CHECK(verify_phase_shift(J, t, cfg.z, 2) < 1e-10);
  }

  SUBCASE("a decoupled site leaves the phase unchanged") {
    ModelConfig cfg = generic_config(cplx(1.4), cplx(0.0), 1);
    const JacksonIntegrand J = make_integrand(cfg);
    const std::vector<cplx> t{cplx(0.23, 0.19)};
    std::vector<cplx> moved = cfg.z;
    moved[1] += *cfg.elliptic.p;
    CHECK(rel_dev(phase_eval(J, t, moved), phase_eval(J, t, cfg.z)) < 1e-12);
    CHECK(verify_phase_shift(J, t, cfg.z, 2) < 1e-12);
  }

  SUBCASE("site index bounds") {
    const JacksonIntegrand J = make_integrand(pair_config());
    const std::vector<cplx> t{cplx(0.23, 0.19)};
    CHECK_THROWS_AS(verify_phase_shift(J, t, J.config.z, 0), ConfigError);
    CHECK_THROWS_AS(verify_phase_shift(J, t, J.config.z, 3), ConfigError);
  }
}

TEST_CASE("the translation product telescopes to the closed form") {
  ModelConfig cfg = generic_config(cplx(1.2), cplx(0.8), 2);
  const JacksonIntegrand J = make_integrand(cfg);
  const std::vector<cplx> t{cplx(0.23, 0.19), cplx(-0.31, 0.08)};
  const cplx lambda(0.11, 0.21);
  const OmegaEvaluator ev(cfg);
  const TFunc weight = ev.multi_handle(Composition({1, 1}), lambda);
  const ThetaEngine engine(cfg.elliptic);
  const TFunc plain = [&engine](const std::vector<cplx>& tt) {
    return engine.theta(tt[0] - cplx(0.1)) * std::exp(kTwoPi * kI * tt[1]);
  };

  SUBCASE("empty prefix is exact") {
    CHECK(verify_q_product(J, weight, 0, t) == 0.0);
  }

  SUBCASE("partial and full prefixes agree with the product") {
    CHECK(verify_q_product(J, weight, 1, t) < 1e-9);
    CHECK(verify_q_product(J, weight, 2, t) < 1e-9);
    CHECK(verify_q_product(J, plain, 1, t) < 1e-9);
    CHECK(verify_q_product(J, plain, 2, t) < 1e-9);
  }

  SUBCASE("prefix length bounds") {
    CHECK_THROWS_AS(verify_q_product(J, plain, 3, t), ConfigError);
    CHECK_THROWS_AS(verify_q_product(J, plain, -1, t), ConfigError);
  }
}

TEST_CASE("the free-factor argument respects the weight-shift bookkeeping") {
  ModelConfig cfg = generic_config(cplx(1.2), cplx(0.8), 2);
  const XiFunc xi = [](cplx x) { return std::exp(cplx(0.1, 0.4) * x); };
  const JacksonIntegrand J = make_integrand(cfg, xi);
  const std::vector<cplx> t{cplx(0.23, 0.19), cplx(-0.31, 0.08)};
  const cplx lambda(0.11, 0.21);
  for (int mprime = 0; mprime <= 2; ++mprime) {
    CAPTURE(mprime);
    CHECK(xi_shift_residual(J, t, cfg.z, lambda, mprime) < 1e-10);
  }
  CHECK_THROWS_AS(xi_shift_residual(J, t, cfg.z, lambda, 3), ConfigError);
}

TEST_CASE("the truncated lattice sums report the difference-equation defect") {
  ModelConfig cfg = pair_config();
  const JacksonIntegrand J = make_integrand(cfg);
  RBlockCache cache(cfg.elliptic);
  const std::vector<cplx> t0{cplx(0.06, 0.02)};
  const cplx lambda(0.23, 0.17);
  const int j = 2;

  SUBCASE("report structure and base level") {
    const JacksonReport rep = jackson_sum_diagnostic(cache, J, t0, j, 4, lambda);
    REQUIRE(rep.levels.size() == 5);
    REQUIRE(rep.residuals.size() == 5);
    REQUIRE(rep.psi_norms.size() == 5);
    for (int k = 0; k <= 4; ++k) CHECK(rep.levels[static_cast<std::size_t>(k)] == k);
    CHECK(rep.skipped == 0);
    for (double v : rep.psi_norms) CHECK(v > 0.0);

    // Level zero is the single-point defect of the difference equation.
    const ShiftOperator Kop = build_K(cache, cfg, j);
    const ModelConfig shifted = cfg.shifted_z(j - 1, *cfg.elliptic.p);
    const Eigen::VectorXcd lhs = integrand_eval(J, t0, shifted.z, lambda);
    Eigen::VectorXcd rhs = Eigen::VectorXcd::Zero(lhs.size());
    for (const auto& [s, fn] : Kop.terms) {
      rhs += Kop.term(s, lambda) *
             integrand_eval(J, t0, cfg.z,
                            lambda - 2.0 * cfg.eta() * static_cast<double>(s));
    }
    const double scale = std::max(
        {lhs.cwiseAbs().maxCoeff(), rhs.cwiseAbs().maxCoeff(), 1e-300});
    const double direct = (lhs - rhs).cwiseAbs().maxCoeff() / scale;
    CHECK(std::abs(direct - rep.residuals[0]) <=
          1e-12 * std::max(1.0, std::abs(direct)));
  }

  SUBCASE("a damped free factor certifies the difference equation") {
    // exp(gamma x^2) decays along the summation lattice here because
    // Re(gamma (4 eta p)^2) < 0, so the truncated sums converge and the
    // telescoping defect dies at the edge.
    const XiFunc damp = [](cplx x) { return std::exp(32.0 * x * x); };
    const JacksonIntegrand Jg = make_integrand(cfg, damp);
    const JacksonReport rep = jackson_sum_diagnostic(cache, Jg, t0, j, 4, lambda);
    CHECK(rep.skipped == 0);
    CHECK(rep.monotone);
    CHECK(rep.residuals.front() > 1e-2);  // a single point never satisfies it
    CHECK(rep.residuals.back() < 1e-10);
    const double tail_move =
        std::abs(rep.psi_norms[4] - rep.psi_norms[3]) / rep.psi_norms[4];
    CHECK(tail_move < 1e-6);  // the sums themselves have converged
    const JacksonReport first = jackson_sum_diagnostic(cache, Jg, t0, 1, 4, lambda);
    CHECK(first.residuals.back() < 1e-8);
  }

  SUBCASE("an undamped free factor reports honest divergence") {
    const JacksonReport rep = jackson_sum_diagnostic(cache, J, t0, j, 4, lambda);
    CHECK_FALSE(rep.monotone);
    CHECK(rep.residuals.back() > 1e-2);
    CHECK(rep.psi_norms.back() > rep.psi_norms.front());
  }

  SUBCASE("input guards") {
    CHECK_THROWS_AS(jackson_sum_diagnostic(cache, J, t0, j, 7, lambda), ConfigError);
    CHECK_THROWS_AS(jackson_sum_diagnostic(cache, J, t0, j, -1, lambda), ConfigError);
    CHECK_THROWS_AS(jackson_sum_diagnostic(cache, J, t0, 0, 2, lambda), ConfigError);
    CHECK_THROWS_AS(jackson_sum_diagnostic(cache, J, t0, 3, 2, lambda), ConfigError);
    CHECK_THROWS_AS(
        jackson_sum_diagnostic(cache, J, {cplx(0.1), cplx(0.2)}, j, 2, lambda),
        ConfigError);
    ModelConfig unbal = pair_config();
    unbal.m = 2;  // weights sum to 2, not 2 m
    unbal.truncation.clear();
    const JacksonIntegrand Ju = make_integrand(unbal);
    RBlockCache cache_u(unbal.elliptic);
    CHECK_THROWS_AS(
        jackson_sum_diagnostic(cache_u, Ju, {cplx(0.1), cplx(0.2)}, 1, 2, lambda),
        ConfigError);
  }
}

TEST_CASE("the connection operators approach the difference operators with the step") {
  ModelConfig cfg = pair_config();
  cfg.elliptic.p.reset();
  const cplx tstar(0.23, 0.19);
  const cplx c = derive_c(cfg, tstar);
  const BetheSolution sol = make_solution(cfg, {tstar}, c);
  REQUIRE(sol.residual < 1e-12);
  const VectorFunc psi = [cfg, sol](cplx l) -> Eigen::VectorXcd {
    return bethe_psi(cfg, sol, l);
  };
  const cplx lambda(0.11, 0.21);

  auto deviation = [&](cplx step) {
    ModelConfig cfg_p = cfg;
    cfg_p.elliptic.p = step;
    RBlockCache cache(cfg_p.elliptic);
    const ShiftOperator K2 = build_K(cache, cfg_p, 2);
    const Eigen::VectorXcd lhs = apply_op(K2, psi, lambda);
    const Eigen::VectorXcd rhs = sol.eps[1] * psi(lambda);
    return (lhs - rhs).cwiseAbs().maxCoeff() /
           std::max(rhs.cwiseAbs().maxCoeff(), 1e-300);
  };

  const double dev1 = deviation(cplx(0.0, 0.01));
  const double dev2 = deviation(cplx(0.0, 0.005));
  const double order = std::log2(dev1 / dev2);
  CHECK(dev2 < dev1);
  CHECK(order > 0.6);
  CHECK(order < 1.5);

  SUBCASE("the first-site connection operator carries no step dependence") {
    ModelConfig cfg_p = cfg;
    cfg_p.elliptic.p = cplx(0.0, 0.31);
    RBlockCache cache(cfg_p.elliptic);
    CHECK(op_equal(build_K(cache, cfg_p, 1), build_H(cache, cfg, 1)) < 1e-12);
  }
}

}  // namespace ellipq
