#include "ellipq/diffop.hpp"

#include <cmath>
#include <complex>

#include "doctest.h"
#include "ellipq/elliptic.hpp"
#include "ellipq/errors.hpp"

namespace ellipq {
namespace {

EllipticParams base_params() {
  EllipticParams par;
  par.tau = cplx(0.0, 0.85);
  par.eta = cplx(0.21, 0.03);
  return par;
}

ModelConfig two_site() {
  ModelConfig cfg;
  cfg.elliptic = base_params();
  cfg.Lambda = {cplx(1.0), cplx(1.0)};
  cfg.z = {cplx(0.41, 0.13), cplx(-0.17, 0.29)};
  cfg.m = 1;
  cfg.truncation = {1, 1};
  return cfg;
}

ModelConfig three_site() {
  ModelConfig cfg;
  cfg.elliptic = base_params();
  cfg.Lambda = {cplx(1.0), cplx(1.0), cplx(2.0)};
  cfg.z = {cplx(0.41, 0.13), cplx(-0.17, 0.29), cplx(0.11, -0.23)};
  cfg.m = 2;
  cfg.truncation = {1, 1, 2};
  return cfg;
}

ModelConfig single_site(double weight, int m) {
  ModelConfig cfg;
  cfg.elliptic = base_params();
  cfg.Lambda = {cplx(weight)};
  cfg.z = {cplx(0.41, 0.13)};
  cfg.m = m;
  cfg.truncation = {static_cast<int>(weight)};
  return cfg;
}

// Operator with terms linear in lambda, deterministic in the seed.
ShiftOperator random_linear_op(const std::vector<Composition>& basis, cplx two_eta,
                               const std::vector<int>& shifts, std::uint64_t seed) {
  Rng rng(seed);
  ShiftOperator out;
  out.codomain = basis;
  out.domain = basis;
  out.two_eta = two_eta;
  const Eigen::Index dim = static_cast<Eigen::Index>(basis.size());
  for (int s : shifts) {
    Eigen::MatrixXcd m0(dim, dim), m1(dim, dim);
    for (Eigen::Index r = 0; r < dim; ++r) {
      for (Eigen::Index c = 0; c < dim; ++c) {
        m0(r, c) = rng.generic(1.0);
        m1(r, c) = rng.generic(1.0);
      }
    }
    out.terms[s] = [m0, m1](cplx lambda) -> Eigen::MatrixXcd {
      return m0 + lambda * m1;
    };
  }
  return out;
}

}  // namespace

TEST_CASE("shift-operator algebra composes correctly") {
  const std::vector<Composition> basis = enumerate_compositions(2, 1);
  const cplx two_eta(0.42, 0.06);
  const ShiftOperator A = random_linear_op(basis, two_eta, {-1, 0, 1}, 11u);
  const ShiftOperator B = random_linear_op(basis, two_eta, {0, 2}, 22u);
  const ShiftOperator C = random_linear_op(basis, two_eta, {-1, 1}, 33u);

  SUBCASE("composition is associative and the identity is neutral") {
    CHECK(op_equal(compose(compose(A, B), C), compose(A, compose(B, C))) < 1e-10);
    const ShiftOperator id = identity_op(basis, two_eta);
    CHECK(op_equal(compose(A, id), A) < 1e-14);
    CHECK(op_equal(compose(id, A), A) < 1e-14);
  }

  SUBCASE("composition evaluates as substitution of function arguments") {
    const VectorFunc f = [](cplx lambda) {
      Eigen::VectorXcd v(2);
      v << std::exp(cplx(0.0, 1.0) * lambda), cplx(1.0) / (lambda + cplx(2.0, 1.0));
      return v;
    };
    const VectorFunc bf = [&](cplx lambda) { return apply_op(B, f, lambda); };
    const cplx lam(0.37, 0.21);
    const Eigen::VectorXcd direct = apply_op(compose(A, B), f, lam);
    const Eigen::VectorXcd nested = apply_op(A, bf, lam);
    CHECK((direct - nested).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("absent shifts evaluate to the zero matrix") {
    const Eigen::MatrixXcd zero = A.term(7, cplx(0.1, 0.1));
    CHECK(zero.rows() == 2);
    CHECK(zero.cols() == 2);
    CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("mismatched compositions are rejected") {
    ShiftOperator other = A;
    other.two_eta = cplx(0.3, 0.0);
    CHECK_THROWS_AS(compose(A, other), ConfigError);
    ShiftOperator wide = A;
    wide.codomain = enumerate_compositions(2, 2);
    CHECK_THROWS_AS(compose(A, wide), ConfigError);
  }
}

TEST_CASE("weight shift operator matches the hand computation") {
  const ModelConfig cfg = two_site();
  const ShiftOperator g1 = gamma_op(cfg, 1);
  const ShiftOperator g2 = gamma_op(cfg, 2);
  const cplx lam(0.31, 0.07);

  // Basis order is lexicographic: (0,1) then (1,0).
  Eigen::MatrixXcd p0 = Eigen::MatrixXcd::Zero(2, 2);
  p0(0, 0) = 1.0;
  Eigen::MatrixXcd p1 = Eigen::MatrixXcd::Zero(2, 2);
  p1(1, 1) = 1.0;

  SUBCASE("terms are the weight projectors") {
    CHECK(g1.terms.size() == 2);
    CHECK((g1.term(1, lam) - p0).cwiseAbs().maxCoeff() == 0.0);
    CHECK((g1.term(-1, lam) - p1).cwiseAbs().maxCoeff() == 0.0);
    CHECK((g2.term(1, lam) - p1).cwiseAbs().maxCoeff() == 0.0);
    CHECK((g2.term(-1, lam) - p0).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("squares and products recombine the projectors") {
    const ShiftOperator g1g1 = compose(g1, g1);
    CHECK((g1g1.term(2, lam) - p0).cwiseAbs().maxCoeff() == 0.0);
    CHECK((g1g1.term(-2, lam) - p1).cwiseAbs().maxCoeff() == 0.0);
    CHECK(g1g1.term(0, lam).cwiseAbs().maxCoeff() == 0.0);
    // g1 g2 shifts by the total weight, which vanishes on this space.
    CHECK(op_equal(compose(g1, g2), identity_op(zero_weight_basis(cfg), g1.two_eta)) ==
          0.0);
    CHECK(commutator_residual(g1, g2) == 0.0);
  }

  SUBCASE("invalid factor data is rejected") {
    CHECK_THROWS_AS(gamma_op(cfg, 3), ConfigError);
    CHECK_THROWS_AS(gamma_op(cfg, 0), ConfigError);
    ModelConfig frac = cfg;
    frac.Lambda = {cplx(1.3), cplx(0.7)};
    frac.truncation.clear();
    CHECK_THROWS_AS(gamma_op(frac, 1), ConfigError);
  }
}

TEST_CASE("single-site operators degenerate to the weight shift") {
  RBlockCache cache(base_params());

  SUBCASE("weight two, one variable") {
    const ModelConfig cfg = single_site(2.0, 1);
    const ShiftOperator H = build_H(cache, cfg, 1);
    CHECK(op_equal(H, gamma_op(cfg, 1)) < 1e-14);
    // At w = z_1 every factor is the coinciding-point flip, and the partial
    // trace collapses onto the same weight shift.
    const ShiftOperator T = build_T(cache, cfg, cfg.z[0]);
    CHECK(op_equal(T, H) < 1e-12);
    CHECK(T.terms.count(2) == 1);
    CHECK(T.term(2, cplx(0.2, 0.1)).cwiseAbs().maxCoeff() == 0.0);
    CHECK(T.term(-2, cplx(0.2, 0.1)).cwiseAbs().maxCoeff() == 0.0);
  }

  SUBCASE("weight zero is the identity") {
    const ModelConfig cfg = single_site(0.0, 0);
    CHECK(op_equal(build_H(cache, cfg, 1),
                   identity_op(zero_weight_basis(cfg), 2.0 * cfg.eta())) < 1e-14);
    CHECK(op_equal(build_T(cache, cfg, cplx(0.23, 0.41)),
                   identity_op(zero_weight_basis(cfg), 2.0 * cfg.eta())) < 1e-14);
  }
}

TEST_CASE("the connection operators commute") {
  RBlockCache cache(base_params());

  SUBCASE("two factors, one variable") {
    const ModelConfig cfg = two_site();
    const ShiftOperator H1 = build_H(cache, cfg, 1);
    const ShiftOperator H2 = build_H(cache, cfg, 2);
    CHECK(commutator_residual(H1, H2) < 1e-9);
    CHECK(op_equal(H1, compose(gamma_op(cfg, 1), tilde_h1(cache, cfg))) < 1e-12);
  }

  SUBCASE("three factors, two variables") {
    const ModelConfig cfg = three_site();
    const ShiftOperator H1 = build_H(cache, cfg, 1);
    const ShiftOperator H2 = build_H(cache, cfg, 2);
    const ShiftOperator H3 = build_H(cache, cfg, 3);
    CHECK(commutator_residual(H1, H2, 3) < 1e-8);
    CHECK(commutator_residual(H1, H3, 3) < 1e-8);
    CHECK(commutator_residual(H2, H3, 3) < 1e-8);
  }
}

TEST_CASE("the transfer matrix commutes and reproduces the connection operators") {
  RBlockCache cache(base_params());
  const ModelConfig cfg = two_site();

  SUBCASE("transfer matrices at two arguments commute") {
    const ShiftOperator Ta = build_T(cache, cfg, cplx(0.23, 0.41));
    const ShiftOperator Tb = build_T(cache, cfg, cplx(-0.31, 0.19));
    CHECK(commutator_residual(Ta, Tb, 3) < 1e-8);
  }

  SUBCASE("the transfer matrix at an evaluation point is the connection operator") {
    CHECK(op_equal(build_T(cache, cfg, cfg.z[0]), build_H(cache, cfg, 1), 3) < 1e-8);
    CHECK(op_equal(build_T(cache, cfg, cfg.z[1]), build_H(cache, cfg, 2), 3) < 1e-8);
  }

  SUBCASE("unequal or fractional weights are rejected") {
    CHECK_THROWS_AS(build_T(cache, three_site(), cplx(0.2, 0.3)), ConfigError);
    ModelConfig frac = cfg;
    frac.Lambda = {cplx(1.5), cplx(0.5)};
    frac.truncation.clear();
    CHECK_THROWS_AS(build_T(cache, frac, cplx(0.2, 0.3)), ConfigError);
  }
}

TEST_CASE("the discrete connection is flat and degenerates to the connection operators") {
  RBlockCache cache(base_params());

  SUBCASE("a missing step is rejected") {
    CHECK_THROWS_AS(build_K(cache, two_site(), 1), ConfigError);
    CHECK_THROWS_AS(flatness_residual(cache, two_site(), 1, 2), ConfigError);
  }

  SUBCASE("at step zero the connection reduces to the difference operators") {
    ModelConfig cfg = two_site();
    cfg.elliptic.p = cplx(0.0, 0.0);
    CHECK(op_equal(build_K(cache, cfg, 1), build_H(cache, cfg, 1)) < 1e-12);
    CHECK(op_equal(build_K(cache, cfg, 2), build_H(cache, cfg, 2)) < 1e-12);
  }

  SUBCASE("the first operator carries no step dependence") {
    ModelConfig cfg = two_site();
    cfg.elliptic.p = cplx(0.11, 0.47);
    CHECK(op_equal(build_K(cache, cfg, 1), build_H(cache, cfg, 1)) < 1e-12);
  }

  SUBCASE("shifted and unshifted compositions agree") {
    ModelConfig cfg = two_site();
    cfg.elliptic.p = cplx(0.11, 0.47);
    CHECK(flatness_residual(cache, cfg, 1, 2) < 1e-8);
  }
}

TEST_CASE("exchange operators intertwine the connection operators") {
  RBlockCache cache(base_params());

  SUBCASE("two equal factors") {
    const ExchangeReport rep = verify_exchange(cache, two_site(), 1);
    CHECK(rep.intertwine < 1e-9);
    CHECK(rep.inverse < 1e-9);
  }

  SUBCASE("mixed weights across three factors") {
    const ExchangeReport rep = verify_exchange(cache, three_site(), 2, 3);
    CHECK(rep.intertwine < 1e-8);
    CHECK(rep.inverse < 1e-8);
  }

  SUBCASE("the exchange index must address an adjacent pair") {
    CHECK_THROWS_AS(exchange_op(cache, two_site(), 2), ConfigError);
    CHECK_THROWS_AS(exchange_op(cache, two_site(), 0), ConfigError);
  }
}

}  // namespace ellipq
