#include "ellipq/rmatrix.hpp"

#include <cmath>

#include "doctest.h"
#include "ellipq/elliptic.hpp"
#include "ellipq/errors.hpp"
#include "ellipq/omega.hpp"

namespace ellipq {
namespace {

EllipticParams base_params() {
  EllipticParams par;
  par.tau = cplx(0.0, 0.85);
  par.eta = cplx(0.21, 0.03);
  return par;
}

const cplx kLam{0.31, 0.07};
const cplx kWeightA{1.32, 0.45};
const cplx kWeightB{0.87, -0.22};
const cplx kZ{0.41, 0.13};

double max_abs_diff(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("degenerate and closed blocks match the residue construction") {
  const EllipticParams par = base_params();

  SUBCASE("the weight-zero block is the unit for both methods") {
    for (RMethod method : {RMethod::residue, RMethod::closed}) {
      const WeightBlockMatrix blk = rblock(par, kWeightA, kWeightB, kZ, kLam, 0, method);
      REQUIRE(blk.entries.rows() == 1);
      CHECK(std::abs(blk.entries(0, 0) - 1.0) == 0.0);
      CHECK(blk.row_index[0] == Composition{{0, 0}});
    }
  }

  SUBCASE("generic weights at m = 1") {
    const WeightBlockMatrix res = rblock(par, kWeightA, kWeightB, kZ, kLam, 1);
    const WeightBlockMatrix cls =
        rblock(par, kWeightA, kWeightB, kZ, kLam, 1, RMethod::closed);
    CHECK(max_abs_diff(res.entries, cls.entries) < 1e-8);
    CHECK(res.pairing_condition > 1.0);
    CHECK(res.pairing_condition < 1e8);
    CHECK(res.find_row(Composition{{0, 1}}) == 0);
    CHECK(res.find_col(Composition{{1, 0}}) == 1);
    CHECK_THROWS_AS((void)res.find_row(Composition{{2, 0}}), ConfigError);
  }

  SUBCASE("argument guards") {
    CHECK_THROWS_AS(rblock(par, kWeightA, kWeightB, kZ, kLam, -1), ConfigError);
    CHECK_THROWS_AS(rblock(par, kWeightA, kWeightB, kZ, kLam, 3, RMethod::closed),
                    MethodUnavailable);
    // A separation on the period lattice merges the two pole staircases.
    CHECK_THROWS_AS(rblock(par, kWeightA, kWeightB, cplx(0.0), kLam, 1),
                    SingularConfiguration);
    CHECK_THROWS_AS(rblock(par, kWeightA, kWeightB, cplx(1.0), kLam, 1),
                    SingularConfiguration);
  }
}

TEST_CASE("unit-weight blocks reduce to the fundamental operator") {
  const EllipticParams par = base_params();
  const Eigen::Matrix4cd F = fundamental_r(par, kZ, kLam);

  SUBCASE("corner entries are exactly one") {
    CHECK(std::abs(F(0, 0) - 1.0) == 0.0);
    CHECK(std::abs(F(3, 3) - 1.0) == 0.0);
  }

  SUBCASE("the m = 1 block gives the middle 2x2") {
    for (RMethod method : {RMethod::residue, RMethod::closed}) {
      const WeightBlockMatrix blk = rblock(par, 1.0, 1.0, kZ, kLam, 1, method);
      for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 2; ++c) {
          CHECK(std::abs(blk.entries(r, c) - F(1 + r, 1 + c)) < 1e-8);
        }
      }
    }
  }

  SUBCASE("the m = 2 quotient entry is one") {
    const WeightBlockMatrix cls = rblock(par, 1.0, 1.0, kZ, kLam, 2, RMethod::closed);
    REQUIRE(cls.entries.rows() == 1);
    CHECK(std::abs(cls.entries(0, 0) - 1.0) == 0.0);
    CHECK(cls.row_index[0] == Composition{{1, 1}});

    const WeightBlockMatrix res = rblock(par, 1.0, 1.0, kZ, kLam, 2);
    const WeightBlockMatrix quo = reduce_to_L(res, 1, 1);
    REQUIRE(quo.entries.rows() == 1);
    CHECK(quo.row_index[0] == Composition{{1, 1}});
    CHECK(std::abs(quo.entries(0, 0) - 1.0) < 1e-8);
  }

  SUBCASE("zero separation turns the operator into the flip") {
    const Eigen::Matrix4cd F0 = fundamental_r(par, cplx(0.0), kLam);
    Eigen::Matrix4cd P = Eigen::Matrix4cd::Zero();
    P(0, 0) = P(3, 3) = P(1, 2) = P(2, 1) = 1.0;
    CHECK((F0 - P).cwiseAbs().maxCoeff() < 1e-12);
  }

  SUBCASE("vanishing denominators are reported") {
    CHECK_THROWS_AS(fundamental_r(par, kZ, cplx(0.0)), PoleProximity);
    CHECK_THROWS_AS(fundamental_r(par, 2.0 * par.eta, kLam), PoleProximity);
    CHECK_THROWS_AS(rblock(par, kWeightA, kWeightB, kZ,
                           -2.0 * par.eta * (1.0 - kWeightA), 1, RMethod::closed),
                    PoleProximity);
  }
}

TEST_CASE("mixed blocks with a two-dimensional factor match the explicit entries") {
  const EllipticParams par = base_params();
  const cplx L = kWeightA;

  SUBCASE("level zero entries collapse") {
    const EvaluationEntries e0 = r_one_lambda(par, L, kZ, kLam, 0);
    CHECK(std::abs(e0.stay0 - 1.0) < 1e-12);
    CHECK(std::abs(e0.lower) == 0.0);
    CHECK_THROWS_AS(r_one_lambda(par, L, kZ, kLam, -1), ConfigError);
  }

  SUBCASE("the m = 1 block matches levels 0 and 1") {
    const WeightBlockMatrix blk = rblock(par, 1.0, L, kZ, kLam, 1);
    const EvaluationEntries top = r_one_lambda(par, L, kZ, kLam, 1);
    const EvaluationEntries bot = r_one_lambda(par, L, kZ, kLam, 0);
    const int r01 = blk.find_row(Composition{{0, 1}});
    const int r10 = blk.find_row(Composition{{1, 0}});
    CHECK(std::abs(blk.entries(r01, r01) - top.stay0) < 1e-8);
    CHECK(std::abs(blk.entries(r01, r10) - bot.raise) < 1e-8);
    CHECK(std::abs(blk.entries(r10, r01) - top.lower) < 1e-8);
    CHECK(std::abs(blk.entries(r10, r10) - bot.stay1) < 1e-8);
  }

  SUBCASE("the m = 2 block reduces and matches levels 1 and 2") {
    const WeightBlockMatrix res = rblock(par, 1.0, L, kZ, kLam, 2);
    const WeightBlockMatrix quo = reduce_to_L(res, 1, std::nullopt);
    REQUIRE(quo.entries.rows() == 2);
    const EvaluationEntries top = r_one_lambda(par, L, kZ, kLam, 2);
    const EvaluationEntries bot = r_one_lambda(par, L, kZ, kLam, 1);
    const int r02 = quo.find_row(Composition{{0, 2}});
    const int r11 = quo.find_row(Composition{{1, 1}});
    CHECK(std::abs(quo.entries(r02, r02) - top.stay0) < 1e-8);
    CHECK(std::abs(quo.entries(r02, r11) - bot.raise) < 1e-8);
    CHECK(std::abs(quo.entries(r11, r02) - top.lower) < 1e-8);
    CHECK(std::abs(quo.entries(r11, r11) - bot.stay1) < 1e-8);
  }

  SUBCASE("a two-dimensional second factor reduces through its own cap") {
    const WeightBlockMatrix res = rblock(par, L, 1.0, kZ, kLam, 2);
    const WeightBlockMatrix quo = reduce_to_L(res, std::nullopt, 1);
    REQUIRE(quo.entries.rows() == 2);
    CHECK(quo.find_row(Composition{{1, 1}}) >= 0);
    CHECK(quo.find_row(Composition{{2, 0}}) >= 0);
  }
}

TEST_CASE("transition identity holds on sample points") {
  const EllipticParams par = base_params();
  CHECK(transition_identity_residual(par, kWeightA, kWeightB, kZ, kLam, 1) < 1e-8);
  CHECK(transition_identity_residual(par, kWeightA, kWeightB, kZ, kLam, 2) < 1e-8);
}

TEST_CASE("blocks are unitary and sign-symmetric") {
  const EllipticParams par = base_params();
  SUBCASE("unitarity") {
    CHECK(unitarity_residual(par, kWeightA, kWeightB, kZ, kLam, 1) < 1e-9);
    CHECK(unitarity_residual(par, kWeightA, kWeightB, kZ, kLam, 2) < 1e-9);
  }
  SUBCASE("simultaneous sign reversal") {
    CHECK(sign_reversal_residual(par, kWeightA, kWeightB, kZ, kLam, 1) < 1e-9);
    CHECK(sign_reversal_residual(par, kWeightA, kWeightB, kZ, kLam, 2) < 1e-9);
  }
}

TEST_CASE("triple exchange identity holds") {
  const EllipticParams par = base_params();
  const std::array<cplx, 3> weights{kWeightA, kWeightB, cplx(1.11, 0.09)};
  const cplx z{0.23, 0.05};
  const cplx w{-0.17, 0.08};
  CHECK(dybe_residual(par, weights, z, w, kLam, 1) < 1e-8);
  CHECK(dybe_residual(par, weights, z, w, kLam, 2) < 1e-8);
}

TEST_CASE("blocks at nearly coinciding points approach the flip") {
  const EllipticParams par = base_params();

  SUBCASE("coinciding-point construction is the flip exactly") {
    for (int m : {1, 2}) {
      const WeightBlockMatrix blk = rblock_coincident(par, kWeightA, kLam, m);
      const Eigen::MatrixXcd P = flip_matrix(blk.row_index, blk.col_index);
      CHECK(max_abs_diff(blk.entries, P) < 1e-10);
    }
  }

  SUBCASE("small separations converge at the expected rate") {
    ContourSpec spec;
    spec.points = 64;
    const ZLimitReport rep =
        z_limit_report(par, kWeightA, kLam, 1, cplx(1e-6, 3e-7), spec);
    CHECK(rep.near_deviation < 1e-4);
    CHECK(rep.reference_deviation < 1e-10);
  }

  SUBCASE("the flip block is an involution") {
    const std::vector<Composition> comps = enumerate_compositions(2, 2);
    const Eigen::MatrixXcd P = flip_matrix(comps, comps);
    CHECK(max_abs_diff(P * P, Eigen::MatrixXcd::Identity(3, 3)) == 0.0);
  }
}

TEST_CASE("quotient reduction guards") {
  const EllipticParams par = base_params();
  const WeightBlockMatrix blk = rblock(par, kWeightA, kWeightB, kZ, kLam, 2);
  CHECK_THROWS_AS(reduce_to_L(blk, std::nullopt, std::nullopt), MethodUnavailable);
  // Generic weights admit no invariant subspace, so capping must fail loudly.
  CHECK_THROWS_AS(reduce_to_L(blk, 1, std::nullopt), InvarianceViolated);
}

TEST_CASE("block cache deduplicates requests") {
  const EllipticParams par = base_params();
  RBlockCache cache(par);
  const WeightBlockMatrix a = cache.get(kWeightA, kWeightB, kZ, kLam, 1);
  CHECK(cache.size() == 1);
  const WeightBlockMatrix b = cache.get(kWeightA, kWeightB, kZ, kLam, 1);
  CHECK(cache.size() == 1);
  CHECK(max_abs_diff(a.entries, b.entries) == 0.0);
  (void)cache.get(kWeightA, kWeightB, kZ, kLam + cplx(0.1), 1);
  CHECK(cache.size() == 2);
}

}  // namespace ellipq
