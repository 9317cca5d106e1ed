#include <vector>

#include "doctest.h"
#include "ellipq/errors.hpp"
#include "ellipq/model.hpp"

using namespace ellipq;

namespace {

ModelConfig two_site_config() {
  ModelConfig cfg;
  cfg.elliptic.tau = cplx(0.0, 0.85);
  cfg.elliptic.eta = cplx(0.21, 0.03);
  cfg.Lambda = {cplx(1.3, 0.2), cplx(0.8, -0.1)};
  cfg.z = {cplx(0.12, 0.4), cplx(-0.33, 0.09)};
  cfg.m = 2;
  return cfg;
}

}  // namespace

TEST_CASE("composition enumeration is lexicographic and complete") {
  const auto two = enumerate_compositions(2, 2);
  REQUIRE(two.size() == 3);
  CHECK(two[0] == Composition({0, 2}));
  CHECK(two[1] == Composition({1, 1}));
  CHECK(two[2] == Composition({2, 0}));

  const auto three = enumerate_compositions(3, 3);
  CHECK(three.size() == 10);  // binom(3+3-1, 3)
  CHECK(three.front() == Composition({0, 0, 3}));
  CHECK(three.back() == Composition({3, 0, 0}));
  for (std::size_t i = 1; i < three.size(); ++i) {
    CHECK(three[i - 1] < three[i]);
  }

  const auto trivial = enumerate_compositions(3, 0);
  REQUIRE(trivial.size() == 1);
  CHECK(trivial[0].total() == 0);
}

TEST_CASE("composition enumeration honors per-part caps") {
  const std::vector<int> caps = {1, 1, 2};
  const auto capped = enumerate_compositions(3, 2, &caps);
  REQUIRE(capped.size() == 4);
  CHECK(capped[0] == Composition({0, 0, 2}));
  CHECK(capped[1] == Composition({0, 1, 1}));
  CHECK(capped[2] == Composition({1, 0, 1}));
  CHECK(capped[3] == Composition({1, 1, 0}));

  const std::vector<int> mixed = {1, -1};
  const auto half_capped = enumerate_compositions(2, 3, &mixed);
  REQUIRE(half_capped.size() == 2);
  CHECK(half_capped[0] == Composition({0, 3}));
  CHECK(half_capped[1] == Composition({1, 2}));
}

TEST_CASE("weight space basis and weight bookkeeping") {
  ModelConfig cfg;
  cfg.elliptic.tau = cplx(0.0, 0.85);
  cfg.elliptic.eta = cplx(0.21, 0.03);
  cfg.Lambda = {cplx(1.0, 0.0), cplx(1.0, 0.0)};
  cfg.z = {cplx(0.12, 0.4), cplx(-0.33, 0.09)};
  cfg.m = 1;

  const auto zero_weight = weight_space_basis(cfg, cplx(0.0, 0.0));
  REQUIRE(zero_weight.size() == 2);
  CHECK(zero_weight[0] == Composition({0, 1}));
  CHECK(zero_weight[1] == Composition({1, 0}));

  CHECK_THROWS_AS(weight_space_basis(cfg, cplx(1.0, 0.0)), UnreachableWeight);
  CHECK_THROWS_AS(weight_space_basis(cfg, cplx(4.0, 0.0)), UnreachableWeight);

  cfg.truncation = {std::optional<int>(1), std::optional<int>(1)};
  const auto top = weight_space_basis(cfg, cplx(2.0, 0.0));
  REQUIRE(top.size() == 1);
  CHECK(top[0] == Composition({0, 0}));
  const auto bottom = weight_space_basis(cfg, cplx(-2.0, 0.0));
  REQUIRE(bottom.size() == 1);
  CHECK(bottom[0] == Composition({1, 1}));

  const Composition c({1, 0});
  CHECK(rel_dev(composition_weight(cfg, c), cplx(0.0, 0.0)) < 1e-15);
  CHECK(std::abs(partial_weight(cfg, c, 0)) < 1e-15);
  CHECK(rel_dev(partial_weight(cfg, c, 1), cplx(-1.0, 0.0)) < 1e-15);
  CHECK(rel_dev(partial_weight(cfg, c, 2), cplx(0.0, 0.0)) < 1e-15);
}

TEST_CASE("model config validation and helpers") {
  ModelConfig cfg = two_site_config();
  CHECK_NOTHROW(cfg.validate());
  CHECK(cfg.n() == 2);
  CHECK(rel_dev(cfg.a(0), cfg.elliptic.eta * cfg.Lambda[0]) < 1e-15);
  CHECK(rel_dev(cfg.lambda_sum(), cplx(2.1, 0.1)) < 1e-15);

  ModelConfig close_z = cfg;
  close_z.z[1] = close_z.z[0] + cplx(1e-9, 0.0);
  CHECK_THROWS_AS(close_z.validate(), ConfigError);

  ModelConfig close_z_lattice = cfg;
  close_z_lattice.z[1] = close_z_lattice.z[0] + 1.0 + close_z_lattice.elliptic.tau;
  CHECK_THROWS_AS(close_z_lattice.validate(), ConfigError);

  ModelConfig mismatched = cfg;
  mismatched.z.pop_back();
  CHECK_THROWS_AS(mismatched.validate(), ConfigError);

  ModelConfig bad_tau = cfg;
  bad_tau.elliptic.tau = cplx(0.5, -0.2);
  CHECK_THROWS_AS(bad_tau.validate(), ConfigError);

  const ModelConfig swapped = cfg.swapped(0);
  CHECK(swapped.Lambda[0] == cfg.Lambda[1]);
  CHECK(swapped.Lambda[1] == cfg.Lambda[0]);
  CHECK(swapped.z[0] == cfg.z[1]);

  const ModelConfig shifted = cfg.shifted_z(1, cplx(0.0, 1e-6));
  CHECK(shifted.z[1] == cfg.z[1] + cplx(0.0, 1e-6));
  CHECK(shifted.z[0] == cfg.z[0]);
}

TEST_CASE("zero weight consistency flag") {
  ModelConfig cfg = two_site_config();
  cfg.Lambda = {cplx(1.0, 0.0), cplx(1.0, 0.0)};
  cfg.m = 1;
  CHECK(cfg.zero_weight_consistent());
  cfg.m = 0;
  CHECK_FALSE(cfg.zero_weight_consistent());
}
