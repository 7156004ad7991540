#include <cmath>
#include <vector>

#include "doctest.h"
#include "rclab/enumerate.hpp"

using namespace rclab;

namespace {

System single_bond(double q, double p) {
  Region pair = Region::custom(2, {coord2(0, 0), coord2(1, 0)}, false);
  RcParams params;
  params.q = q;
  params.p = p;
  return compile_system(pair, params, BoundaryCondition::free());
}

Region square4() {
  return Region::custom(
      2, {coord2(0, 0), coord2(1, 0), coord2(0, 1), coord2(1, 1)}, false);
}

}  // namespace

TEST_CASE("single bond partition function") {
  // Z = (1-p) q^2 + p q = 3 at q = 2, p = 1/2
  System sys = single_bond(2.0, 0.5);
  ExactFK fk = enumerate_exact(sys);
  CHECK(fk.log_Z() == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  CHECK(fk.prob(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(fk.prob(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(fk.bond_marginal(0) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK_THROWS_AS(fk.bond_marginal(1), std::invalid_argument);
}

TEST_CASE("four-cycle exact weights") {
  // 2x2 square, q = 2, p = 1/2: every state weighs q^c / 16,
  // summed by open count: 16 + 32 + 24 + 8 + 2 = 82
  Region r = square4();
  RcParams params;
  params.q = 2.0;
  params.p = 0.5;
  System sys = compile_system(r, params, BoundaryCondition::free());
  REQUIRE(sys.bonds.size() == 4);
  ExactFK fk = enumerate_exact(sys);
  CHECK(fk.log_Z() == doctest::Approx(std::log(82.0 / 16.0)).epsilon(1e-14));
  CHECK(fk.prob(0xF) == doctest::Approx(1.0 / 41.0).epsilon(1e-12));
  CHECK(fk.prob(0) == doctest::Approx(16.0 / 82.0).epsilon(1e-12));
  for (int b = 0; b < 4; ++b) {
    CHECK(fk.bond_marginal(b) == doctest::Approx(14.0 / 41.0).epsilon(1e-12));
  }
}

TEST_CASE("distribution is a probability vector matching log weights") {
  Region box = build_box(1, 2, false);
  RcParams params;
  params.q = 1.7;
  params.p = 0.35;
  System sys = compile_system(box, params, BoundaryCondition::free());
  ExactFK fk = enumerate_exact(sys);
  const std::vector<double>& dist = fk.distribution();
  REQUIRE(dist.size() == (std::size_t{1} << sys.bonds.size()));
  double total = 0;
  ExplicitConfig cfg(static_cast<std::int64_t>(sys.bonds.size()));
  for (std::uint64_t mask = 0; mask < dist.size(); ++mask) {
    total += dist[mask];
    cfg.words()[0] = mask;
    double expect = std::exp(log_weight(sys, cfg) - fk.log_Z());
    CHECK(dist[mask] == doctest::Approx(expect).epsilon(1e-10));
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("expectation and event probability agree") {
  Region r = square4();
  RcParams params;
  params.q = 3.0;
  params.p = 0.4;
  System sys = compile_system(r, params, BoundaryCondition::wired());
  ExactFK fk = enumerate_exact(sys);

  auto ev = [](const ExplicitConfig& cfg) { return cfg.count_open() >= 2; };
  double via_event = fk.event_prob(ev);
  double via_expect =
      fk.expectation([&](const ExplicitConfig& cfg) { return ev(cfg) ? 1.0 : 0.0; });
  CHECK(via_event == doctest::Approx(via_expect).epsilon(1e-14));
  CHECK(fk.event_prob([](const ExplicitConfig&) { return true; }) ==
        doctest::Approx(1.0).epsilon(1e-14));

  double mean_open =
      fk.expectation([](const ExplicitConfig& cfg) {
        return static_cast<double>(cfg.count_open());
      });
  double marg_sum = 0;
  for (std::size_t b = 0; b < sys.bonds.size(); ++b) {
    marg_sum += fk.bond_marginal(static_cast<std::int64_t>(b));
  }
  CHECK(mean_open == doctest::Approx(marg_sum).epsilon(1e-12));
}

TEST_CASE("q = 1 is the independent product measure") {
  Region r = square4();
  RcParams params;
  params.q = 1.0;
  params.p = 0.3;
  params.set_override(r.bond_index({coord2(0, 0), 0}), 0.8);
  System sys = compile_system(r, params, BoundaryCondition::free());
  ExactFK fk = enumerate_exact(sys);

  std::int64_t special = sys.sbond_index(r.bond_index({coord2(0, 0), 0}));
  REQUIRE(special >= 0);
  for (std::size_t b = 0; b < sys.bonds.size(); ++b) {
    double want = static_cast<std::int64_t>(b) == special ? 0.8 : 0.3;
    CHECK(fk.bond_marginal(static_cast<std::int64_t>(b)) ==
          doctest::Approx(want).epsilon(1e-12));
  }
  // joint factorizes
  double both = fk.event_prob([&](const ExplicitConfig& cfg) {
    return cfg.open(special) && cfg.open((special + 1) % 4);
  });
  CHECK(both == doctest::Approx(0.8 * 0.3).epsilon(1e-12));
}

TEST_CASE("tree marginals factorize for general q") {
  // on a path every bond joins two distinct clusters, so each bond is an
  // independent coin with success p / (p + (1-p) q)
  std::vector<Coord> line;
  for (int i = 0; i < 8; ++i) line.push_back(coord2(i, 0));
  Region path = Region::custom(2, std::move(line), false);
  RcParams params;
  params.q = 2.5;
  params.p = 0.3;
  System sys = compile_system(path, params, BoundaryCondition::free());
  REQUIRE(sys.bonds.size() == 7);
  ExactFK fk = enumerate_exact(sys);
  double eff = 0.3 / (0.3 + 0.7 * 2.5);
  for (std::size_t b = 0; b < sys.bonds.size(); ++b) {
    CHECK(fk.bond_marginal(static_cast<std::int64_t>(b)) ==
          doctest::Approx(eff).epsilon(1e-12));
  }
  double pair = fk.event_prob([](const ExplicitConfig& cfg) {
    return cfg.open(0) && cfg.open(3);
  });
  CHECK(pair == doctest::Approx(eff * eff).epsilon(1e-12));
}

TEST_CASE("wired ghost magnetization matches the FK connection probability") {
  Region r = Region::custom(
      2, {coord2(0, 0), coord2(1, 0), coord2(0, 1), coord2(1, 1)}, true);
  RcParams params;
  params.q = 2.0;
  params.p = 0.45;
  System sys = compile_system(r, params, BoundaryCondition::wired());
  REQUIRE(sys.bonds.size() == 12);
  REQUIRE(sys.sw_ok);

  ExactFK fk = enumerate_exact(sys);
  IsingFromSystem mirror = ising_from_system(sys);
  Coord ghost_site = coord2(-1, 0);  // any exterior site stands for the class
  for (Coord site : {coord2(0, 0), coord2(1, 0), coord2(0, 1), coord2(1, 1)}) {
    double fk_conn = fk.event_prob([&](const ExplicitConfig& cfg) {
      return connected(sys, cfg, {site}, {ghost_site});
    });
    double mag = mirror.model.magnetization(mirror.spin_of_site(site));
    CHECK(fk_conn == doctest::Approx(mag).epsilon(1e-10));
  }
}

TEST_CASE("free two-point function vanishes in the Ising mirror") {
  // no ghost: +/- symmetry forces zero magnetization
  System sys = single_bond(2.0, 0.6);
  IsingFromSystem mirror = ising_from_system(sys);
  CHECK(mirror.model.magnetization(mirror.spin_of_site(coord2(0, 0))) ==
        doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("enumeration caps") {
  Region big = build_box(2, 2, false);  // 40 bonds
  RcParams params;
  System sys = compile_system(big, params, BoundaryCondition::free());
  CHECK_THROWS_AS(enumerate_exact(sys), oracle_cap_error);
  CHECK_THROWS_AS(ExactIsing(kMaxEnumSpins + 1, {}), oracle_cap_error);
}

TEST_CASE("distribution cap bites above the stored limit") {
  std::vector<Coord> line;
  for (int i = 0; i <= kMaxStoredDist + 1; ++i) line.push_back(coord2(i, 0));
  Region path = Region::custom(2, std::move(line), false);
  RcParams params;
  params.q = 2.0;
  params.p = 0.3;
  System sys = compile_system(path, params, BoundaryCondition::free());
  REQUIRE(sys.bonds.size() == static_cast<std::size_t>(kMaxStoredDist) + 1);
  ExactFK fk = enumerate_exact(sys);
  CHECK_THROWS_AS(fk.distribution(), oracle_cap_error);
  // sums over 2^21 states accumulate a little more roundoff
  double eff = 0.3 / (0.3 + 0.7 * 2.0);
  CHECK(fk.bond_marginal(0) == doctest::Approx(eff).epsilon(1e-9));
  CHECK(fk.bond_marginal(kMaxStoredDist) ==
        doctest::Approx(eff).epsilon(1e-9));
}
