#include <cmath>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "doctest.h"
#include "rclab/observables.hpp"

using namespace rclab;

namespace {

System block_system(int l, int h, double p = 0.5, double q = 1.0) {
  RcParams params;
  params.q = q;
  params.p = p;
  return compile_system(build_block(l, h, 3, false), params,
                        BoundaryCondition::free());
}

ExplicitConfig all_open(const System& sys) {
  ExplicitConfig cfg(static_cast<std::int64_t>(sys.bonds.size()));
  cfg.fill(true);
  return cfg;
}

void close_bond(const System& sys, ExplicitConfig& cfg, const Bond& b) {
  std::int64_t sb = sys.sbond_index(sys.region.bond_index(b));
  REQUIRE(sb >= 0);
  cfg.set_open(sb, false);
}

BondOracle set_oracle(const std::set<std::uint64_t>& keys) {
  return [&keys](const Bond& b) { return keys.count(bond_key(b)) > 0; };
}

}  // namespace

TEST_CASE("event names and monotonicity flags") {
  CHECK(event_increasing(EvFaceCross{2, 1.0}));
  CHECK_FALSE(event_increasing(EvDisconnect{2, 1.0}));
  CHECK(event_increasing(EvBoxPerc{}));
  CHECK(event_name(EvFaceCross{2, 1.0}).size() > 0);
  CHECK(event_name(EvDisconnect{2, 1.0}) != event_name(EvFaceCross{2, 1.0}));
}

TEST_CASE("two point and set connection events") {
  Region box = build_box(1, 2, false);
  RcParams params;
  System sys = compile_system(box, params, BoundaryCondition::free());
  ExplicitConfig cfg(static_cast<std::int64_t>(sys.bonds.size()));
  CHECK(eval_event(sys, cfg, EvTwoPoint{coord2(0, 0), coord2(0, 0)}));
  CHECK_FALSE(eval_event(sys, cfg, EvTwoPoint{coord2(0, 0), coord2(1, 0)}));
  close_bond(sys, cfg, {coord2(0, 0), 0});
  cfg.set_open(sys.sbond_index(box.bond_index({coord2(0, 0), 0})), true);
  CHECK(eval_event(sys, cfg, EvTwoPoint{coord2(0, 0), coord2(1, 0)}));
  CHECK(eval_event(sys, cfg,
                   EvConnect{{coord2(-1, -1), coord2(0, 0)}, {coord2(1, 0)}}));
  CHECK_FALSE(eval_event(sys, cfg,
                         EvConnect{{coord2(-1, -1)}, {coord2(1, 0)}}));
  EvConnect empty;
  empty.A = {coord2(0, 0)};
  CHECK_THROWS_AS(eval_event(sys, cfg, empty), std::invalid_argument);
}

TEST_CASE("face crossing wants a path inside the rectangle") {
  // ambient has two extra layers; the event must ignore them
  Region amb = build_rectangle(1, 1.0, 2, 2, false);
  RcParams params;
  System sys = compile_system(amb, params, BoundaryCondition::free());
  EvFaceCross cross{1, 1.0};

  ExplicitConfig cfg(static_cast<std::int64_t>(sys.bonds.size()));
  CHECK_FALSE(eval_event(sys, cfg, cross));

  // straight column through x = 0
  for (int z = -1; z < 1; ++z) {
    cfg.set_open(sys.sbond_index(amb.bond_index({coord2(0, z), 1})), true);
  }
  CHECK(eval_event(sys, cfg, cross));
  CHECK_FALSE(eval_event(sys, cfg, EvDisconnect{1, 1.0}));

  // opening every bond that leaves the rectangle creates no crossing
  ExplicitConfig outer(static_cast<std::int64_t>(sys.bonds.size()));
  for (std::size_t i = 0; i < sys.bonds.size(); ++i) {
    Bond b = amb.bond_at(sys.bonds[i].region_bid);
    auto [u, v] = Region::bond_sites(b);
    if (std::abs(u[1]) > 1 || std::abs(v[1]) > 1) {
      outer.set_open(static_cast<std::int64_t>(i), true);
    }
  }
  CHECK_FALSE(eval_event(sys, outer, cross));
  CHECK(eval_event(sys, outer, EvDisconnect{1, 1.0}));
}

TEST_CASE("disconnect is the complement of the crossing") {
  Region amb = build_rectangle(1, 1.0, 1, 2, false);
  RcParams params;
  System sys = compile_system(amb, params, BoundaryCondition::free());
  std::mt19937 rng(17);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  ExplicitConfig cfg(static_cast<std::int64_t>(sys.bonds.size()));
  for (int trial = 0; trial < 300; ++trial) {
    for (std::int64_t i = 0; i < cfg.size(); ++i) {
      cfg.set_open(i, unif(rng) < 0.5);
    }
    CHECK(eval_event(sys, cfg, EvFaceCross{1, 1.0}) !=
          eval_event(sys, cfg, EvDisconnect{1, 1.0}));
  }
}

TEST_CASE("box percolation event") {
  Region r = Region::custom(
      2, {coord2(0, 0), coord2(1, 0), coord2(0, 1), coord2(1, 1)}, true);
  RcParams params;
  System sys = compile_system(r, params, BoundaryCondition::free());
  ExplicitConfig cfg(static_cast<std::int64_t>(sys.bonds.size()));
  CHECK_FALSE(eval_event(sys, cfg, EvBoxPerc{}));
  close_bond(sys, cfg, {coord2(-1, 0), 0});
  cfg.set_open(sys.sbond_index(r.bond_index({coord2(-1, 0), 0})), true);
  CHECK(eval_event(sys, cfg, EvBoxPerc{}));

  // connecting to the far corner through inside bonds only is not enough
  ExplicitConfig inner(static_cast<std::int64_t>(sys.bonds.size()));
  inner.set_open(sys.sbond_index(r.bond_index({coord2(0, 0), 0})), true);
  inner.set_open(sys.sbond_index(r.bond_index({coord2(1, 0), 1})), true);
  CHECK_FALSE(eval_event(sys, inner, EvBoxPerc{}));
}

TEST_CASE("seed plaque events") {
  System sys = block_system(2, 3);
  ExplicitConfig cfg = all_open(sys);
  EvSeedPresent seed{coord3(0, 0, 1), 2, 1};
  CHECK(eval_event(sys, cfg, seed));
  // closing a vertical bond near the plaque does not touch it
  close_bond(sys, cfg, {coord3(0, 0, 1), 2});
  CHECK(eval_event(sys, cfg, seed));
  // closing one in-plane plaque bond kills it
  close_bond(sys, cfg, {coord3(0, 0, 1), 1});
  CHECK_FALSE(eval_event(sys, cfg, seed));

  CHECK(plaque_sites(coord3(0, 0, 1), 2, 1, 3).size() == 9);
  CHECK(plaque_sites(coord3(0, 0, 1), 2, 2, 3).size() == 25);
  CHECK(plaque_sites(coord3(0, 0, 1), 0, 1, 3).size() == 9);
}

TEST_CASE("block reach stays strictly within the block") {
  // l = 2, h = 3: a path along the x = +2 face uses no interior bond
  std::set<std::uint64_t> keys;
  for (int z = 0; z < 3; ++z) {
    keys.insert(bond_key({coord3(2, 0, z), 2}));
  }
  BondOracle face_only = set_oracle(keys);
  std::vector<Coord> from_face =
      block_reach(face_only, 2, 3, 3, {coord3(2, 0, 0)});
  CHECK(from_face.size() == 1);

  // one step inward makes the same climb legal
  std::set<std::uint64_t> keys2;
  for (int z = 0; z < 3; ++z) {
    keys2.insert(bond_key({coord3(1, 0, z), 2}));
  }
  BondOracle inner_col = set_oracle(keys2);
  std::vector<Coord> from_inner =
      block_reach(inner_col, 2, 3, 3, {coord3(1, 0, 0)});
  CHECK(from_inner.size() == 4);
  std::set<std::uint64_t> got;
  for (const Coord& c : from_inner) got.insert(site_key(c));
  CHECK(got.count(site_key(coord3(1, 0, 3))) == 1);
}

TEST_CASE("occupied block detector") {
  const int K = 1, l = 2, h = 4, d = 3;
  BondOracle always = [](const Bond&) { return true; };
  BondOracle never = [](const Bond&) { return false; };

  CHECK(block_occupied(always, K, l, h, d, root_plaque_sites(K, d)));
  CHECK_FALSE(block_occupied(never, K, l, h, d, root_plaque_sites(K, d)));

  // cutting every vertical bond below the top face starves all top seeds
  BondOracle cut_top = [&](const Bond& b) {
    return !(b.axis == d - 1 && b.w[d - 1] == h - 1);
  };
  CHECK_FALSE(block_occupied(cut_top, K, l, h, d, root_plaque_sites(K, d)));

  // closing every in-plane bond of the side faces starves the side seeds
  BondOracle cut_sides = [&](const Bond& b) {
    auto [u, v] = Region::bond_sites(b);
    for (int a = 0; a + 1 < d; ++a) {
      if (std::abs(u[a]) == l && std::abs(v[a]) == l) return false;
    }
    return true;
  };
  CHECK_FALSE(block_occupied(cut_sides, K, l, h, d, root_plaque_sites(K, d)));

  // strictly-within reach cannot touch the top edge ring or the face
  // corners: 9 of 25 top sites, 9 sites on each of the 4 side faces
  CHECK(count_Y(always, K, l, h, d) == 9);
  CHECK(count_Y(never, K, l, h, d) == 0);
  CHECK(count_X(always, K, l, h, d) == 4 * (2 * l - 1) * (h - 1));
  CHECK(count_X(never, K, l, h, d) == 0);

  CHECK_THROWS_AS(count_Y(always, 1, 0, 4, d), std::invalid_argument);
  CHECK_THROWS_AS(count_Y(always, 1, 2, 1, d), std::invalid_argument);
}

TEST_CASE("block events through a system") {
  const int K = 1, l = 2, h = 4;
  System sys = block_system(l, h);
  ExplicitConfig cfg = all_open(sys);
  EvOccupied occ{K, l, h, Coord{}, Orientation::North};
  CHECK(eval_event(sys, cfg, occ));
  CHECK(eval_event(sys, cfg, EvTopSeed{K, l, h, 0, Coord{}, Orientation::North}));
  for (int j = 1; j <= 4; ++j) {
    CHECK(eval_event(sys, cfg, EvTopSeed{K, l, h, j, Coord{}, Orientation::North}));
  }
  for (int j = 1; j <= 8; ++j) {
    CHECK(eval_event(sys, cfg, EvSideSeed{K, l, h, j, Coord{}, Orientation::North}));
  }

  // cut the final vertical layer: every top subfacet goes dark
  for (int x = -l; x <= l; ++x) {
    for (int y = -l; y <= l; ++y) {
      close_bond(sys, cfg, {coord3(x, y, h - 1), 2});
    }
  }
  CHECK_FALSE(eval_event(sys, cfg, EvTopSeed{K, l, h, 0, Coord{}, Orientation::North}));
  CHECK_FALSE(eval_event(sys, cfg, occ));
  CHECK(eval_event(sys, cfg, EvSideSeed{K, l, h, 0, Coord{}, Orientation::North}));
}

TEST_CASE("estimate matches enumeration on a wired square") {
  Region r = Region::custom(
      2, {coord2(0, 0), coord2(1, 0), coord2(0, 1), coord2(1, 1)}, true);
  RcParams params;
  params.q = 2.0;
  params.p = 0.45;
  System sys = compile_system(r, params, BoundaryCondition::wired());
  ExactFK fk = enumerate_exact(sys);
  EventSpec spec = EvTwoPoint{coord2(0, 0), coord2(1, 1)};
  double exact = fk.event_prob([&](const ExplicitConfig& c) {
    return eval_event(sys, c, spec);
  });
  SamplerCfg scfg;
  scfg.sweeps = 20000;
  scfg.burn_in = 200;
  scfg.thinning = 2;
  scfg.replicas = 2;
  scfg.seed = 5;
  Estimate est = estimate_event(sys, scfg, spec);
  CHECK(est.ci_valid());
  CHECK(std::abs(est.value - exact) < 6 * est.half_width + 1e-3);
  CHECK(est.method.find(event_name(spec)) == 0);
}

TEST_CASE("crossing probability increases with p") {
  Region rect = build_rectangle(1, 1.0, 0, 2, false);
  auto exact_at = [&](double p) {
    RcParams params;
    params.p = p;
    System sys = compile_system(rect, params, BoundaryCondition::free());
    ExactFK fk = enumerate_exact(sys);
    return fk.event_prob([&](const ExplicitConfig& c) {
      return eval_event(sys, c, EvFaceCross{1, 1.0});
    });
  };
  double lo = exact_at(0.3);
  double hi = exact_at(0.6);
  CHECK(lo < hi);
  CHECK(exact_at(0.0) == 0.0);
  CHECK(exact_at(1.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("surface tension at the extremes") {
  RcParams params;
  params.q = 1.0;
  SamplerCfg scfg;
  scfg.sweeps = 4000;
  scfg.burn_in = 100;
  scfg.seed = 3;

  params.p = 0.05;
  TensionResult low = surface_tension_estimate(2, 1.0, 0, 2, params,
                                               BoundaryCondition::free(), scfg);
  CHECK_FALSE(low.infinite);
  CHECK(low.method == "direct");
  CHECK(low.tau >= 0.0);
  CHECK(low.tau < 0.1);
  CHECK(low.p_hat > 0.9);

  params.p = 1.0;
  TensionResult top = surface_tension_estimate(2, 1.0, 0, 2, params,
                                               BoundaryCondition::free(), scfg);
  CHECK(top.infinite);
  CHECK(top.method == "direct");
  CHECK(std::isinf(top.tau));
  CHECK(top.lo > 0.0);
}

TEST_CASE("direct and interpolation modes agree") {
  RcParams params;
  params.q = 1.0;
  params.p = 0.5;
  SamplerCfg scfg;
  scfg.sweeps = 6000;
  scfg.burn_in = 200;
  scfg.replicas = 2;
  scfg.seed = 11;
  TensionResult dir = surface_tension_estimate(
      2, 1.0, 0, 2, params, BoundaryCondition::free(), scfg,
      TensionMode::Direct);
  TensionResult itp = surface_tension_estimate(
      2, 1.0, 0, 2, params, BoundaryCondition::free(), scfg,
      TensionMode::Interpolation);
  REQUIRE_FALSE(dir.infinite);
  REQUIRE_FALSE(itp.infinite);
  CHECK(itp.method == "interpolation");
  CHECK(std::abs(dir.tau - itp.tau) < 0.1);
  CHECK(itp.tau > 0.0);
}

TEST_CASE("mixing gap vanishes when it must") {
  SamplerCfg scfg;
  scfg.sweeps = 4000;
  scfg.burn_in = 100;
  scfg.seed = 9;

  // the boundary intensity must stay in (0, p]
  CHECK_THROWS_AS(mixing_gap(1, 0.0, 0.5, 2.0, 2, scfg),
                  std::invalid_argument);
  CHECK_THROWS_AS(mixing_gap(1, 0.8, 0.5, 2.0, 2, scfg),
                  std::invalid_argument);

  // q = 1: marginals equal the intensity under every boundary condition
  MixingGapResult indep = mixing_gap(1, 0.4, 0.6, 1.0, 2, scfg);
  CHECK(indep.K == 1);
  CHECK(std::abs(indep.wired.value - 0.4) <
        6 * indep.wired.half_width + 1e-3);
  CHECK(std::abs(indep.free_bc.value - 0.4) <
        6 * indep.free_bc.half_width + 1e-3);
  CHECK(std::abs(indep.gap) < 6 * indep.half_width + 5e-3);
}
