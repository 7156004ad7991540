#include <cmath>
#include <functional>
#include <queue>
#include <random>
#include <set>
#include <vector>

#include "doctest.h"
#include "rclab/rcmodel.hpp"

using namespace rclab;

namespace {

ExplicitConfig filled(const System& sys, bool open) {
  ExplicitConfig cfg(static_cast<std::int64_t>(sys.bonds.size()));
  cfg.fill(open);
  return cfg;
}

// Breadth-first oracle over the compiled node graph: component labels and
// the counted-cluster count, independent of the union-find path.
struct BfsOracle {
  std::vector<std::int64_t> comp;
  std::int64_t counted = 0;

  BfsOracle(const System& sys, const ExplicitConfig& cfg)
      : comp(sys.n_nodes, -1) {
    std::vector<std::vector<std::int64_t>> adj(sys.n_nodes);
    for (std::size_t i = 0; i < sys.bonds.size(); ++i) {
      if (!cfg.open(static_cast<std::int64_t>(i))) continue;
      adj[sys.bonds[i].u].push_back(sys.bonds[i].v);
      adj[sys.bonds[i].v].push_back(sys.bonds[i].u);
    }
    std::int64_t next = 0;
    for (std::int64_t s = 0; s < sys.n_nodes; ++s) {
      if (comp[s] >= 0) continue;
      bool any_counted = false;
      std::queue<std::int64_t> q;
      q.push(s);
      comp[s] = next;
      while (!q.empty()) {
        std::int64_t v = q.front();
        q.pop();
        if (sys.node_counted[v]) any_counted = true;
        for (std::int64_t w : adj[v]) {
          if (comp[w] < 0) {
            comp[w] = next;
            q.push(w);
          }
        }
      }
      if (any_counted) ++counted;
      ++next;
    }
  }
};

}  // namespace

TEST_CASE("cluster count basics") {
  Region box = build_box(1, 2, false);  // 3x3, 12 bonds
  RcParams params;
  System sys = compile_system(box, params, BoundaryCondition::free());

  CHECK(cluster_count(sys, filled(sys, false)) == 9);
  CHECK(cluster_count(sys, filled(sys, true)) == 1);
  CHECK(cluster_count(sys, filled(sys, false)) -
            cluster_count(sys, filled(sys, true)) ==
        box.n_vertices() - 1);
}

TEST_CASE("two horizontal bonds in a 2x2 box make two clusters") {
  Region r = Region::custom(
      2, {coord2(0, 0), coord2(1, 0), coord2(0, 1), coord2(1, 1)}, false);
  RcParams params;
  System sys = compile_system(r, params, BoundaryCondition::free());
  REQUIRE(sys.bonds.size() == 4);
  ExplicitConfig cfg(4);
  for (std::size_t i = 0; i < sys.bonds.size(); ++i) {
    Bond b = r.bond_at(sys.bonds[i].region_bid);
    if (b.axis == 0) cfg.set_open(static_cast<std::int64_t>(i), true);
  }
  CHECK(cfg.count_open() == 2);
  CHECK(cluster_count(sys, cfg) == 2);
}

TEST_CASE("connectivity under boundary conditions") {
  Region box = build_box(1, 2, true);
  RcParams params;

  System fsys = compile_system(box, params, BoundaryCondition::free());
  CHECK(connected(fsys, filled(fsys, true), {coord2(-1, -1)},
                  {coord2(1, 1)}));
  CHECK_FALSE(connected(fsys, filled(fsys, false), {coord2(-1, -1)},
                        {coord2(1, 1)}));

  System wsys = compile_system(box, params, BoundaryCondition::wired());
  // boundary sites reach each other through the ghost with no open bond
  CHECK(connected(wsys, filled(wsys, false), {coord2(-2, 0)},
                  {coord2(2, 0)}));
  CHECK_FALSE(connected(wsys, filled(wsys, false), {coord2(0, 0)},
                        {coord2(2, 0)}));
}

TEST_CASE("mixed classes are pre-connected") {
  Region box = build_box(1, 2, true);
  RcParams params;
  BoundaryCondition bc = BoundaryCondition::mixed(
      {{coord2(-2, 0), coord2(2, 0)}, {coord2(0, -2)}});
  System sys = compile_system(box, params, bc);
  CHECK(connected(sys, filled(sys, false), {coord2(-2, 0)}, {coord2(2, 0)}));
  CHECK_FALSE(
      connected(sys, filled(sys, false), {coord2(-2, 0)}, {coord2(0, -2)}));
  // a class ghost is counted even when no inside vertex joins it
  CHECK(cluster_count(sys, filled(sys, false)) == 9 + 2);
}

TEST_CASE("connected_within honors the bond subset") {
  Region ambient = build_box(2, 2, false);
  Region sub =
      Region::box(2, coord2(0, 0), coord2(2, 1), RegionKind::Box, false);
  // vertical detour leaves the subset: open path 0,0 -> 0,2 -> 2,2 -> 2,1
  std::set<std::uint64_t> open_bonds;
  auto add = [&](Coord w, int axis) { open_bonds.insert(bond_key({w, axis})); };
  add(coord2(0, 0), 1);
  add(coord2(0, 1), 1);
  add(coord2(0, 2), 0);
  add(coord2(1, 2), 0);
  add(coord2(2, 1), 1);
  auto open = [&](const Bond& b) {
    return open_bonds.count(bond_key(b)) > 0;
  };

  CHECK(connected_within(ambient, open, sub, {coord2(0, 0)}, {coord2(0, 0)}));
  CHECK_FALSE(
      connected_within(ambient, open, sub, {coord2(0, 0)}, {coord2(2, 1)}));
  // the same endpoints join once the detour is not needed
  add(coord2(0, 0), 0);
  add(coord2(1, 0), 0);
  add(coord2(2, 0), 1);
  CHECK(connected_within(ambient, open, sub, {coord2(0, 0)}, {coord2(2, 1)}));
}

TEST_CASE("straight vertical path connects through a block") {
  int l = 2, h = 3, d = 3;
  Region block = build_block(l, h, d, false);
  std::set<std::uint64_t> open_bonds;
  for (int z = 0; z < h; ++z) {
    open_bonds.insert(bond_key({coord3(1, -1, z), 2}));
  }
  auto open = [&](const Bond& b) {
    return open_bonds.count(bond_key(b)) > 0;
  };
  CHECK(connected_within(block, open, block, {coord3(1, -1, 0)},
                         {coord3(1, -1, h)}));
  CHECK_FALSE(connected_within(block, open, block, {coord3(1, -1, 0)},
                               {coord3(0, 0, h)}));
}

TEST_CASE("log weight") {
  Region pair =
      Region::custom(2, {coord2(0, 0), coord2(1, 0)}, false);
  RcParams params;
  params.q = 2.0;
  params.p = 0.5;
  System sys = compile_system(pair, params, BoundaryCondition::free());
  REQUIRE(sys.bonds.size() == 1);

  ExplicitConfig open1(1);
  open1.set_open(0, true);
  // log(1/2) for the open bond plus log 2 for the single joined cluster
  CHECK(log_weight(sys, open1) == doctest::Approx(0.0).epsilon(1e-12));

  ExplicitConfig closed(1);
  // log(1/2) for the closed bond plus 2 log 2 for two singletons
  CHECK(log_weight(sys, closed) ==
        doctest::Approx(std::log(0.5) + 2 * std::log(2.0)).epsilon(1e-12));

  // q = 1 strips the cluster term: differences reduce to bond terms
  RcParams q1;
  q1.q = 1.0;
  q1.p = 0.3;
  System s1 = compile_system(pair, q1, BoundaryCondition::free());
  ExplicitConfig o(1), c(1);
  o.set_open(0, true);
  CHECK(log_weight(s1, o) - log_weight(s1, c) ==
        doctest::Approx(std::log(0.3) - std::log(0.7)).epsilon(1e-12));

  // zero-intensity open bond carries no mass
  RcParams zero;
  zero.q = 1.0;
  zero.p = 0.0;
  System sz = compile_system(pair, zero, BoundaryCondition::free());
  CHECK(log_weight(sz, o) == kMinusInf);
  CHECK(log_weight(sz, c) == 0.0);
}

TEST_CASE("tree weight ratio") {
  // path on four vertices: 3 bonds, closed has 4 clusters, open has 1
  Region path = Region::custom(2,
                               {coord2(0, 0), coord2(1, 0), coord2(2, 0),
                                coord2(3, 0)},
                               false);
  RcParams params;
  params.q = 3.0;
  params.p = 0.4;
  System sys = compile_system(path, params, BoundaryCondition::free());
  REQUIRE(sys.bonds.size() == 3);
  double lw_closed = log_weight(sys, filled(sys, false));
  double lw_open = log_weight(sys, filled(sys, true));
  double expect = 3 * (std::log(0.6) - std::log(0.4)) + 3 * std::log(3.0);
  CHECK(lw_closed - lw_open == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("union-find agrees with BFS on random systems") {
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int trial = 0; trial < 1000; ++trial) {
    int d = 2 + static_cast<int>(rng() % 2);
    bool ext = (rng() % 2) == 0;
    Region r = (rng() % 2) ? build_box(1 + static_cast<int>(rng() % 2), d, ext)
                           : build_block(1, 1 + static_cast<int>(rng() % 2), d,
                                         ext);
    BoundaryCondition bc;
    switch (rng() % 3) {
      case 0:
        bc = BoundaryCondition::free();
        break;
      case 1:
        bc = BoundaryCondition::wired();
        break;
      default: {
        // two random exterior sites as a class
        std::vector<Coord> cls;
        for (int a = 0; a < d; ++a) {
          Coord c = r.lo();
          c[a] -= 1;
          cls.push_back(c);
        }
        bc = BoundaryCondition::mixed({cls});
        break;
      }
    }
    RcParams params;
    System sys = compile_system(r, params, bc);
    ExplicitConfig cfg(static_cast<std::int64_t>(sys.bonds.size()));
    double keep = unif(rng);
    for (std::int64_t i = 0; i < cfg.size(); ++i) {
      cfg.set_open(i, unif(rng) < keep);
    }

    BfsOracle oracle(sys, cfg);
    ClusterIndex uf(sys);
    uf.build(cfg);
    CHECK(uf.cluster_count() == oracle.counted);
    for (int probe = 0; probe < 20; ++probe) {
      std::int64_t a = static_cast<std::int64_t>(rng() % sys.n_nodes);
      std::int64_t b = static_cast<std::int64_t>(rng() % sys.n_nodes);
      CHECK(uf.same(a, b) == (oracle.comp[a] == oracle.comp[b]));
    }
  }
}

TEST_CASE("opening one bond drops the count by at most one") {
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Region r = build_box(1, 3, true);
  RcParams params;
  System sys = compile_system(r, params, BoundaryCondition::wired());
  for (int trial = 0; trial < 30; ++trial) {
    ExplicitConfig cfg(static_cast<std::int64_t>(sys.bonds.size()));
    for (std::int64_t i = 0; i < cfg.size(); ++i) {
      cfg.set_open(i, unif(rng) < 0.4);
    }
    std::int64_t base = cluster_count(sys, cfg);
    for (std::int64_t i = 0; i < cfg.size(); ++i) {
      if (cfg.open(i)) continue;
      cfg.set_open(i, true);
      std::int64_t now = cluster_count(sys, cfg);
      cfg.set_open(i, false);
      CHECK(now <= base);
      CHECK(now >= base - 1);
    }
  }
}

TEST_CASE("wired never has more clusters than free") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Region r = build_box(1, 2, true);
  RcParams params;
  System fsys = compile_system(r, params, BoundaryCondition::free());
  System wsys = compile_system(r, params, BoundaryCondition::wired());
  REQUIRE(fsys.bonds.size() == wsys.bonds.size());
  for (int trial = 0; trial < 200; ++trial) {
    ExplicitConfig cfg(static_cast<std::int64_t>(fsys.bonds.size()));
    for (std::int64_t i = 0; i < cfg.size(); ++i) {
      cfg.set_open(i, unif(rng) < 0.5);
    }
    // bond order may differ between compilations; map through region ids
    ExplicitConfig wcfg(static_cast<std::int64_t>(wsys.bonds.size()));
    for (std::size_t i = 0; i < fsys.bonds.size(); ++i) {
      std::int64_t wi = wsys.sbond_index(fsys.bonds[i].region_bid);
      REQUIRE(wi >= 0);
      wcfg.set_open(wi, cfg.open(static_cast<std::int64_t>(i)));
    }
    CHECK(cluster_count(wsys, wcfg) <= cluster_count(fsys, cfg));
  }
}

TEST_CASE("probe_split matches rebuild deltas") {
  std::mt19937 rng(13);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Region r = build_box(1, 2, true);
  RcParams params;
  System sys = compile_system(r, params, BoundaryCondition::wired());
  for (int trial = 0; trial < 200; ++trial) {
    ExplicitConfig cfg(static_cast<std::int64_t>(sys.bonds.size()));
    for (std::int64_t i = 0; i < cfg.size(); ++i) {
      cfg.set_open(i, unif(rng) < 0.5);
    }
    std::int64_t b = static_cast<std::int64_t>(rng() %
                                               sys.bonds.size());
    ExplicitConfig without = cfg;
    without.set_open(b, false);
    ExplicitConfig with = cfg;
    with.set_open(b, true);

    SplitProbe probe = probe_split(sys, cfg, sys.bonds[b].u, sys.bonds[b].v, b);
    BfsOracle oracle(sys, without);
    bool joined =
        oracle.comp[sys.bonds[b].u] == oracle.comp[sys.bonds[b].v];
    CHECK(probe.joined == joined);
    if (!joined) {
      std::int64_t diff =
          cluster_count(sys, without) - cluster_count(sys, with);
      CHECK(probe.delta == diff);
    }
  }
}

TEST_CASE("config oracle reads the explicit configuration") {
  Region r = build_box(1, 2, false);
  RcParams params;
  System sys = compile_system(r, params, BoundaryCondition::free());
  ExplicitConfig cfg(static_cast<std::int64_t>(sys.bonds.size()));
  cfg.set_open(0, true);
  ConfigOracle oracle{&sys, &cfg};
  Bond b0 = r.bond_at(sys.bonds[0].region_bid);
  CHECK(oracle(b0));
  Bond far{coord2(9, 9), 0};
  CHECK_FALSE(oracle(far));
}

TEST_CASE("intensity overrides apply per bond") {
  RcParams params;
  params.q = 1.5;
  params.p = 0.25;
  params.set_override(3, 0.75);
  CHECK(params.intensity(2) == 0.25);
  CHECK(params.intensity(3) == 0.75);
  params.set_override(3, 0.5);
  CHECK(params.intensity(3) == 0.5);
  RcParams bad;
  bad.q = 0.5;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  RcParams badp;
  badp.p = 1.5;
  CHECK_THROWS_AS(badp.validate(), std::invalid_argument);
}
