#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "rclab/enumerate.hpp"
#include "rclab/sampler.hpp"

using namespace rclab;

namespace {

Region square4(bool ext = false) {
  return Region::custom(
      2, {coord2(0, 0), coord2(1, 0), coord2(0, 1), coord2(1, 1)}, ext);
}

System make_sys(double q, double p, BoundaryCondition bc, bool ext = false) {
  RcParams params;
  params.q = q;
  params.p = p;
  return compile_system(square4(ext), params, bc);
}

// Total variation distance between the chain's visit histogram and the
// enumerated distribution.
double tv_against_exact(const System& sys, Engine engine, std::uint64_t seed) {
  ExactFK fk = enumerate_exact(sys);
  std::size_t n_states = std::size_t{1} << sys.bonds.size();
  std::vector<std::int64_t> hits(n_states, 0);
  SamplerCfg cfg;
  cfg.sweeps = 120000;
  cfg.burn_in = 200;
  cfg.thinning = 2;
  cfg.seed = seed;
  cfg.engine = engine;
  std::int64_t total = 0;
  sample_chain(sys, cfg, 0, [&](const ExplicitConfig& c) {
    ++hits[c.words()[0]];
    ++total;
  });
  double tv = 0;
  for (std::size_t m = 0; m < n_states; ++m) {
    tv += std::abs(static_cast<double>(hits[m]) / total - fk.prob(m));
  }
  return tv / 2;
}

}  // namespace

TEST_CASE("engine resolution") {
  System q1 = make_sys(1.0, 0.4, BoundaryCondition::free());
  CHECK(resolve_engine(q1, Engine::Auto) == Engine::Product);
  CHECK(resolve_engine(q1, Engine::ClusterES) == Engine::ClusterES);
  CHECK(resolve_engine(q1, Engine::HeatBath) == Engine::HeatBath);

  System q2 = make_sys(2.0, 0.4, BoundaryCondition::free());
  CHECK(q2.sw_ok);
  CHECK(resolve_engine(q2, Engine::Auto) == Engine::ClusterES);
  CHECK_THROWS_AS(resolve_engine(q2, Engine::Product), std::invalid_argument);

  System qfrac = make_sys(2.5, 0.4, BoundaryCondition::free());
  CHECK(resolve_engine(qfrac, Engine::Auto) == Engine::HeatBath);
  CHECK_THROWS_AS(resolve_engine(qfrac, Engine::ClusterES),
                  std::invalid_argument);

  Region box = build_box(1, 2, true);
  RcParams params;
  params.q = 2.0;
  System two_classes = compile_system(
      box, params,
      BoundaryCondition::mixed({{coord2(-2, 0)}, {coord2(2, 0)}}));
  CHECK_FALSE(two_classes.sw_ok);
  CHECK(resolve_engine(two_classes, Engine::Auto) == Engine::HeatBath);
  CHECK_THROWS_AS(resolve_engine(two_classes, Engine::ClusterES),
                  std::invalid_argument);

  CHECK(engine_name(Engine::Product) == doctest::String("product"));
  CHECK(engine_name(Engine::ClusterES) == doctest::String("cluster"));
}

TEST_CASE("sampler config validation") {
  SamplerCfg cfg;
  CHECK_NOTHROW(cfg.validate());
  SamplerCfg bad = cfg;
  bad.sweeps = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.burn_in = -1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.thinning = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.replicas = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = cfg;
  bad.replica_base = -1;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("chains are reproducible and streams decouple") {
  System sys = make_sys(2.0, 0.5, BoundaryCondition::free());
  Chain a(sys, 42, chain_stream(0));
  Chain b(sys, 42, chain_stream(0));
  Chain c(sys, 42, chain_stream(1));
  bool diverged = false;
  for (int s = 0; s < 50; ++s) {
    a.sweep();
    b.sweep();
    c.sweep();
    CHECK(a.config() == b.config());
    if (!(a.config() == c.config())) diverged = true;
  }
  CHECK(diverged);
}

TEST_CASE("product boundary values") {
  System ones = make_sys(1.0, 1.0, BoundaryCondition::free());
  Chain hot(ones, 3, 0);
  hot.sweep();
  CHECK(hot.config().count_open() == 4);
  System zeros = make_sys(1.0, 0.0, BoundaryCondition::free());
  Chain cold(zeros, 3, 0);
  cold.config().fill(true);
  cold.sweep();
  CHECK(cold.config().count_open() == 0);
}

TEST_CASE("all engines hit the exact distribution at q = 1") {
  System sys = make_sys(1.0, 0.3, BoundaryCondition::free());
  CHECK(tv_against_exact(sys, Engine::Product, 11) < 0.02);
  CHECK(tv_against_exact(sys, Engine::HeatBath, 12) < 0.02);
  CHECK(tv_against_exact(sys, Engine::ClusterES, 13) < 0.02);
}

TEST_CASE("heat bath and cluster agree with enumeration at q = 2") {
  System sys = make_sys(2.0, 0.5, BoundaryCondition::free());
  CHECK(tv_against_exact(sys, Engine::HeatBath, 21) < 0.02);
  CHECK(tv_against_exact(sys, Engine::ClusterES, 22) < 0.02);
}

TEST_CASE("heat bath covers fractional q") {
  System sys = make_sys(2.5, 0.45, BoundaryCondition::free());
  CHECK(tv_against_exact(sys, Engine::HeatBath, 31) < 0.02);
}

TEST_CASE("wired estimates match enumeration") {
  System sys = make_sys(2.0, 0.45, BoundaryCondition::wired(), true);
  REQUIRE(sys.bonds.size() == 12);
  ExactFK fk = enumerate_exact(sys);
  Coord ghost_site = coord2(-1, 0);
  auto ev = [&](const System& s, const ExplicitConfig& c) {
    return connected(s, c, {coord2(0, 0)}, {ghost_site});
  };
  double exact = fk.event_prob([&](const ExplicitConfig& c) {
    return connected(sys, c, {coord2(0, 0)}, {ghost_site});
  });

  SamplerCfg cfg;
  cfg.sweeps = 20000;
  cfg.burn_in = 200;
  cfg.thinning = 2;
  cfg.replicas = 2;
  cfg.seed = 99;
  for (Engine e : {Engine::HeatBath, Engine::ClusterES}) {
    cfg.engine = e;
    Estimate est = sample_event_probability(sys, cfg, ev);
    CHECK(est.ci_valid());
    CHECK(std::abs(est.value - exact) < 6 * est.half_width + 1e-3);
  }
}

TEST_CASE("batching layout") {
  System sys = make_sys(1.0, 0.5, BoundaryCondition::free());
  auto density = [](const System& s, const ExplicitConfig& c) {
    return static_cast<double>(c.count_open()) / s.bonds.size();
  };

  SamplerCfg small;
  small.sweeps = 100;
  small.thinning = 10;
  small.replicas = 2;
  Estimate e1 = sample_event_mean(sys, small, density);
  CHECK(e1.batches == 20);  // 10 kept caps per-replica batches at 10
  CHECK(e1.n_samples == 20);
  CHECK_FALSE(e1.ci_valid());
  CHECK(e1.method == std::string("mcmc-mean"));

  SamplerCfg wide;
  wide.sweeps = 64;
  Estimate e2 = sample_event_mean(sys, wide, density);
  CHECK(e2.batches == 32);
  CHECK(e2.n_samples == 64);
  CHECK(e2.ci_valid());
}

TEST_CASE("thinning controls visit count") {
  System sys = make_sys(1.0, 0.5, BoundaryCondition::free());
  SamplerCfg cfg;
  cfg.sweeps = 5;
  cfg.thinning = 2;
  cfg.burn_in = 0;
  int visits = 0;
  sample_chain(sys, cfg, 0, [&](const ExplicitConfig&) { ++visits; });
  CHECK(visits == 2);

  SamplerCfg starved;
  starved.sweeps = 1;
  starved.thinning = 2;
  CHECK_THROWS_AS(
      sample_event_mean(sys, starved,
                        [](const System&, const ExplicitConfig&) {
                          return 0.0;
                        }),
      estimator_failure);
}

TEST_CASE("replica runs pool exactly") {
  System sys = make_sys(2.0, 0.5, BoundaryCondition::free());
  auto ev = [](const System& s, const ExplicitConfig& c) {
    return connected(s, c, {coord2(0, 0)}, {coord2(1, 1)});
  };
  SamplerCfg joint;
  joint.sweeps = 2000;
  joint.burn_in = 50;
  joint.replicas = 4;
  joint.seed = 7;
  Estimate whole = sample_event_probability(sys, joint, ev);

  SamplerCfg head = joint;
  head.replicas = 2;
  SamplerCfg tail = joint;
  tail.replica_base = 2;
  tail.replicas = 2;
  Estimate a = sample_event_probability(sys, head, ev);
  Estimate b = sample_event_probability(sys, tail, ev);

  std::vector<double> pooled = a.batch_means;
  pooled.insert(pooled.end(), b.batch_means.begin(), b.batch_means.end());
  REQUIRE(pooled.size() == whole.batch_means.size());
  for (std::size_t i = 0; i < pooled.size(); ++i) {
    CHECK(pooled[i] == whole.batch_means[i]);
  }
  Estimate merged = merge_estimates({a, b}, a.method);
  CHECK(merged.value == whole.value);
  CHECK(merged.half_width == whole.half_width);
  CHECK(merged.n_samples == whole.n_samples);

  // repeat runs are bitwise stable
  Estimate again = sample_event_probability(sys, joint, ev);
  CHECK(again.value == whole.value);
  CHECK(again.half_width == whole.half_width);
}
