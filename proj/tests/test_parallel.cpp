#include <vector>

#include "doctest.h"
#include "rclab/observables.hpp"
#include "rclab/threshold.hpp"

using namespace rclab;

namespace {

bool same_estimate(const Estimate& a, const Estimate& b) {
  if (a.value != b.value || a.half_width != b.half_width) return false;
  if (a.n_samples != b.n_samples || a.batches != b.batches) return false;
  if (a.batch_means.size() != b.batch_means.size()) return false;
  for (std::size_t i = 0; i < a.batch_means.size(); ++i) {
    if (a.batch_means[i] != b.batch_means[i]) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("for_each_replica fills slots identically in both modes") {
  const int n = 23;
  std::vector<int> serial(n), parallel(n);
  for_each_replica(ExecMode::Serial, n, [&](int i) { serial[i] = i * i; });
  for_each_replica(ExecMode::Parallel, n, [&](int i) { parallel[i] = i * i; });
  CHECK(serial == parallel);
}

TEST_CASE("parallel mode propagates exceptions") {
  CHECK_THROWS_AS(
      for_each_replica(ExecMode::Parallel, 8,
                       [](int i) {
                         if (i == 5) throw std::runtime_error("boom");
                       }),
      std::runtime_error);
}

TEST_CASE("event estimates are identical across modes and worker counts") {
  Region r = build_rectangle(2, 1.0, 0, 3, true);
  RcParams params;
  params.q = 2.0;
  params.p = 0.5;
  System sys = compile_system(r, params, BoundaryCondition::free());

  SamplerCfg scfg;
  scfg.sweeps = 600;
  scfg.burn_in = 30;
  scfg.replicas = 6;
  scfg.seed = 19;
  scfg.exec = ExecMode::Serial;
  Estimate base = estimate_event(sys, scfg, EvFaceCross{2, 1.0});

  scfg.exec = ExecMode::Parallel;
  for (int workers : {1, 2, 4, 8}) {
    set_worker_count(workers);
    Estimate par = estimate_event(sys, scfg, EvFaceCross{2, 1.0});
    CHECK(same_estimate(base, par));
  }
  set_worker_count(0);
}

TEST_CASE("tension estimates are identical across modes") {
  RcParams params;
  params.q = 1.0;
  params.p = 0.5;
  SamplerCfg scfg;
  scfg.sweeps = 1200;
  scfg.burn_in = 50;
  scfg.replicas = 3;
  scfg.seed = 23;

  scfg.exec = ExecMode::Serial;
  TensionResult ser = surface_tension_estimate(
      2, 1.0, 0, 2, params, BoundaryCondition::free(), scfg,
      TensionMode::Interpolation);
  scfg.exec = ExecMode::Parallel;
  set_worker_count(4);
  TensionResult par = surface_tension_estimate(
      2, 1.0, 0, 2, params, BoundaryCondition::free(), scfg,
      TensionMode::Interpolation);
  CHECK(ser.tau == par.tau);
  CHECK(ser.lo == par.lo);
  CHECK(ser.hi == par.hi);
  CHECK(ser.n_samples == par.n_samples);
}

TEST_CASE("slab scores are identical across modes") {
  RcParams params;
  params.q = 1.0;
  params.p = 0.35;
  SamplerCfg scfg;
  scfg.sweeps = 500;
  scfg.burn_in = 20;
  scfg.replicas = 4;
  scfg.seed = 41;

  scfg.exec = ExecMode::Serial;
  SlabConnectivity ser = slab_connectivity(1, 2, 3, params, scfg);
  scfg.exec = ExecMode::Parallel;
  set_worker_count(3);
  SlabConnectivity par = slab_connectivity(1, 2, 3, params, scfg);
  CHECK(ser.score == par.score);
  CHECK(ser.lo == par.lo);
  CHECK(ser.hi == par.hi);
  for (int i = 0; i < 8; ++i) {
    CHECK(same_estimate(ser.probes[i], par.probes[i]));
  }
}

TEST_CASE("mixing gap is identical across modes") {
  SamplerCfg scfg;
  scfg.sweeps = 800;
  scfg.burn_in = 40;
  scfg.replicas = 2;
  scfg.seed = 47;

  scfg.exec = ExecMode::Serial;
  MixingGapResult ser = mixing_gap(1, 0.3, 0.5, 2.0, 2, scfg);
  scfg.exec = ExecMode::Parallel;
  set_worker_count(4);
  MixingGapResult par = mixing_gap(1, 0.3, 0.5, 2.0, 2, scfg);
  CHECK(ser.gap == par.gap);
  CHECK(same_estimate(ser.wired, par.wired));
  CHECK(same_estimate(ser.free_bc, par.free_bc));
}
