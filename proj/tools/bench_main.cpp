// Replica-throughput benchmark: the same estimate on the serial reference
// path and on the OpenMP path, with a bit-level comparison of the results.

#include <chrono>
#include <cstdio>
#include <string>

#include "CLI11.hpp"

#include "rclab/observables.hpp"
#include "rclab/sampler.hpp"

using namespace rclab;

namespace {

struct Timed {
  Estimate est;
  double seconds = 0;
};

Timed run_once(const Region& region, const RcParams& params,
               const SamplerCfg& cfg, const EventSpec& spec) {
  auto t0 = std::chrono::steady_clock::now();
  Timed out;
  out.est = estimate_event(region, params, BoundaryCondition::free(), spec, cfg);
  auto t1 = std::chrono::steady_clock::now();
  out.seconds = std::chrono::duration<double>(t1 - t0).count();
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  int N = 8;
  int d = 3;
  double q = 2.0;
  double p = 0.55;
  int replicas = 8;
  long long sweeps = 200;
  int threads = 0;

  CLI::App app{"serial reference vs parallel replica benchmark"};
  app.add_option("--N", N, "rectangle base radius");
  app.add_option("--dim", d, "lattice dimension");
  app.add_option("--q", q, "cluster weight");
  app.add_option("--p", p, "bond intensity");
  app.add_option("--replicas", replicas, "independent chains");
  app.add_option("--sweeps", sweeps, "sweeps per chain");
  app.add_option("--threads", threads, "worker threads (0 = library default)");
  CLI11_PARSE(app, argc, argv);

  Region region = build_rectangle(N, 1.0, 0, d, true);
  RcParams params;
  params.q = q;
  params.p = p;
  EventSpec spec = EvFaceCross{N, 1.0};

  SamplerCfg cfg;
  cfg.sweeps = sweeps;
  cfg.burn_in = sweeps / 4;
  cfg.replicas = replicas;
  cfg.seed = 7;

  if (threads > 0) set_worker_count(threads);

  cfg.exec = ExecMode::Serial;
  Timed serial = run_once(region, params, cfg, spec);
  cfg.exec = ExecMode::Parallel;
  Timed parallel = run_once(region, params, cfg, spec);

  bool identical = serial.est.value == parallel.est.value &&
                   serial.est.half_width == parallel.est.half_width &&
                   serial.est.batch_means == parallel.est.batch_means;

  std::printf("event: face crossing, N=%d d=%d q=%g p=%g  replicas=%d sweeps=%lld\n",
              N, d, q, p, replicas, sweeps);
  std::printf("workers: %d\n", worker_count());
  std::printf("%-10s %12s %14s\n", "mode", "seconds", "estimate");
  std::printf("%-10s %12.3f %14.6f\n", "serial", serial.seconds,
              serial.est.value);
  std::printf("%-10s %12.3f %14.6f\n", "parallel", parallel.seconds,
              parallel.est.value);
  if (parallel.seconds > 0) {
    std::printf("speedup: %.2fx\n", serial.seconds / parallel.seconds);
  }
  std::printf("results identical: %s\n", identical ? "yes" : "NO");
  return identical ? 0 : 1;
}
