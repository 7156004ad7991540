#pragma once

#include <functional>

#include "rclab/estimate.hpp"
#include "rclab/parallel.hpp"
#include "rclab/rcmodel.hpp"

namespace rclab {

enum class Engine { Auto, HeatBath, ClusterES, Product };

const char* engine_name(Engine e);

// Auto picks: product filling for q = 1, cluster updates when the system
// supports them and q is an integer, single-bond heat bath otherwise.
// Requesting an engine the system cannot support is a configuration error.
Engine resolve_engine(const System& sys, Engine requested);

struct SamplerCfg {
  std::int64_t sweeps = 1000;
  std::int64_t burn_in = 100;
  std::int64_t thinning = 1;
  int replicas = 1;
  // First replica id; streams are derived from the id, so a run of replicas
  // [0,k) equals the pooled runs [0,j) and [j,k) exactly.
  int replica_base = 0;
  std::uint64_t seed = 1;
  Engine engine = Engine::Auto;
  ExecMode exec = ExecMode::Serial;

  void validate() const;
};

class Chain {
 public:
  Chain(const System& sys, std::uint64_t seed, std::uint64_t stream,
        Engine engine = Engine::Auto);

  void sweep();
  const ExplicitConfig& config() const { return cfg_; }
  ExplicitConfig& config() { return cfg_; }
  Engine engine() const { return engine_; }
  const System& system() const { return *sys_; }

 private:
  void heat_bath_sweep();
  void cluster_step();
  void product_sweep();

  const System* sys_;
  RngStream rng_;
  Engine engine_;
  int q_int_ = 1;
  ExplicitConfig cfg_;
  ClusterIndex uf_;
  std::vector<std::int32_t> color_;
};

std::uint64_t chain_stream(int replica);

// Drives one replica: burn-in, then `sweeps` updates, visiting the state
// every `thinning` sweeps.
void sample_chain(const System& sys, const SamplerCfg& cfg, int replica,
                  const std::function<void(const ExplicitConfig&)>& visit);

// Replica-parallel estimators. Batch means are concatenated in replica
// order, so the estimate does not depend on the worker count. The callback
// runs concurrently under ExecMode::Parallel and must be thread-safe.
Estimate sample_event_probability(
    const System& sys, const SamplerCfg& cfg,
    const std::function<bool(const System&, const ExplicitConfig&)>& ev);

Estimate sample_event_mean(
    const System& sys, const SamplerCfg& cfg,
    const std::function<double(const System&, const ExplicitConfig&)>& f);

}  // namespace rclab
