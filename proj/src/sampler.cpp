#include "rclab/sampler.hpp"

#include <cmath>
#include <stdexcept>

namespace rclab {

const char* engine_name(Engine e) {
  switch (e) {
    case Engine::Auto: return "auto";
    case Engine::HeatBath: return "heatbath";
    case Engine::ClusterES: return "cluster";
    case Engine::Product: return "product";
  }
  return "?";
}

namespace {

bool integer_q(double q, int& out) {
  double r = std::round(q);
  if (std::abs(q - r) > 1e-12 || r < 1 || r > 1e6) return false;
  out = static_cast<int>(r);
  return true;
}

}  // namespace

Engine resolve_engine(const System& sys, Engine requested) {
  int qi = 0;
  bool qint = integer_q(sys.params.q, qi);
  switch (requested) {
    case Engine::Auto:
      if (qint && qi == 1) return Engine::Product;
      if (qint && sys.sw_ok) return Engine::ClusterES;
      return Engine::HeatBath;
    case Engine::Product:
      if (!(qint && qi == 1)) {
        throw std::invalid_argument("product sampling requires q = 1");
      }
      return Engine::Product;
    case Engine::ClusterES:
      if (!qint) throw std::invalid_argument("cluster updates require integer q");
      if (!sys.sw_ok) {
        throw std::invalid_argument(
            "cluster updates need a single wired class and dead-end exterior sites");
      }
      return Engine::ClusterES;
    case Engine::HeatBath:
      return Engine::HeatBath;
  }
  throw std::invalid_argument("unknown engine");
}

void SamplerCfg::validate() const {
  if (sweeps <= 0) throw std::invalid_argument("sweeps must be positive");
  if (burn_in < 0) throw std::invalid_argument("burn-in must be nonnegative");
  if (thinning <= 0) throw std::invalid_argument("thinning must be positive");
  if (replicas <= 0) throw std::invalid_argument("replicas must be positive");
  if (replica_base < 0) throw std::invalid_argument("replica base must be nonnegative");
}

Chain::Chain(const System& sys, std::uint64_t seed, std::uint64_t stream, Engine engine)
    : sys_(&sys),
      rng_(seed, stream),
      engine_(resolve_engine(sys, engine)),
      cfg_(static_cast<std::int64_t>(sys.bonds.size())),
      uf_(sys) {
  integer_q(sys.params.q, q_int_);
  color_.assign(sys.n_nodes, -1);
}

void Chain::sweep() {
  switch (engine_) {
    case Engine::Product: product_sweep(); return;
    case Engine::ClusterES: cluster_step(); return;
    default: heat_bath_sweep(); return;
  }
}

void Chain::product_sweep() {
  for (std::size_t i = 0; i < sys_->bonds.size(); ++i) {
    cfg_.set_open(i, rng_.next_u01() < sys_->bonds[i].p);
  }
}

void Chain::heat_bath_sweep() {
  // Fixed scan order. Visiting bonds in a state-dependent order (say closed
  // ones first) composes exact conditionals into a kernel that no longer
  // fixes the measure, so every bond takes the off-bond probe.
  const double q = sys_->params.q;
  for (std::size_t i = 0; i < sys_->bonds.size(); ++i) {
    const SysBond& sb = sys_->bonds[i];
    SplitProbe probe = probe_split(*sys_, cfg_, sb.u, sb.v, static_cast<std::int64_t>(i));
    double po = sb.p;
    if (!probe.joined && probe.delta == 1) po = sb.p / (sb.p + (1.0 - sb.p) * q);
    cfg_.set_open(i, rng_.next_u01() < po);
  }
}

void Chain::cluster_step() {
  uf_.build(cfg_);
  std::fill(color_.begin(), color_.end(), -1);
  std::int64_t ghost_root = -1;
  if (sys_->n_classes == 1) ghost_root = uf_.find(sys_->n_inside);
  // Color clusters; the wired class keeps a pinned color, which only shifts
  // the cluster count by a constant.
  for (std::int64_t n = 0; n < sys_->n_nodes; ++n) {
    std::int64_t r = uf_.find(n);
    if (color_[r] >= 0) continue;
    if (r == ghost_root || q_int_ == 1) {
      color_[r] = 0;
    } else {
      color_[r] = static_cast<std::int32_t>(rng_.next_below(q_int_));
    }
  }
  for (std::size_t i = 0; i < sys_->bonds.size(); ++i) {
    const SysBond& sb = sys_->bonds[i];
    // Dead-end bonds to uncounted exterior sites never change the counted
    // cluster count; they are independent Bernoulli(p).
    bool dangle = !sys_->node_counted[sb.u] || !sys_->node_counted[sb.v];
    if (dangle || color_[uf_.find(sb.u)] == color_[uf_.find(sb.v)]) {
      cfg_.set_open(i, rng_.next_u01() < sb.p);
    } else {
      cfg_.set_open(i, false);
    }
  }
}

std::uint64_t chain_stream(int replica) {
  return mix64(0xA5C1BEEF00000000ULL + static_cast<std::uint64_t>(replica));
}

void sample_chain(const System& sys, const SamplerCfg& cfg, int replica,
                  const std::function<void(const ExplicitConfig&)>& visit) {
  cfg.validate();
  Chain chain(sys, cfg.seed, chain_stream(cfg.replica_base + replica), cfg.engine);
  for (std::int64_t s = 0; s < cfg.burn_in; ++s) chain.sweep();
  for (std::int64_t s = 0; s < cfg.sweeps; ++s) {
    chain.sweep();
    if ((s + 1) % cfg.thinning == 0) visit(chain.config());
  }
}

namespace {

Estimate replica_batched(
    const System& sys, const SamplerCfg& cfg, const std::string& method,
    const std::function<double(const System&, const ExplicitConfig&)>& f) {
  cfg.validate();
  std::int64_t kept = cfg.sweeps / cfg.thinning;
  if (kept < 1) throw estimator_failure("no samples kept; raise sweeps or lower thinning");
  // Fixed per-replica batch count, so pooling partial runs reproduces a
  // joint run exactly.
  int per = static_cast<int>(std::min<std::int64_t>(32, kept));
  std::vector<std::vector<double>> slots(cfg.replicas);
  for_each_replica(cfg.exec, cfg.replicas, [&](int r) {
    std::vector<double> sums(per, 0.0);
    std::vector<std::int64_t> counts(per, 0);
    std::int64_t k = 0;
    sample_chain(sys, cfg, r, [&](const ExplicitConfig& c) {
      int b = static_cast<int>(k * per / kept);
      if (b >= per) b = per - 1;
      sums[b] += f(sys, c);
      ++counts[b];
      ++k;
    });
    std::vector<double> means(per);
    for (int b = 0; b < per; ++b) {
      if (counts[b] == 0) throw estimator_failure("empty batch");
      means[b] = sums[b] / counts[b];
    }
    slots[r] = std::move(means);
  });
  std::vector<double> all;
  all.reserve(static_cast<std::size_t>(per) * cfg.replicas);
  for (const auto& s : slots) all.insert(all.end(), s.begin(), s.end());
  return make_estimate(std::move(all), kept * cfg.replicas, method);
}

}  // namespace

Estimate sample_event_probability(
    const System& sys, const SamplerCfg& cfg,
    const std::function<bool(const System&, const ExplicitConfig&)>& ev) {
  return replica_batched(sys, cfg, "mcmc-event",
                         [&ev](const System& s, const ExplicitConfig& c) {
                           return ev(s, c) ? 1.0 : 0.0;
                         });
}

Estimate sample_event_mean(
    const System& sys, const SamplerCfg& cfg,
    const std::function<double(const System&, const ExplicitConfig&)>& f) {
  return replica_batched(sys, cfg, "mcmc-mean", f);
}

}  // namespace rclab
