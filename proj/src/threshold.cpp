#include "rclab/threshold.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace rclab {

double ising_to_fk(double beta) {
  if (beta < 0) throw std::invalid_argument("beta must be nonnegative");
  return 1.0 - std::exp(-2.0 * beta);
}

double fk_to_ising(double p) {
  if (p < 0 || p >= 1) throw std::invalid_argument("p must lie in [0,1)");
  return -0.5 * std::log(1.0 - p);
}

std::vector<CurvePoint> box_percolation_curve(int N, int d, double q,
                                              const std::vector<double>& ps,
                                              const SamplerCfg& scfg) {
  Region region = build_box(N, d, true);
  std::vector<CurvePoint> out;
  out.reserve(ps.size());
  for (double p : ps) {
    RcParams params;
    params.q = q;
    params.p = p;
    CurvePoint pt;
    pt.p = p;
    pt.est = estimate_event(region, params, BoundaryCondition::free(),
                            EventSpec{EvBoxPerc{}}, scfg);
    out.push_back(std::move(pt));
  }
  return out;
}

namespace {

// Shared-chain estimator for several indicators at once; batching follows
// the single-event samplers, so each returned estimate matches what a
// dedicated run with the same cfg would produce.
std::vector<Estimate> sample_events_shared(
    const System& sys, const SamplerCfg& cfg, int ne,
    const std::function<void(const ExplicitConfig&, double*)>& fill) {
  cfg.validate();
  std::int64_t kept = cfg.sweeps / cfg.thinning;
  if (kept < 1) {
    throw estimator_failure("no samples kept; raise sweeps or lower thinning");
  }
  int per = static_cast<int>(std::min<std::int64_t>(32, kept));
  std::vector<std::vector<double>> slots(cfg.replicas);
  for_each_replica(cfg.exec, cfg.replicas, [&](int r) {
    std::vector<double> sums(static_cast<std::size_t>(ne) * per, 0.0);
    std::vector<std::int64_t> counts(per, 0);
    std::vector<double> vals(ne);
    std::int64_t k = 0;
    sample_chain(sys, cfg, r, [&](const ExplicitConfig& c) {
      int b = static_cast<int>(k * per / kept);
      if (b >= per) b = per - 1;
      fill(c, vals.data());
      for (int e = 0; e < ne; ++e) sums[static_cast<std::size_t>(e) * per + b] += vals[e];
      ++counts[b];
      ++k;
    });
    std::vector<double> means(static_cast<std::size_t>(ne) * per);
    for (int b = 0; b < per; ++b) {
      if (counts[b] == 0) throw estimator_failure("empty batch");
      for (int e = 0; e < ne; ++e) {
        std::size_t i = static_cast<std::size_t>(e) * per + b;
        means[i] = sums[i] / counts[b];
      }
    }
    slots[r] = std::move(means);
  });
  std::vector<Estimate> out;
  out.reserve(ne);
  for (int e = 0; e < ne; ++e) {
    std::vector<double> all;
    all.reserve(static_cast<std::size_t>(per) * cfg.replicas);
    for (const auto& s : slots) {
      all.insert(all.end(), s.begin() + static_cast<std::size_t>(e) * per,
                 s.begin() + static_cast<std::size_t>(e + 1) * per);
    }
    out.push_back(make_estimate(std::move(all), kept * cfg.replicas,
                                "mcmc-shared"));
  }
  return out;
}

std::array<Coord, 8> slab_probes(int N, int d) {
  int px = d - 2, py = d - 1;
  std::array<Coord, 8> probes{};
  int k = 0;
  for (int sx = -1; sx <= 1; sx += 2) {
    for (int sy = -1; sy <= 1; sy += 2) {
      probes[k][px] = sx * N;
      probes[k][py] = sy * N;
      ++k;
    }
  }
  probes[k][px] = N;
  ++k;
  probes[k][px] = -N;
  ++k;
  probes[k][py] = N;
  ++k;
  probes[k][py] = -N;
  return probes;
}

}  // namespace

SlabConnectivity slab_connectivity(int L, int N, int d, const RcParams& params,
                                   const SamplerCfg& scfg) {
  if (d < 2) throw std::invalid_argument("slab needs d >= 2");
  Region region = build_slab(L, N, d, false);
  System sys = compile_system(region, params, BoundaryCondition::free());
  std::array<Coord, 8> probes = slab_probes(N, d);
  std::int64_t origin = sys.node_of_site(Coord{});
  std::array<std::int64_t, 8> nodes{};
  for (int i = 0; i < 8; ++i) nodes[i] = sys.node_of_site(probes[i]);
  auto ests = sample_events_shared(
      sys, scfg, 8, [&](const ExplicitConfig& cfg, double* vals) {
        // local index: replica chains may call this concurrently
        ClusterIndex uf(sys);
        uf.build(cfg);
        for (int i = 0; i < 8; ++i) {
          vals[i] = uf.same(origin, nodes[i]) ? 1.0 : 0.0;
        }
      });
  SlabConnectivity out;
  int worst = 0;
  for (int i = 0; i < 8; ++i) {
    out.probes[i] = ests[i];
    if (ests[i].value < ests[worst].value) worst = i;
  }
  out.score = ests[worst].value;
  out.lo = std::max(0.0, ests[worst].lo());
  out.hi = std::min(1.0, ests[worst].hi());
  return out;
}

CrossingResult box_crossing_pc(int d, double q, int N1, int N2, double p_lo,
                               double p_hi, const SamplerCfg& scfg,
                               int depth) {
  if (N1 >= N2) throw std::invalid_argument("need N1 < N2");
  if (!(p_lo < p_hi)) throw std::invalid_argument("need p_lo < p_hi");
  Region r1 = build_rectangle(N1, 1.0, 0, d, false);
  Region r2 = build_rectangle(N2, 1.0, 0, d, false);
  CrossingResult out;
  auto diff = [&](double p) {
    RcParams params;
    params.q = q;
    params.p = p;
    Estimate e1 = estimate_event(r1, params, BoundaryCondition::free(),
                                 EventSpec{EvFaceCross{N1, 1.0}}, scfg);
    Estimate e2 = estimate_event(r2, params, BoundaryCondition::free(),
                                 EventSpec{EvFaceCross{N2, 1.0}}, scfg);
    ++out.evals;
    return e2.value - e1.value;
  };
  double lo = p_lo, hi = p_hi;
  double flo = diff(lo), fhi = diff(hi);
  if (flo > 0 || fhi < 0) {
    out.p_lo = p_lo;
    out.p_hi = p_hi;
    out.p_hat = 0.5 * (p_lo + p_hi);
    out.warning = "no sign change across the bracket";
    return out;
  }
  for (int i = 0; i < depth; ++i) {
    double mid = 0.5 * (lo + hi);
    if (diff(mid) < 0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  out.p_lo = lo;
  out.p_hi = hi;
  out.p_hat = 0.5 * (lo + hi);
  return out;
}

SlabThresholdResult estimate_slab_threshold(int L, int d, double q, int N1,
                                            int N2, double p_lo, double p_hi,
                                            const SamplerCfg& scfg,
                                            double theta, int depth) {
  if (N1 >= N2) throw std::invalid_argument("need N1 < N2");
  if (!(p_lo < p_hi)) throw std::invalid_argument("need p_lo < p_hi");
  if (!(theta > 0) || !(theta < 1)) throw std::invalid_argument("bad theta");
  SlabThresholdResult out;
  out.L = L;
  out.theta = theta;
  auto probe = [&](double p) {
    RcParams params;
    params.q = q;
    params.p = p;
    SlabConnectivity c1 = slab_connectivity(L, N1, d, params, scfg);
    SlabConnectivity c2 = slab_connectivity(L, N2, d, params, scfg);
    SlabProbePoint pt;
    pt.p = p;
    pt.score1 = c1.score;
    pt.score2 = c2.score;
    // a genuine drop with size means the connections die out at scale N2
    bool drop = c2.hi < c1.lo;
    pt.percolating = c1.score >= theta && c2.score >= theta && !drop;
    out.trace.push_back(pt);
    return pt.percolating;
  };
  double lo = p_lo, hi = p_hi;
  bool at_lo = probe(lo);
  bool at_hi = probe(hi);
  if (at_lo || !at_hi) {
    out.p_lo = p_lo;
    out.p_hi = p_hi;
    out.p_hat = 0.5 * (p_lo + p_hi);
    out.monotone = !(at_lo && !at_hi);
    out.warning = at_lo ? "already percolating at the lower end"
                        : "not percolating at the upper end";
    std::sort(out.trace.begin(), out.trace.end(),
              [](const SlabProbePoint& a, const SlabProbePoint& b) {
                return a.p < b.p;
              });
    return out;
  }
  for (int i = 0; i < depth; ++i) {
    double mid = 0.5 * (lo + hi);
    if (probe(mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  std::sort(out.trace.begin(), out.trace.end(),
            [](const SlabProbePoint& a, const SlabProbePoint& b) {
              return a.p < b.p;
            });
  // the sorted indicator sequence should be zeros then ones
  bool seen_perc = false;
  for (const SlabProbePoint& pt : out.trace) {
    if (pt.percolating) {
      seen_perc = true;
    } else if (seen_perc) {
      out.monotone = false;
    }
  }
  if (!out.monotone) {
    double widest_lo = p_hi, widest_hi = p_lo;
    for (const SlabProbePoint& pt : out.trace) {
      if (pt.percolating) widest_lo = std::min(widest_lo, pt.p);
      if (!pt.percolating) widest_hi = std::max(widest_hi, pt.p);
    }
    out.p_lo = std::min(lo, widest_lo);
    out.p_hi = std::max(hi, widest_hi);
    out.warning = "percolation indicator not monotone across the trace";
  } else {
    out.p_lo = lo;
    out.p_hi = hi;
  }
  out.p_hat = 0.5 * (out.p_lo + out.p_hi);
  return out;
}

ThresholdReport slab_threshold_report(int d, double q,
                                      const std::vector<int>& Ls, int slab_N1,
                                      int slab_N2, int box_N1, int box_N2,
                                      double p_lo, double p_hi,
                                      const SamplerCfg& scfg, double theta,
                                      int depth) {
  ThresholdReport rep;
  rep.d = d;
  rep.q = q;
  rep.slab_N1 = slab_N1;
  rep.slab_N2 = slab_N2;
  rep.box_N1 = box_N1;
  rep.box_N2 = box_N2;
  rep.theta = theta;
  rep.box = box_crossing_pc(d, q, box_N1, box_N2, p_lo, p_hi, scfg, depth);
  for (int L : Ls) {
    rep.slabs.push_back(estimate_slab_threshold(L, d, q, slab_N1, slab_N2,
                                                p_lo, p_hi, scfg, theta,
                                                depth));
  }
  return rep;
}

}  // namespace rclab
