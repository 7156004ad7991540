#pragma once

#include <array>
#include <string>
#include <vector>

#include "rclab/observables.hpp"

namespace rclab {

// Edwards-Sokal coupling: Ising at inverse temperature beta matches the
// q = 2 random-cluster model at p = 1 - exp(-2 beta).
double ising_to_fk(double beta);
double fk_to_ising(double p);

struct CurvePoint {
  double p = 0;
  Estimate est;
};

// P(0 <-> complement of Lambda_N) under free boundary conditions, at each p.
std::vector<CurvePoint> box_percolation_curve(int N, int d, double q,
                                              const std::vector<double>& ps,
                                              const SamplerCfg& scfg);

// Finite-size criterion: the face-crossing probability of the cube R(N,1)
// drops with N below the transition and climbs with N above it, so the
// curves for N1 < N2 cross near p_c. Bisects on the sign of the difference.
struct CrossingResult {
  double p_lo = 0, p_hi = 1;
  double p_hat = 0;
  int evals = 0;
  std::string warning;  // empty when the bracket behaved
};
CrossingResult box_crossing_pc(int d, double q, int N1, int N2, double p_lo,
                               double p_hi, const SamplerCfg& scfg,
                               int depth = 8);

// Worst two-point connectivity from the origin of the slab S_{L,N} to eight
// far probes: the corners and edge midpoints of the {-N,N}^2 plane window.
// All eight estimates come from the same chains.
struct SlabConnectivity {
  double score = 0;       // smallest probe point estimate
  double lo = 0, hi = 1;  // batch interval of that probe
  std::array<Estimate, 8> probes;
};
SlabConnectivity slab_connectivity(int L, int N, int d, const RcParams& params,
                                   const SamplerCfg& scfg);

struct SlabProbePoint {
  double p = 0;
  double score1 = 0, score2 = 0;  // worst connectivity at N1 and N2
  bool percolating = false;
};

// Bisection estimate of the slab threshold p_c(L): a point percolates when
// both sizes clear theta and the score does not drop from N1 to N2 beyond
// the joint interval. A non-monotone trace widens the bracket and warns.
struct SlabThresholdResult {
  int L = 0;
  double theta = 0.05;
  double p_lo = 0, p_hi = 1;
  double p_hat = 0;
  bool monotone = true;
  std::string warning;
  std::vector<SlabProbePoint> trace;  // every evaluated p, ascending
};
SlabThresholdResult estimate_slab_threshold(int L, int d, double q, int N1,
                                            int N2, double p_lo, double p_hi,
                                            const SamplerCfg& scfg,
                                            double theta = 0.05,
                                            int depth = 8);

struct ThresholdReport {
  int d = 3;
  double q = 2;
  int slab_N1 = 16, slab_N2 = 32;
  int box_N1 = 6, box_N2 = 10;
  double theta = 0.05;
  CrossingResult box;
  std::vector<SlabThresholdResult> slabs;  // one per requested L, ascending
};

ThresholdReport slab_threshold_report(int d, double q,
                                      const std::vector<int>& Ls, int slab_N1,
                                      int slab_N2, int box_N1, int box_N2,
                                      double p_lo, double p_hi,
                                      const SamplerCfg& scfg,
                                      double theta = 0.05, int depth = 8);

}  // namespace rclab
