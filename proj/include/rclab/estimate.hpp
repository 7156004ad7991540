#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rclab {

struct estimator_failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Point estimate with a 95% confidence half-width from batch means.
struct Estimate {
  double value = 0;
  double half_width = 0;
  std::int64_t n_samples = 0;
  int batches = 0;
  std::string method;
  std::vector<double> batch_means;

  bool ci_valid() const { return batches >= 32; }
  double lo() const { return value - half_width; }
  double hi() const { return value + half_width; }
};

// Two-sided 95% Student t quantile, good to ~1e-3 for the df we use.
inline double t_quantile_975(int df) {
  static const double small[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447,
                                 2.365,  2.306, 2.262, 2.228, 2.201, 2.179,
                                 2.160,  2.145, 2.131, 2.120, 2.110, 2.101,
                                 2.093,  2.086, 2.080, 2.074, 2.069, 2.064,
                                 2.060,  2.056, 2.052, 2.048, 2.045, 2.042};
  if (df < 1) throw estimator_failure("no degrees of freedom for a CI");
  if (df <= 30) return small[df - 1];
  if (df <= 40) return 2.021;
  if (df <= 60) return 2.000;
  if (df <= 120) return 1.980;
  return 1.960;
}

inline Estimate make_estimate(std::vector<double> batch_means,
                              std::int64_t n_samples, std::string method) {
  if (batch_means.size() < 2) {
    throw estimator_failure("need at least two batches for an estimate");
  }
  Estimate e;
  e.batches = static_cast<int>(batch_means.size());
  e.n_samples = n_samples;
  e.method = std::move(method);
  double mean = 0;
  for (double m : batch_means) mean += m;
  mean /= e.batches;
  double ss = 0;
  for (double m : batch_means) ss += (m - mean) * (m - mean);
  double var = ss / (e.batches - 1);
  e.value = mean;
  e.half_width = t_quantile_975(e.batches - 1) * std::sqrt(var / e.batches);
  e.batch_means = std::move(batch_means);
  return e;
}

// Concatenates batch means in the given order, so the result is independent
// of how the replicas were scheduled.
inline Estimate merge_estimates(const std::vector<Estimate>& parts,
                                std::string method) {
  std::vector<double> bm;
  std::int64_t n = 0;
  for (const Estimate& e : parts) {
    bm.insert(bm.end(), e.batch_means.begin(), e.batch_means.end());
    n += e.n_samples;
  }
  return make_estimate(std::move(bm), n, std::move(method));
}

struct WilsonInterval {
  double lo = 0;
  double hi = 1;
  double point = 0;
};

inline WilsonInterval wilson_interval(std::int64_t k, std::int64_t n,
                                      double z = 1.959963985) {
  if (n <= 0) throw estimator_failure("Wilson interval needs samples");
  double ph = static_cast<double>(k) / n;
  double z2 = z * z;
  double denom = 1.0 + z2 / n;
  double center = (ph + z2 / (2.0 * n)) / denom;
  double rad = z * std::sqrt(ph * (1.0 - ph) / n + z2 / (4.0 * n * n)) / denom;
  WilsonInterval w;
  w.point = ph;
  w.lo = std::max(0.0, center - rad);
  w.hi = std::min(1.0, center + rad);
  return w;
}

}  // namespace rclab
