#include "rclab/enumerate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace rclab {

namespace {

void normalize_log_masses(std::vector<double>& m, double& log_z) {
  double mx = -std::numeric_limits<double>::infinity();
  for (double lw : m) mx = std::max(mx, lw);
  if (!std::isfinite(mx)) throw std::runtime_error("all configurations have zero mass");
  double sum = 0;
  for (double& lw : m) {
    lw = std::exp(lw - mx);
    sum += lw;
  }
  for (double& w : m) w /= sum;
  log_z = mx + std::log(sum);
}

}  // namespace

ExactFK::ExactFK(const System& sys) : sys_(&sys), nb_(static_cast<int>(sys.bonds.size())) {
  if (nb_ > kMaxEnumBonds) {
    throw oracle_cap_error("exact enumeration refused: " + std::to_string(nb_) + " bonds exceeds cap " +
                           std::to_string(kMaxEnumBonds));
  }
  std::uint64_t n_states = std::uint64_t{1} << nb_;
  probs_.resize(n_states);
  ExplicitConfig cfg(nb_);
  for (std::uint64_t mask = 0; mask < n_states; ++mask) {
    cfg.words()[0] = mask;
    probs_[mask] = log_weight(*sys_, cfg);
  }
  normalize_log_masses(probs_, log_z_);
}

ExactFK enumerate_exact(const System& sys) { return ExactFK(sys); }

double ExactFK::event_prob(const std::function<bool(const ExplicitConfig&)>& ev) const {
  double acc = 0;
  ExplicitConfig cfg(nb_);
  for (std::uint64_t mask = 0; mask < probs_.size(); ++mask) {
    cfg.words()[0] = mask;
    if (ev(cfg)) acc += probs_[mask];
  }
  return acc;
}

double ExactFK::expectation(const std::function<double(const ExplicitConfig&)>& f) const {
  double acc = 0;
  ExplicitConfig cfg(nb_);
  for (std::uint64_t mask = 0; mask < probs_.size(); ++mask) {
    cfg.words()[0] = mask;
    acc += probs_[mask] * f(cfg);
  }
  return acc;
}

double ExactFK::bond_marginal(std::int64_t sbond) const {
  if (sbond < 0 || sbond >= nb_) throw std::invalid_argument("bond index out of range");
  double acc = 0;
  std::uint64_t bit = std::uint64_t{1} << sbond;
  for (std::uint64_t mask = 0; mask < probs_.size(); ++mask) {
    if (mask & bit) acc += probs_[mask];
  }
  return acc;
}

const std::vector<double>& ExactFK::distribution() const {
  if (nb_ > kMaxStoredDist) throw oracle_cap_error("distribution too large to expose");
  return probs_;
}

ExactIsing::ExactIsing(int n_spins, std::vector<IsingBondSpec> bonds) : n_(n_spins), bonds_(std::move(bonds)) {
  if (n_ < 0 || n_ > kMaxEnumSpins) throw oracle_cap_error("spin count exceeds enumeration cap");
  for (const auto& b : bonds_) {
    if (b.u < 0 || b.u > n_ || b.v < 0 || b.v > n_) throw std::invalid_argument("spin index out of range");
  }
  std::uint64_t n_states = std::uint64_t{1} << n_;
  probs_.resize(n_states);
  for (std::uint64_t mask = 0; mask < n_states; ++mask) {
    double h = 0;
    for (const auto& b : bonds_) {
      // index n_ is the ghost, pinned to +1
      double su = (b.u == n_ || (mask >> b.u & 1)) ? 1.0 : -1.0;
      double sv = (b.v == n_ || (mask >> b.v & 1)) ? 1.0 : -1.0;
      h += b.K * su * sv;
    }
    probs_[mask] = h;
  }
  double log_z = 0;
  normalize_log_masses(probs_, log_z);
}

double ExactIsing::magnetization(int spin) const {
  if (spin == n_) return 1.0;
  if (spin < 0 || spin > n_) throw std::invalid_argument("spin index out of range");
  double acc = 0;
  for (std::uint64_t mask = 0; mask < probs_.size(); ++mask) {
    acc += probs_[mask] * ((mask >> spin & 1) ? 1.0 : -1.0);
  }
  return acc;
}

IsingFromSystem ising_from_system(const System& sys) {
  if (sys.n_classes > 1) {
    throw std::invalid_argument("Ising mirror needs at most one wired class");
  }
  int n_spins = static_cast<int>(sys.n_nodes - sys.n_classes);
  std::vector<IsingBondSpec> bonds;
  bonds.reserve(sys.bonds.size());
  auto spin_of_node = [&sys, n_spins](int node) -> int {
    if (node < sys.n_inside) return node;
    if (node < sys.n_inside + sys.n_classes) return n_spins;  // ghost
    return static_cast<int>(node - sys.n_classes);
  };
  for (const auto& sb : sys.bonds) {
    if (sb.p >= 1.0) throw std::invalid_argument("p = 1 bond has no finite Ising coupling");
    IsingBondSpec is;
    is.u = spin_of_node(sb.u);
    is.v = spin_of_node(sb.v);
    is.K = -0.5 * std::log1p(-sb.p);
    bonds.push_back(is);
  }
  const System* sp = &sys;
  IsingFromSystem out{ExactIsing(n_spins, std::move(bonds)), {}};
  out.spin_of_site = [sp, n_spins](const Coord& c) -> int {
    std::int64_t node = sp->node_of_site(c);
    if (node < 0) return -1;
    if (node < sp->n_inside) return static_cast<int>(node);
    if (node < sp->n_inside + sp->n_classes) return n_spins;
    return static_cast<int>(node - sp->n_classes);
  };
  return out;
}

}  // namespace rclab
