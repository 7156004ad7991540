#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "rclab/rcmodel.hpp"

namespace rclab {

struct oracle_cap_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxEnumBonds = 22;
inline constexpr int kMaxEnumSpins = 20;
inline constexpr int kMaxStoredDist = 20;  // distribution() cap, 2^20 states

// Exact finite-volume measure by iterating all bond configurations.
class ExactFK {
 public:
  explicit ExactFK(const System& sys);

  const System& system() const { return *sys_; }
  double log_Z() const { return log_z_; }
  double prob(std::uint64_t mask) const { return probs_[mask]; }
  double event_prob(const std::function<bool(const ExplicitConfig&)>& ev) const;
  double expectation(const std::function<double(const ExplicitConfig&)>& f) const;
  double bond_marginal(std::int64_t sbond) const;
  const std::vector<double>& distribution() const;

 private:
  const System* sys_;
  int nb_;
  double log_z_;
  std::vector<double> probs_;
};

ExactFK enumerate_exact(const System& sys);

// Exact Ising expectations with per-bond couplings and an optional fixed
// +1 ghost spin (index n_spins). Spin states are summed exhaustively.
struct IsingBondSpec {
  int u = 0;
  int v = 0;
  double K = 0;
};

class ExactIsing {
 public:
  ExactIsing(int n_spins, std::vector<IsingBondSpec> bonds);

  double magnetization(int spin) const;

 private:
  int n_;
  std::vector<IsingBondSpec> bonds_;
  std::vector<double> probs_;  // per spin mask
};

// Ising system mirroring a compiled FK system: coupling K_b = -log(1-p_b)/2
// per bond, inside vertices and free exterior sites as free spins, the
// single wired class (if any) as the fixed +1 ghost.
struct IsingFromSystem {
  ExactIsing model;
  std::function<int(const Coord&)> spin_of_site;
};

IsingFromSystem ising_from_system(const System& sys);

}  // namespace rclab
