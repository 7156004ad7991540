#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "rclab/lattice.hpp"
#include "rclab/rng.hpp"

namespace rclab {

// Cluster weight q >= 1, base intensity p, sparse per-bond overrides keyed by
// region bond id (used for the interpolated boundary layer).
struct RcParams {
  double q = 1.0;
  double p = 0.5;
  std::vector<std::pair<std::int64_t, double>> overrides;  // sorted by bid

  double intensity(std::int64_t bid) const;
  void set_override(std::int64_t bid, double value);
  void validate() const;
};

enum class BcKind { Free, Wired, Mixed };

// Free: every exterior vertex is its own (uncounted) dead end.
// Wired: all exterior vertices form one class.
// Mixed: explicit classes of exterior vertices; sites in no class are free.
// Each class is externally pre-connected and is represented by a ghost node.
struct BoundaryCondition {
  BcKind kind = BcKind::Free;
  std::vector<std::vector<Coord>> classes;

  static BoundaryCondition free() { return {}; }
  static BoundaryCondition wired() { return {BcKind::Wired, {}}; }
  static BoundaryCondition mixed(std::vector<std::vector<Coord>> cls) {
    return {BcKind::Mixed, std::move(cls)};
  }
};

// Wired everywhere except the exterior sites seen across vertical bonds
// (free top and bottom faces).
BoundaryCondition bc_wired_except_vertical(const Region& region);
// Single class holding the exterior sites below the bottom face; everything
// else free. Carries the boundary-field layer.
BoundaryCondition bc_bottom_class(const Region& region);

struct SysBond {
  std::int32_t u = 0;
  std::int32_t v = 0;
  double p = 0;
  std::int64_t region_bid = 0;
};

// Region + params + boundary condition compiled to a node/bond graph.
// Nodes: inside vertices first, then one ghost per wired class, then one
// node per free exterior vertex. A cluster is counted when it holds an
// inside vertex or a class ghost; free exterior vertices alone never count.
// Counting class ghosts even when bare shifts the cluster count by a
// constant for a fixed class structure, which leaves the measure unchanged.
struct System {
  Region region;
  RcParams params;
  BoundaryCondition bc;

  std::int64_t n_inside = 0;
  std::int64_t n_nodes = 0;
  std::int64_t n_classes = 0;
  std::vector<SysBond> bonds;
  std::vector<std::uint8_t> node_counted;
  std::vector<std::int32_t> node_degree;
  std::unordered_map<std::int64_t, std::int64_t> sbond_of_bid;
  bool sw_ok = false;

  // CSR adjacency over nodes: (neighbor node, system bond index).
  std::vector<std::int64_t> adj_offset;
  std::vector<std::pair<std::int32_t, std::int32_t>> adj;

  std::int64_t sbond_index(std::int64_t region_bid) const {
    auto it = sbond_of_bid.find(region_bid);
    return it == sbond_of_bid.end() ? -1 : it->second;
  }
  // Node of a site: inside vertex, class ghost, or free exterior node.
  // Returns -1 for sites absent from the system.
  std::int64_t node_of_site(const Coord& c) const;

 private:
  friend System compile_system(const Region&, const RcParams&,
                               const BoundaryCondition&);
  std::unordered_map<std::uint64_t, std::int64_t> exterior_nodes_;
};

System compile_system(const Region& region, const RcParams& params,
                      const BoundaryCondition& bc);

// Bond bit-vector over the system's bonds.
class ExplicitConfig {
 public:
  ExplicitConfig() = default;
  explicit ExplicitConfig(std::int64_t n_bonds)
      : n_(n_bonds), bits_((n_bonds + 63) / 64, 0) {}

  std::int64_t size() const { return n_; }
  bool open(std::int64_t i) const {
    return (bits_[i >> 6] >> (i & 63)) & 1;
  }
  void set_open(std::int64_t i, bool v) {
    if (v)
      bits_[i >> 6] |= std::uint64_t{1} << (i & 63);
    else
      bits_[i >> 6] &= ~(std::uint64_t{1} << (i & 63));
  }
  void fill(bool v) {
    for (auto& w : bits_) w = v ? ~std::uint64_t{0} : 0;
  }
  std::int64_t count_open() const;
  const std::vector<std::uint64_t>& words() const { return bits_; }
  std::vector<std::uint64_t>& words() { return bits_; }

  friend bool operator==(const ExplicitConfig&, const ExplicitConfig&) = default;

 private:
  std::int64_t n_ = 0;
  std::vector<std::uint64_t> bits_;
};

// Union-find over system nodes tracking the counted-component count.
class ClusterIndex {
 public:
  explicit ClusterIndex(const System& sys);

  void reset();
  void build(const ExplicitConfig& cfg);
  void add_union(std::int64_t a, std::int64_t b);
  std::int64_t find(std::int64_t a) const;
  bool same(std::int64_t a, std::int64_t b) const {
    return find(a) == find(b);
  }
  std::int64_t cluster_count() const { return counted_components_; }
  bool root_counted(std::int64_t node) const { return counted_[find(node)]; }

 private:
  const System* sys_;
  mutable std::vector<std::int64_t> parent_;
  std::vector<std::int64_t> size_;
  std::vector<std::uint8_t> counted_;
  std::int64_t counted_components_ = 0;
};

std::int64_t cluster_count(const System& sys, const ExplicitConfig& cfg);

// Sites may be inside or exterior; exterior sites resolve to their ghost or
// free node, so wired identification is visible to this query.
bool connected(const System& sys, const ExplicitConfig& cfg,
               const std::vector<Coord>& A, const std::vector<Coord>& B);

// Connectivity using only open bonds of E_sub (bonds meeting sub's vertex
// set), ignoring the boundary condition. Path endpoints may lie on faces.
bool connected_within(const Region& ambient,
                      const std::function<bool(const Bond&)>& open,
                      const Region& sub, const std::vector<Coord>& A,
                      const std::vector<Coord>& B);

// Bidirectional probe of the open graph with bond `skip` removed. When the
// endpoints stay joined, delta is meaningless; when they split, delta is 1
// exactly if both resulting components are counted (the counted-cluster
// count rises by one on closing the bond).
struct SplitProbe {
  bool joined = false;
  int delta = 0;
};
SplitProbe probe_split(const System& sys, const ExplicitConfig& cfg,
                       std::int64_t u, std::int64_t v, std::int64_t skip_sbond);

inline bool nodes_connected_excluding(const System& sys, const ExplicitConfig& cfg,
                                      std::int64_t u, std::int64_t v,
                                      std::int64_t skip_sbond) {
  return probe_split(sys, cfg, u, v, skip_sbond).joined;
}

// Unnormalized log weight; -inf when a bond state has zero intensity mass.
double log_weight(const System& sys, const ExplicitConfig& cfg);

inline constexpr double kMinusInf = -std::numeric_limits<double>::infinity();

// Bond oracle over an explicit configuration; bonds outside the system read
// as closed.
struct ConfigOracle {
  const System* sys;
  const ExplicitConfig* cfg;

  bool operator()(const Bond& b) const {
    std::int64_t bid = sys->region.bond_index(b);
    if (bid < 0) return false;
    std::int64_t s = sys->sbond_index(bid);
    return s >= 0 && cfg->open(s);
  }
};

// Lazy product (q = 1) configuration: an i.i.d. Bernoulli(p) bond field,
// random-access by global bond identity, never stored.
struct ProductOracle {
  std::uint64_t seed = 0;
  double p = 0.5;

  bool operator()(const Bond& b) const {
    return u01(seed, mix64(bond_key(b)), 0) < p;
  }
};

}  // namespace rclab
