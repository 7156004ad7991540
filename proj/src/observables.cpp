#include "rclab/observables.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>
#include <unordered_set>
#include <utility>

namespace rclab {

namespace {

bool in_block(const Coord& c, int l, int h, int d) {
  for (int a = 0; a + 1 < d; ++a) {
    if (std::abs(c[a]) > l) return false;
  }
  return c[d - 1] >= 0 && c[d - 1] <= h;
}

bool in_block_interior(const Coord& c, int l, int h, int d) {
  for (int a = 0; a + 1 < d; ++a) {
    if (std::abs(c[a]) > l - 1) return false;
  }
  return c[d - 1] >= 1 && c[d - 1] <= h - 1;
}

// Odometer over the box [lo,hi] in the first d axes, axis 0 most significant.
// f may return false to stop early.
template <typename F>
bool scan_box(const Coord& lo, const Coord& hi, int d, F&& f) {
  for (int a = 0; a < d; ++a) {
    if (lo[a] > hi[a]) return true;
  }
  Coord c = lo;
  for (;;) {
    if (!f(c)) return false;
    int a = d - 1;
    while (a >= 0 && c[a] == hi[a]) {
      c[a] = lo[a];
      --a;
    }
    if (a < 0) return true;
    ++c[a];
  }
}

struct ReachSet {
  std::vector<Coord> sites;
  std::unordered_set<std::uint64_t> keys;

  bool contains(const Coord& c) const { return keys.count(site_key(c)) != 0; }
};

ReachSet block_reach_set(const BondOracle& open, int l, int h, int d,
                         const std::vector<Coord>& sources) {
  ReachSet r;
  std::vector<Coord> stack;
  auto push = [&](const Coord& c) {
    if (r.keys.insert(site_key(c)).second) {
      r.sites.push_back(c);
      stack.push_back(c);
    }
  };
  for (const Coord& s : sources) {
    if (in_block(s, l, h, d)) push(s);
  }
  while (!stack.empty()) {
    Coord c = stack.back();
    stack.pop_back();
    bool c_int = in_block_interior(c, l, h, d);
    for (int a = 0; a < d; ++a) {
      for (int dir = -1; dir <= 1; dir += 2) {
        Coord n = coord_shift(c, a, dir);
        if (!in_block(n, l, h, d)) continue;
        if (!c_int && !in_block_interior(n, l, h, d)) continue;
        Bond b{dir > 0 ? c : n, a};
        if (!open(b)) continue;
        push(n);
      }
    }
  }
  return r;
}

bool plaque_touches(const ReachSet& reached, const Coord& center, int axis,
                    int K, int d) {
  bool hit = false;
  Coord lo = center, hi = center;
  for (int a = 0; a < d; ++a) {
    if (a == axis) continue;
    lo[a] -= K;
    hi[a] += K;
  }
  scan_box(lo, hi, d, [&](const Coord& c) {
    if (reached.contains(c)) {
      hit = true;
      return false;
    }
    return true;
  });
  return hit;
}

// Scans seed centers over [lo,hi] (the pinned axes have lo == hi) in
// lexicographic order and returns the first whose plaque is fully open and
// touches the reached set.
std::optional<Coord> scan_seed_centers(const BondOracle& open,
                                       const ReachSet& reached, int K, int d,
                                       int plaque_axis, const Coord& lo,
                                       const Coord& hi) {
  std::optional<Coord> found;
  scan_box(lo, hi, d, [&](const Coord& x) {
    if (!plaque_touches(reached, x, plaque_axis, K, d)) return true;
    if (!plaque_open(open, x, plaque_axis, K, d)) return true;
    found = x;
    return false;
  });
  return found;
}

std::optional<Coord> top_seed_in(const BondOracle& open, const ReachSet& reached,
                                 int K, int l, int h, int d, int subfacet) {
  Coord lo{}, hi{};
  lo[d - 1] = hi[d - 1] = h;
  for (int a = 0; a + 1 < d; ++a) {
    lo[a] = -(l - K);
    hi[a] = l - K;
  }
  if (subfacet > 0) {
    Region T = top_subfacets(l, h, d)[subfacet - 1];
    for (int a = 0; a + 1 < d; ++a) {
      lo[a] = std::max(lo[a], T.lo()[a]);
      hi[a] = std::min(hi[a], T.hi()[a]);
    }
  }
  return scan_seed_centers(open, reached, K, d, d - 1, lo, hi);
}

std::optional<Coord> side_seed_in(const BondOracle& open, const ReachSet& reached,
                                  int K, int l, int h, int d, int subfacet,
                                  int* axis_out, int* sign_out) {
  auto scan_face = [&](int fa, int sign, const Region* S) -> std::optional<Coord> {
    Coord lo{}, hi{};
    lo[fa] = hi[fa] = sign * l;
    lo[d - 1] = K;
    hi[d - 1] = h - K;
    for (int a = 0; a + 1 < d; ++a) {
      if (a == fa) continue;
      lo[a] = -(l - K);
      hi[a] = l - K;
      if (S != nullptr) {
        lo[a] = std::max(lo[a], S->lo()[a]);
        hi[a] = std::min(hi[a], S->hi()[a]);
      }
    }
    auto x = scan_seed_centers(open, reached, K, d, fa, lo, hi);
    if (x && axis_out != nullptr) *axis_out = fa;
    if (x && sign_out != nullptr) *sign_out = sign;
    return x;
  };
  if (subfacet == 0) {
    for (int fa = 0; fa + 1 < d; ++fa) {
      for (int sign = 1; sign >= -1; sign -= 2) {
        if (auto x = scan_face(fa, sign, nullptr)) return x;
      }
    }
    return std::nullopt;
  }
  Region S = side_subfacets(l, h, d)[subfacet - 1];
  int fa = -1;
  for (int a = 0; a + 1 < d; ++a) {
    if (S.lo()[a] == S.hi()[a]) fa = a;
  }
  if (fa < 0) throw std::invalid_argument("side subfacet has no pinned axis");
  int sign = S.lo()[fa] > 0 ? 1 : -1;
  return scan_face(fa, sign, &S);
}

void check_block_params(int K, int l, int h) {
  if (K < 1 || l < K || h < 2 * K) {
    throw std::invalid_argument("block detector needs K >= 1, l >= K, h >= 2K");
  }
}

BondOracle placed_oracle(const System& sys, const ExplicitConfig& cfg,
                         const PlacedBlock& pb) {
  return [&sys, &cfg, pb](const Bond& local) {
    return ConfigOracle{&sys, &cfg}(pb.to_global_bond(local));
  };
}

std::int64_t span_of(int N, double delta) {
  double raw = delta * N;
  auto span = static_cast<std::int64_t>(std::llround(raw));
  if (std::abs(raw - static_cast<double>(span)) > 1e-9 || span < 1) {
    throw std::invalid_argument("delta*N must be a positive integer");
  }
  return span;
}

// Open crossing between the z = -span and z = +span faces of R(N,delta) by a
// path whose sites all stay in the rectangle. Bonds leaving R are never read:
// a one-site excursion cannot re-enter elsewhere, and wired ghosts are not
// part of the rectangle.
bool face_crossing(const System& sys, const ExplicitConfig& cfg, int N,
                   double delta) {
  int d = sys.region.dim();
  std::int64_t span = span_of(N, delta);
  ConfigOracle open{&sys, &cfg};
  auto in_rect = [&](const Coord& c) {
    for (int a = 0; a + 1 < d; ++a) {
      if (std::abs(c[a]) > N) return false;
    }
    return std::abs(c[d - 1]) <= span;
  };
  std::unordered_set<std::uint64_t> vis;
  std::vector<Coord> stack;
  auto push = [&](const Coord& c) {
    if (vis.insert(site_key(c)).second) stack.push_back(c);
  };
  Coord lo{}, hi{};
  for (int a = 0; a + 1 < d; ++a) {
    lo[a] = -N;
    hi[a] = N;
  }
  lo[d - 1] = hi[d - 1] = -span;
  Coord top_corner = hi;
  top_corner[d - 1] = span;
  if (!sys.region.contains(lo) || !sys.region.contains(top_corner)) {
    throw std::invalid_argument("rectangle exceeds the system region");
  }
  scan_box(lo, hi, d, [&](const Coord& c) {
    push(c);
    return true;
  });
  while (!stack.empty()) {
    Coord c = stack.back();
    stack.pop_back();
    if (c[d - 1] == span) return true;
    for (int a = 0; a < d; ++a) {
      for (int dir = -1; dir <= 1; dir += 2) {
        Coord n = coord_shift(c, a, dir);
        if (!in_rect(n)) continue;
        if (vis.count(site_key(n)) != 0) continue;
        Bond b{dir > 0 ? c : n, a};
        if (!open(b)) continue;
        push(n);
      }
    }
  }
  return false;
}

std::int64_t node_or_throw(const System& sys, const Coord& c) {
  std::int64_t n = sys.node_of_site(c);
  if (n < 0) throw std::invalid_argument("site is not part of the system");
  return n;
}

struct EventEval {
  const System& sys;
  const ExplicitConfig& cfg;

  bool operator()(const EvTwoPoint& e) const {
    return connected(sys, cfg, {e.a}, {e.b});
  }
  bool operator()(const EvConnect& e) const {
    if (e.A.empty() || e.B.empty()) {
      throw std::invalid_argument("connection event needs nonempty site sets");
    }
    return connected(sys, cfg, e.A, e.B);
  }
  bool operator()(const EvFaceCross& e) const {
    return face_crossing(sys, cfg, e.N, e.delta);
  }
  bool operator()(const EvDisconnect& e) const {
    return !face_crossing(sys, cfg, e.N, e.delta);
  }
  bool operator()(const EvBoxPerc&) const {
    Coord origin{};
    std::int64_t o = node_or_throw(sys, origin);
    ClusterIndex uf(sys);
    uf.build(cfg);
    std::int64_t root = uf.find(o);
    for (std::int64_t n = sys.n_inside; n < sys.n_nodes; ++n) {
      if (uf.find(n) == root) return true;
    }
    return false;
  }
  bool operator()(const EvSeedPresent& e) const {
    return plaque_open(ConfigOracle{&sys, &cfg}, e.center, e.axis, e.K,
                       sys.region.dim());
  }
  bool operator()(const EvTopSeed& e) const {
    check_block_params(e.K, e.l, e.h);
    int d = sys.region.dim();
    PlacedBlock pb{d, e.l, e.h, e.orient, e.anchor};
    BondOracle open = placed_oracle(sys, cfg, pb);
    ReachSet r = block_reach_set(open, e.l, e.h, d, root_plaque_sites(e.K, d));
    return top_seed_in(open, r, e.K, e.l, e.h, d, e.subfacet).has_value();
  }
  bool operator()(const EvSideSeed& e) const {
    check_block_params(e.K, e.l, e.h);
    int d = sys.region.dim();
    PlacedBlock pb{d, e.l, e.h, e.orient, e.anchor};
    BondOracle open = placed_oracle(sys, cfg, pb);
    ReachSet r = block_reach_set(open, e.l, e.h, d, root_plaque_sites(e.K, d));
    return side_seed_in(open, r, e.K, e.l, e.h, d, e.subfacet, nullptr, nullptr)
        .has_value();
  }
  bool operator()(const EvOccupied& e) const {
    int d = sys.region.dim();
    PlacedBlock pb{d, e.l, e.h, e.orient, e.anchor};
    return block_occupied(placed_oracle(sys, cfg, pb), e.K, e.l, e.h, d,
                          root_plaque_sites(e.K, d));
  }
};

}  // namespace

bool eval_event(const System& sys, const ExplicitConfig& cfg,
                const EventSpec& spec) {
  return std::visit(EventEval{sys, cfg}, spec);
}

bool event_increasing(const EventSpec& spec) {
  return !std::holds_alternative<EvDisconnect>(spec);
}

std::string event_name(const EventSpec& spec) {
  struct Namer {
    std::string operator()(const EvTwoPoint&) const { return "two_point"; }
    std::string operator()(const EvConnect&) const { return "connect"; }
    std::string operator()(const EvFaceCross&) const { return "face_cross"; }
    std::string operator()(const EvDisconnect&) const { return "disconnect"; }
    std::string operator()(const EvBoxPerc&) const { return "box_perc"; }
    std::string operator()(const EvSeedPresent&) const { return "seed_present"; }
    std::string operator()(const EvTopSeed&) const { return "top_seed"; }
    std::string operator()(const EvSideSeed&) const { return "side_seed"; }
    std::string operator()(const EvOccupied&) const { return "occupied"; }
  };
  return std::visit(Namer{}, spec);
}

std::vector<Coord> plaque_sites(const Coord& center, int axis, int K, int d) {
  std::vector<Coord> out;
  Coord lo = center, hi = center;
  for (int a = 0; a < d; ++a) {
    if (a == axis) continue;
    lo[a] -= K;
    hi[a] += K;
  }
  scan_box(lo, hi, d, [&](const Coord& c) {
    out.push_back(c);
    return true;
  });
  return out;
}

bool plaque_open(const BondOracle& open, const Coord& center, int axis, int K,
                 int d) {
  for (int a = 0; a < d; ++a) {
    if (a == axis) continue;
    Coord lo = center, hi = center;
    for (int b = 0; b < d; ++b) {
      if (b == axis) continue;
      lo[b] -= K;
      hi[b] += K;
    }
    hi[a] -= 1;  // bonds along a pair y with y + e_a
    bool ok = scan_box(lo, hi, d, [&](const Coord& c) {
      return open(Bond{c, a});
    });
    if (!ok) return false;
  }
  return true;
}

std::vector<Coord> block_reach(const BondOracle& open, int l, int h, int d,
                               const std::vector<Coord>& sources) {
  return block_reach_set(open, l, h, d, sources).sites;
}

std::optional<Coord> top_seed_connection(const BondOracle& open, int K, int l,
                                         int h, int d, int subfacet,
                                         const std::vector<Coord>& reached) {
  check_block_params(K, l, h);
  ReachSet r;
  r.sites = reached;
  for (const Coord& c : reached) r.keys.insert(site_key(c));
  return top_seed_in(open, r, K, l, h, d, subfacet);
}

std::optional<Coord> side_seed_connection(const BondOracle& open, int K, int l,
                                          int h, int d, int subfacet,
                                          const std::vector<Coord>& reached,
                                          int* axis_out, int* sign_out) {
  check_block_params(K, l, h);
  ReachSet r;
  r.sites = reached;
  for (const Coord& c : reached) r.keys.insert(site_key(c));
  return side_seed_in(open, r, K, l, h, d, subfacet, axis_out, sign_out);
}

std::vector<Coord> root_plaque_sites(int K, int d) {
  return plaque_sites(Coord{}, d - 1, K, d);
}

bool block_occupied(const BondOracle& open, int K, int l, int h, int d,
                    const std::vector<Coord>& sources) {
  check_block_params(K, l, h);
  ReachSet r = block_reach_set(open, l, h, d, sources);
  int n_top = 1 << (d - 1);
  for (int j = 1; j <= n_top; ++j) {
    if (!top_seed_in(open, r, K, l, h, d, j)) return false;
  }
  int n_side = 2 * (d - 1) * (1 << (d - 2));
  for (int j = 1; j <= n_side; ++j) {
    if (!side_seed_in(open, r, K, l, h, d, j, nullptr, nullptr)) return false;
  }
  return true;
}

std::int64_t count_Y(const BondOracle& open, int K, int l, int h, int d) {
  check_block_params(K, l, h);
  ReachSet r = block_reach_set(open, l, h, d, root_plaque_sites(K, d));
  std::int64_t n = 0;
  for (const Coord& c : r.sites) {
    if (c[d - 1] == h) ++n;
  }
  return n;
}

std::int64_t count_X(const BondOracle& open, int K, int l, int h, int d) {
  check_block_params(K, l, h);
  ReachSet r = block_reach_set(open, l, h, d, root_plaque_sites(K, d));
  std::int64_t n = 0;
  for (const Coord& c : r.sites) {
    for (int a = 0; a + 1 < d; ++a) {
      if (std::abs(c[a]) == l) {
        ++n;
        break;
      }
    }
  }
  return n;
}

Estimate estimate_event(const System& sys, const SamplerCfg& scfg,
                        const EventSpec& spec) {
  Estimate est = sample_event_probability(
      sys, scfg, [&spec](const System& s, const ExplicitConfig& c) {
        return eval_event(s, c, spec);
      });
  est.method = event_name(spec) + "/" + est.method;
  return est;
}

Estimate estimate_event(const Region& region, const RcParams& params,
                        const BoundaryCondition& bc, const EventSpec& spec,
                        const SamplerCfg& scfg) {
  System sys = compile_system(region, params, bc);
  return estimate_event(sys, scfg, spec);
}

// ---------------------------------------------------------------------------
// Surface tension.
// ---------------------------------------------------------------------------

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 16-point Gauss-Legendre rule on [-1,1].
constexpr int kGlPoints = 16;
constexpr double kGlAbscissa[kGlPoints / 2] = {
    0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
    0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
    0.9445750230732326, 0.9894009349916499};
constexpr double kGlWeight[kGlPoints / 2] = {
    0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
    0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
    0.0622535239386479, 0.0271524594117541};

struct GlNode {
  double s = 0;
  double w = 0;
};

// Nodes of the rule mapped to [0, p], ascending in s.
std::vector<GlNode> gl_nodes(double p) {
  std::vector<GlNode> nodes;
  for (int i = kGlPoints / 2 - 1; i >= 0; --i) {
    nodes.push_back({p * (1 - kGlAbscissa[i]) / 2, p * kGlWeight[i] / 2});
  }
  for (int i = 0; i < kGlPoints / 2; ++i) {
    nodes.push_back({p * (1 + kGlAbscissa[i]) / 2, p * kGlWeight[i] / 2});
  }
  return nodes;
}

// Bonds of the separating layer: the vertical bonds from (x,0) to (x,1) with
// |x_a| <= N. Closing all of them disconnects the faces of R(N,delta), so the
// all-closed configuration has disconnection probability one and the
// interpolation in s can start from an exactly known point.
std::vector<std::int64_t> layer_bids(const Region& region, int N, int d) {
  std::vector<std::int64_t> bids;
  Coord lo{}, hi{};
  for (int a = 0; a + 1 < d; ++a) {
    lo[a] = -N;
    hi[a] = N;
  }
  scan_box(lo, hi, d, [&](const Coord& c) {
    std::int64_t bid = region.bond_index(Bond{c, d - 1});
    if (bid < 0) throw std::invalid_argument("separating layer leaves region");
    bids.push_back(bid);
    return true;
  });
  return bids;
}

// Heat-bath chain for the measure conditioned on face disconnection.
// Disconnection is decreasing, so only bond openings can violate it; the
// restricted single-bond conditional is then a point mass on closed and the
// update is skipped without drawing. Labels track which nodes reach the
// bottom (1) or top (2) face of R through open fully-inside-R bonds; a bond
// whose endpoints carry both labels is the one kind of blocked opening.
class DisconnectChain {
 public:
  DisconnectChain(const System& sys, int N, double delta, std::uint64_t seed,
                  std::uint64_t stream)
      : sys_(&sys), rng_(seed, stream) {
    int d = sys.region.dim();
    std::int64_t span = span_of(N, delta);
    q_ = sys.params.q;
    q_one_ = q_ == 1.0;
    cfg_ = ExplicitConfig(static_cast<std::int64_t>(sys.bonds.size()));
    node_in_rect_.assign(sys.n_nodes, 0);
    anchor_.assign(sys.n_nodes, 0);
    lab_.assign(sys.n_nodes, 0);
    for (std::int64_t n = 0; n < sys.n_inside; ++n) {
      Coord c = sys.region.vertex_at(n);
      bool in = std::abs(c[d - 1]) <= span;
      for (int a = 0; a + 1 < d; ++a) in = in && std::abs(c[a]) <= N;
      if (!in) continue;
      node_in_rect_[n] = 1;
      if (c[d - 1] == -span) anchor_[n] = 1;
      if (c[d - 1] == span) anchor_[n] = 2;
      lab_[n] = anchor_[n];
    }
    internal_.assign(sys.bonds.size(), 0);
    for (std::size_t i = 0; i < sys.bonds.size(); ++i) {
      const SysBond& b = sys.bonds[i];
      internal_[i] = node_in_rect_[b.u] && node_in_rect_[b.v];
    }
    side_.assign(sys.n_nodes, 0);
    stamp_.assign(sys.n_nodes, 0);
  }

  const ExplicitConfig& config() const { return cfg_; }

  void sweep() {
    const auto& bonds = sys_->bonds;
    for (std::size_t i = 0; i < bonds.size(); ++i) {
      const SysBond& b = bonds[i];
      bool open_now = cfg_.open(static_cast<std::int64_t>(i));
      if (!open_now && internal_[i] && lab_[b.u] != 0 && lab_[b.v] != 0 &&
          lab_[b.u] != lab_[b.v]) {
        continue;  // opening would join the faces; stay closed, no draw
      }
      double po = b.p;
      if (!q_one_) {
        SplitProbe pr = probe_split(*sys_, cfg_, b.u, b.v,
                                    static_cast<std::int64_t>(i));
        if (!pr.joined && pr.delta == 1) po = b.p / (b.p + (1 - b.p) * q_);
      }
      bool next_open = rng_.next_u01() < po;
      if (next_open == open_now) continue;
      cfg_.set_open(static_cast<std::int64_t>(i), next_open);
      if (!internal_[i]) continue;
      if (next_open) {
        merge_labels(b.u, b.v);
      } else if (lab_[b.u] != 0 && lab_[b.u] == lab_[b.v]) {
        repair_label(b.u, b.v, lab_[b.u]);
      }
    }
  }

 private:
  void for_open_internal_neighbors(std::int64_t n, const auto& f) {
    for (std::int64_t e = sys_->adj_offset[n]; e < sys_->adj_offset[n + 1]; ++e) {
      auto [m, sb] = sys_->adj[e];
      if (internal_[sb] && cfg_.open(sb)) f(static_cast<std::int64_t>(m));
    }
  }

  void merge_labels(std::int64_t u, std::int64_t v) {
    std::uint8_t lu = lab_[u], lv = lab_[v];
    if (lu == lv) return;
    if (lu != 0 && lv == 0) spread(lu, v);
    if (lv != 0 && lu == 0) spread(lv, u);
  }

  // Flood the label into the unlabeled side. Any node met with a label
  // already carries the same one: a different label would mean the faces
  // were joined before this opening.
  void spread(std::uint8_t label, std::int64_t start) {
    scratch_.clear();
    scratch_.push_back(start);
    lab_[start] = label;
    while (!scratch_.empty()) {
      std::int64_t n = scratch_.back();
      scratch_.pop_back();
      for_open_internal_neighbors(n, [&](std::int64_t m) {
        if (lab_[m] == 0) {
          lab_[m] = label;
          scratch_.push_back(m);
        }
      });
    }
  }

  // After closing a bond inside a labeled cluster, decide whether the
  // cluster split and clear the label from the half that lost its face.
  // Bidirectional search restricted to the old label keeps the cost near
  // the smaller fragment.
  void repair_label(std::int64_t u, std::int64_t v, std::uint8_t label) {
    ++epoch_;
    if (epoch_ == 0) {
      std::fill(stamp_.begin(), stamp_.end(), 0);
      ++epoch_;
    }
    std::vector<std::int64_t>& fu = frontier_[0];
    std::vector<std::int64_t>& fv = frontier_[1];
    std::vector<std::int64_t>& cu = members_[0];
    std::vector<std::int64_t>& cv = members_[1];
    fu.assign(1, u);
    fv.assign(1, v);
    cu.assign(1, u);
    cv.assign(1, v);
    bool has_anchor[2] = {anchor_[u] == label, anchor_[v] == label};
    stamp_[u] = epoch_;
    side_[u] = 0;
    stamp_[v] = epoch_;
    side_[v] = 1;
    // Expand one side by a node; true when the sides meet.
    auto expand = [&](int s) -> bool {
      std::int64_t n = frontier_[s].back();
      frontier_[s].pop_back();
      bool met = false;
      for_open_internal_neighbors(n, [&](std::int64_t m) {
        if (met || lab_[m] != label) return;
        if (stamp_[m] == epoch_) {
          if (side_[m] != s) met = true;
          return;
        }
        stamp_[m] = epoch_;
        side_[m] = static_cast<std::uint8_t>(s);
        frontier_[s].push_back(m);
        members_[s].push_back(m);
        if (anchor_[m] == label) has_anchor[s] = true;
      });
      return met;
    };
    for (;;) {
      if (frontier_[0].empty() || frontier_[1].empty()) break;
      int s = frontier_[0].size() + members_[0].size() <=
                      frontier_[1].size() + members_[1].size()
                  ? 0
                  : 1;
      if (expand(s)) return;  // still one cluster; labels stand
    }
    int done = frontier_[0].empty() ? 0 : 1;
    if (!has_anchor[done]) {
      for (std::int64_t n : members_[done]) lab_[n] = 0;
      return;
    }
    // The exhausted side kept a face; finish the other side to see whether
    // it lost its own.
    int other = 1 - done;
    while (!has_anchor[other] && !frontier_[other].empty()) {
      if (expand(other)) return;
    }
    if (!has_anchor[other]) {
      for (std::int64_t n : members_[other]) lab_[n] = 0;
    }
  }

  const System* sys_;
  RngStream rng_;
  double q_ = 1;
  bool q_one_ = true;
  ExplicitConfig cfg_;
  std::vector<std::uint8_t> node_in_rect_;
  std::vector<std::uint8_t> internal_;
  std::vector<std::uint8_t> anchor_;
  std::vector<std::uint8_t> lab_;
  std::vector<std::int64_t> scratch_;
  std::vector<std::int64_t> frontier_[2];
  std::vector<std::int64_t> members_[2];
  std::vector<std::uint8_t> side_;
  std::vector<std::uint32_t> stamp_;
  std::uint32_t epoch_ = 0;
};

std::uint64_t cond_stream(int node, int replica) {
  return mix64(0xC09D171093000000ULL + (static_cast<std::uint64_t>(node) << 20) +
               static_cast<std::uint64_t>(replica));
}

}  // namespace

TensionResult surface_tension_estimate(int N, double delta, int L, int d,
                                       const RcParams& params,
                                       const BoundaryCondition& bc,
                                       const SamplerCfg& scfg,
                                       TensionMode mode) {
  params.validate();
  scfg.validate();
  std::int64_t span = span_of(N, delta);
  (void)span;
  Region rect = build_rectangle(N, delta, L, d, true);
  double denom = std::pow(static_cast<double>(N), d - 1);

  if (mode == TensionMode::Auto) {
    TensionResult direct =
        surface_tension_estimate(N, delta, L, d, params, bc, scfg,
                                 TensionMode::Direct);
    if (!direct.infinite || params.p >= 1) return direct;
    return surface_tension_estimate(N, delta, L, d, params, bc, scfg,
                                    TensionMode::Interpolation);
  }

  if (mode == TensionMode::Direct) {
    System sys = compile_system(rect, params, bc);
    Estimate est = estimate_event(sys, scfg, EvDisconnect{N, delta});
    std::int64_t n = est.n_samples;
    auto k = static_cast<std::int64_t>(std::llround(est.value * n));
    WilsonInterval wil = wilson_interval(k, n);
    double p_lo = wil.lo;
    double p_hi = wil.hi;
    if (est.ci_valid()) {
      p_lo = std::max(0.0, std::min(p_lo, est.lo()));
      p_hi = std::min(1.0, std::max(p_hi, est.hi()));
    }
    TensionResult r;
    r.method = "direct";
    r.n_samples = n;
    r.p_hat = est.value;
    if (k == 0) {
      r.infinite = true;
      r.tau = kInf;
      r.hi = kInf;
      r.lo = -std::log(p_hi) / denom;
      return r;
    }
    r.tau = -std::log(est.value) / denom;
    r.lo = -std::log(p_hi) / denom;
    r.hi = p_lo > 0 ? -std::log(p_lo) / denom : kInf;
    return r;
  }

  // Interpolation mode: with the layer at intensity s = 0 disconnection is
  // certain, and
  //   log P_p(J) = int_0^p sum_{b in layer} (E_{s|J}[w_b] - E_s[w_b])
  //                / (s(1-s)) ds,
  // the per-bond derivative of the log-probability under independent
  // intensity changes on the layer. Gauss-Legendre nodes in s, one
  // conditioned chain per node and replica.
  if (params.p >= 1) {
    throw std::invalid_argument("interpolation mode needs p < 1");
  }
  std::vector<std::int64_t> bids = layer_bids(rect, N, d);
  std::vector<GlNode> nodes = gl_nodes(params.p);
  int n_nodes = static_cast<int>(nodes.size());

  std::vector<System> systems;
  systems.reserve(n_nodes);
  std::vector<std::vector<std::int64_t>> layer_sbonds(n_nodes);
  for (int k = 0; k < n_nodes; ++k) {
    RcParams pk = params;
    for (std::int64_t bid : bids) pk.set_override(bid, nodes[k].s);
    systems.push_back(compile_system(rect, pk, bc));
    for (std::int64_t bid : bids) {
      std::int64_t sb = systems[k].sbond_index(bid);
      if (sb < 0) throw std::logic_error("layer bond missing from system");
      layer_sbonds[k].push_back(sb);
    }
  }

  std::int64_t kept = scfg.sweeps / scfg.thinning;
  if (kept < 1) throw estimator_failure("no samples kept after thinning");
  std::int64_t per = std::min<std::int64_t>(32, kept);

  int replicas = scfg.replicas;
  std::vector<std::vector<double>> cond_bm(
      static_cast<std::size_t>(n_nodes) * replicas);
  for_each_replica(scfg.exec, n_nodes * replicas, [&](int task) {
    int k = task / replicas;
    int r = task % replicas;
    const System& sys = systems[k];
    DisconnectChain chain(sys, N, delta, scfg.seed,
                          cond_stream(k, scfg.replica_base + r));
    for (std::int64_t t = 0; t < scfg.burn_in; ++t) chain.sweep();
    std::vector<double> sums(per, 0);
    std::vector<std::int64_t> counts(per, 0);
    std::int64_t seen = 0;
    for (std::int64_t t = 0; t < scfg.sweeps; ++t) {
      chain.sweep();
      if ((t + 1) % scfg.thinning != 0) continue;
      double open_count = 0;
      for (std::int64_t sb : layer_sbonds[k]) {
        open_count += chain.config().open(sb) ? 1 : 0;
      }
      std::int64_t b = seen * per / kept;
      sums[b] += open_count;
      counts[b] += 1;
      ++seen;
    }
    std::vector<double> bm(per);
    for (std::int64_t b = 0; b < per; ++b) bm[b] = sums[b] / counts[b];
    cond_bm[task] = std::move(bm);
  });

  double tau = 0;
  double var = 0;
  std::int64_t total = 0;
  SamplerCfg inner = scfg;
  inner.exec = ExecMode::Serial;
  for (int k = 0; k < n_nodes; ++k) {
    std::vector<double> bm;
    for (int r = 0; r < replicas; ++r) {
      auto& part = cond_bm[static_cast<std::size_t>(k) * replicas + r];
      bm.insert(bm.end(), part.begin(), part.end());
    }
    Estimate cond = make_estimate(std::move(bm), kept * replicas, "cond-layer");
    double uncond_mean;
    double uncond_hw = 0;
    if (params.q == 1.0) {
      // independent bonds: the unconditioned marginal is s exactly
      uncond_mean = nodes[k].s * static_cast<double>(bids.size());
    } else {
      inner.replica_base = scfg.replica_base + (k + 1) * replicas;
      const auto& sbonds = layer_sbonds[k];
      Estimate unc = sample_event_mean(
          systems[k], inner,
          [&sbonds](const System&, const ExplicitConfig& c) {
            double s = 0;
            for (std::int64_t sb : sbonds) s += c.open(sb) ? 1 : 0;
            return s;
          });
      uncond_mean = unc.value;
      uncond_hw = unc.half_width;
      total += unc.n_samples;
    }
    double s = nodes[k].s;
    double coef = nodes[k].w / (s * (1 - s));
    tau -= coef * (cond.value - uncond_mean) / denom;
    double hw = std::hypot(cond.half_width, uncond_hw);
    var += coef * coef * hw * hw / (denom * denom);
    total += cond.n_samples;
  }

  TensionResult r;
  r.method = "interpolation";
  r.tau = tau;
  double hw = std::sqrt(var);
  r.lo = tau - hw;
  r.hi = tau + hw;
  r.n_samples = total;
  r.p_hat = std::exp(-tau * denom);
  return r;
}

MixingGapResult mixing_gap(int K, double s, double p, double q, int d,
                           const SamplerCfg& scfg) {
  if (K < 1) throw std::invalid_argument("mixing gap needs K >= 1");
  if (!(s > 0) || s > p) {
    throw std::invalid_argument("boundary intensity must lie in (0, p]");
  }
  Region box = build_block(K, K, d, true);
  RcParams params;
  params.q = q;
  params.p = p;
  Coord lo{}, hi{};
  for (int a = 0; a + 1 < d; ++a) {
    lo[a] = -K;
    hi[a] = K;
  }
  lo[d - 1] = hi[d - 1] = -1;  // lower endpoints of the below-bottom bonds
  scan_box(lo, hi, d, [&](const Coord& c) {
    std::int64_t bid = box.bond_index(Bond{c, d - 1});
    if (bid < 0) throw std::logic_error("boundary layer bond missing");
    params.set_override(bid, s);
    return true;
  });
  params.validate();

  Coord w0{};
  w0[d - 1] = -1;
  std::int64_t bid0 = box.bond_index(Bond{w0, d - 1});

  auto marginal = [&](const BoundaryCondition& bc) {
    System sys = compile_system(box, params, bc);
    std::int64_t sb = sys.sbond_index(bid0);
    if (sb < 0) throw std::logic_error("probe bond missing from system");
    return sample_event_probability(
        sys, scfg, [sb](const System&, const ExplicitConfig& c) {
          return c.open(sb);
        });
  };

  MixingGapResult r;
  r.K = K;
  r.wired = marginal(BoundaryCondition::wired());
  r.free_bc = marginal(bc_bottom_class(box));
  r.gap = std::abs(r.wired.value - r.free_bc.value);
  r.half_width = std::hypot(r.wired.half_width, r.free_bc.half_width);
  return r;
}

}  // namespace rclab
