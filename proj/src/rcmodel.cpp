#include "rclab/rcmodel.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace rclab {

namespace {

std::uint64_t coord_key(const Coord& c) {
  std::uint64_t k = 0;
  for (int i = 0; i < kMaxDim; ++i) {
    k = (k << 16) | (static_cast<std::uint64_t>(c[i] + 16384) & 0xFFFFULL);
  }
  return k;
}

}  // namespace

double RcParams::intensity(std::int64_t bid) const {
  auto it = std::lower_bound(
      overrides.begin(), overrides.end(), bid,
      [](const auto& kv, std::int64_t b) { return kv.first < b; });
  if (it != overrides.end() && it->first == bid) return it->second;
  return p;
}

void RcParams::set_override(std::int64_t bid, double value) {
  auto it = std::lower_bound(
      overrides.begin(), overrides.end(), bid,
      [](const auto& kv, std::int64_t b) { return kv.first < b; });
  if (it != overrides.end() && it->first == bid) {
    it->second = value;
  } else {
    overrides.insert(it, {bid, value});
  }
}

void RcParams::validate() const {
  if (!(q >= 1.0)) throw std::invalid_argument("cluster weight q must be >= 1");
  auto ok = [](double x) { return x >= 0.0 && x <= 1.0; };
  if (!ok(p)) throw std::invalid_argument("intensity out of [0,1]");
  for (const auto& [bid, v] : overrides) {
    (void)bid;
    if (!ok(v)) throw std::invalid_argument("override intensity out of [0,1]");
  }
}

BoundaryCondition bc_wired_except_vertical(const Region& region) {
  std::vector<Coord> cls;
  region.for_each_bond([&](std::int64_t, const Bond& b) {
    if (b.axis == region.dim() - 1) return;
    auto [x, y] = Region::bond_sites(b);
    if (!region.contains(x)) cls.push_back(x);
    if (!region.contains(y)) cls.push_back(y);
  });
  std::sort(cls.begin(), cls.end());
  cls.erase(std::unique(cls.begin(), cls.end()), cls.end());
  return BoundaryCondition::mixed({std::move(cls)});
}

BoundaryCondition bc_bottom_class(const Region& region) {
  int va = region.dim() - 1;
  std::vector<Coord> cls;
  region.for_each_bond([&](std::int64_t, const Bond& b) {
    if (b.axis != va) return;
    auto [x, y] = Region::bond_sites(b);
    if (!region.contains(x) && x[va] < region.lo()[va]) cls.push_back(x);
  });
  std::sort(cls.begin(), cls.end());
  cls.erase(std::unique(cls.begin(), cls.end()), cls.end());
  return BoundaryCondition::mixed({std::move(cls)});
}

std::int64_t System::node_of_site(const Coord& c) const {
  std::int64_t v = region.vertex_index(c);
  if (v >= 0) return v;
  // wired identification covers every exterior site, not just bond endpoints
  if (bc.kind == BcKind::Wired) return n_inside;
  if (bc.kind == BcKind::Mixed) {
    for (std::size_t k = 0; k < bc.classes.size(); ++k) {
      const auto& cls = bc.classes[k];
      if (std::find(cls.begin(), cls.end(), c) != cls.end()) {
        return n_inside + static_cast<std::int64_t>(k);
      }
    }
  }
  auto it = exterior_nodes_.find(coord_key(c));
  return it == exterior_nodes_.end() ? -1 : it->second;
}

System compile_system(const Region& region, const RcParams& params,
                      const BoundaryCondition& bc) {
  params.validate();
  System sys;
  sys.region = region;
  sys.params = params;
  sys.bc = bc;
  sys.n_inside = region.n_vertices();

  // class lookup for exterior sites
  std::unordered_map<std::uint64_t, std::int64_t> class_of;
  std::int64_t n_classes = 0;
  if (bc.kind == BcKind::Mixed) {
    n_classes = static_cast<std::int64_t>(bc.classes.size());
    for (std::size_t k = 0; k < bc.classes.size(); ++k) {
      for (const Coord& c : bc.classes[k]) {
        auto [it, fresh] = class_of.insert({coord_key(c), static_cast<std::int64_t>(k)});
        if (!fresh) throw std::invalid_argument("boundary classes overlap");
        (void)it;
      }
    }
  } else if (bc.kind == BcKind::Wired) {
    n_classes = 1;
  }
  sys.n_classes = n_classes;

  std::int64_t next_node = sys.n_inside + n_classes;
  sys.node_counted.assign(static_cast<std::size_t>(next_node), 1);
  // class ghosts count, free exterior nodes (added below) do not

  auto exterior_node = [&](const Coord& c) -> std::int64_t {
    if (bc.kind == BcKind::Wired) return sys.n_inside;
    auto it = class_of.find(coord_key(c));
    if (it != class_of.end()) return sys.n_inside + it->second;
    auto [en, fresh] = sys.exterior_nodes_.insert({coord_key(c), next_node});
    if (fresh) {
      ++next_node;
      sys.node_counted.push_back(0);
    }
    return en->second;
  };

  region.for_each_bond([&](std::int64_t bid, const Bond& b) {
    auto [x, y] = Region::bond_sites(b);
    std::int64_t u = region.vertex_index(x);
    std::int64_t v = region.vertex_index(y);
    if (u < 0) u = exterior_node(x);
    if (v < 0) v = exterior_node(y);
    SysBond sb;
    sb.u = static_cast<std::int32_t>(u);
    sb.v = static_cast<std::int32_t>(v);
    sb.p = params.intensity(bid);
    sb.region_bid = bid;
    sys.sbond_of_bid[bid] = static_cast<std::int64_t>(sys.bonds.size());
    sys.bonds.push_back(sb);
  });

  sys.n_nodes = next_node;
  sys.node_degree.assign(static_cast<std::size_t>(sys.n_nodes), 0);
  for (const SysBond& sb : sys.bonds) {
    ++sys.node_degree[sb.u];
    ++sys.node_degree[sb.v];
  }
  bool degrees_ok = true;
  for (std::int64_t n = 0; n < sys.n_nodes; ++n) {
    if (!sys.node_counted[n] && sys.node_degree[n] > 1) degrees_ok = false;
  }
  sys.sw_ok = degrees_ok && n_classes <= 1;

  sys.adj_offset.assign(static_cast<std::size_t>(sys.n_nodes) + 1, 0);
  for (const SysBond& sb : sys.bonds) {
    ++sys.adj_offset[static_cast<std::size_t>(sb.u) + 1];
    ++sys.adj_offset[static_cast<std::size_t>(sb.v) + 1];
  }
  for (std::size_t i = 1; i < sys.adj_offset.size(); ++i) {
    sys.adj_offset[i] += sys.adj_offset[i - 1];
  }
  sys.adj.resize(sys.bonds.size() * 2);
  std::vector<std::int64_t> cursor(sys.adj_offset.begin(), sys.adj_offset.end() - 1);
  for (std::size_t i = 0; i < sys.bonds.size(); ++i) {
    const SysBond& sb = sys.bonds[i];
    sys.adj[cursor[sb.u]++] = {sb.v, static_cast<std::int32_t>(i)};
    sys.adj[cursor[sb.v]++] = {sb.u, static_cast<std::int32_t>(i)};
  }
  return sys;
}

namespace {

struct ProbeScratch {
  std::vector<std::uint32_t> stamp;
  std::vector<std::uint8_t> side;
  std::uint32_t epoch = 0;
};

thread_local ProbeScratch g_probe;

}  // namespace

SplitProbe probe_split(const System& sys, const ExplicitConfig& cfg,
                       std::int64_t u, std::int64_t v, std::int64_t skip_sbond) {
  if (u == v) return {true, 0};
  auto& ps = g_probe;
  if (ps.stamp.size() < static_cast<std::size_t>(sys.n_nodes)) {
    ps.stamp.resize(sys.n_nodes, 0);
    ps.side.resize(sys.n_nodes, 0);
  }
  if (++ps.epoch == 0) {
    std::fill(ps.stamp.begin(), ps.stamp.end(), 0);
    ps.epoch = 1;
  }
  std::uint32_t ep = ps.epoch;
  auto mark = [&](std::int64_t n, std::uint8_t s) {
    ps.stamp[n] = ep;
    ps.side[n] = s;
  };
  std::vector<std::int64_t> front[2];
  bool counted[2] = {sys.node_counted[u] != 0, sys.node_counted[v] != 0};
  front[0].push_back(u);
  front[1].push_back(v);
  mark(u, 0);
  mark(v, 1);

  // Expand one level of side s; returns true if the other side was met.
  auto expand = [&](int s) {
    std::vector<std::int64_t> next;
    for (std::int64_t n : front[s]) {
      for (std::int64_t k = sys.adj_offset[n]; k < sys.adj_offset[n + 1]; ++k) {
        auto [nb, sb] = sys.adj[k];
        if (sb == skip_sbond || !cfg.open(sb)) continue;
        if (ps.stamp[nb] == ep) {
          if (ps.side[nb] != s) return true;
          continue;
        }
        mark(nb, static_cast<std::uint8_t>(s));
        counted[s] = counted[s] || sys.node_counted[nb];
        next.push_back(nb);
      }
    }
    front[s] = std::move(next);
    return false;
  };

  while (!front[0].empty() && !front[1].empty()) {
    int s = front[0].size() <= front[1].size() ? 0 : 1;
    if (expand(s)) return {true, 0};
  }
  // One side is exhausted: the endpoints are split.
  int done = front[0].empty() ? 0 : 1;
  int other = 1 - done;
  if (!counted[done]) return {false, 0};
  while (!front[other].empty() && !counted[other]) {
    expand(other);
  }
  return {false, counted[other] ? 1 : 0};
}

std::int64_t ExplicitConfig::count_open() const {
  std::int64_t c = 0;
  for (std::size_t i = 0; i < bits_.size(); ++i) {
    std::uint64_t w = bits_[i];
    if (static_cast<std::int64_t>((i + 1) * 64) > n_) {
      int extra = static_cast<int>((i + 1) * 64 - n_);
      w &= ~std::uint64_t{0} >> extra;
    }
    c += __builtin_popcountll(w);
  }
  return c;
}

ClusterIndex::ClusterIndex(const System& sys) : sys_(&sys) { reset(); }

void ClusterIndex::reset() {
  parent_.resize(sys_->n_nodes);
  size_.assign(sys_->n_nodes, 1);
  counted_.assign(sys_->node_counted.begin(), sys_->node_counted.end());
  for (std::int64_t i = 0; i < sys_->n_nodes; ++i) parent_[i] = i;
  counted_components_ = 0;
  for (auto c : counted_) counted_components_ += c;
}

std::int64_t ClusterIndex::find(std::int64_t a) const {
  while (parent_[a] != a) {
    parent_[a] = parent_[parent_[a]];
    a = parent_[a];
  }
  return a;
}

void ClusterIndex::add_union(std::int64_t a, std::int64_t b) {
  a = find(a);
  b = find(b);
  if (a == b) return;
  if (size_[a] < size_[b]) std::swap(a, b);
  parent_[b] = a;
  size_[a] += size_[b];
  if (counted_[a] && counted_[b]) --counted_components_;
  counted_[a] = counted_[a] || counted_[b];
}

void ClusterIndex::build(const ExplicitConfig& cfg) {
  reset();
  for (std::size_t i = 0; i < sys_->bonds.size(); ++i) {
    if (cfg.open(static_cast<std::int64_t>(i))) {
      add_union(sys_->bonds[i].u, sys_->bonds[i].v);
    }
  }
}

std::int64_t cluster_count(const System& sys, const ExplicitConfig& cfg) {
  ClusterIndex ci(sys);
  ci.build(cfg);
  return ci.cluster_count();
}

bool connected(const System& sys, const ExplicitConfig& cfg,
               const std::vector<Coord>& A, const std::vector<Coord>& B) {
  if (A.empty() || B.empty()) return false;
  ClusterIndex ci(sys);
  ci.build(cfg);
  for (const Coord& a : A) {
    std::int64_t na = sys.node_of_site(a);
    if (na < 0) continue;
    for (const Coord& b : B) {
      std::int64_t nb = sys.node_of_site(b);
      if (nb >= 0 && ci.same(na, nb)) return true;
    }
  }
  return false;
}

bool connected_within(const Region& ambient,
                      const std::function<bool(const Bond&)>& open,
                      const Region& sub, const std::vector<Coord>& A,
                      const std::vector<Coord>& B) {
  // BFS over sites, walking only open bonds that meet sub's vertex set.
  std::unordered_map<std::uint64_t, bool> seen;
  std::deque<Coord> queue;
  auto target = [&](const Coord& c) {
    return std::find(B.begin(), B.end(), c) != B.end();
  };
  for (const Coord& a : A) {
    if (!ambient.contains(a)) continue;
    if (target(a)) return true;
    if (seen.emplace(coord_key(a), true).second) queue.push_back(a);
  }
  int d = ambient.dim();
  while (!queue.empty()) {
    Coord c = queue.front();
    queue.pop_front();
    for (int a = 0; a < d; ++a) {
      for (int s = -1; s <= 1; s += 2) {
        Bond b;
        b.axis = a;
        b.w = s > 0 ? c : coord_shift(c, a, -1);
        if (!sub.contains(b.w) && !sub.contains(coord_shift(b.w, a, 1))) {
          continue;  // bond not in E_sub
        }
        if (ambient.bond_index(b) < 0) continue;
        if (!open(b)) continue;
        Coord nxt = coord_shift(c, a, s);
        if (!ambient.contains(nxt)) continue;
        if (!seen.emplace(coord_key(nxt), true).second) continue;
        if (target(nxt)) return true;
        queue.push_back(nxt);
      }
    }
  }
  return false;
}

double log_weight(const System& sys, const ExplicitConfig& cfg) {
  double lw = 0;
  for (std::size_t i = 0; i < sys.bonds.size(); ++i) {
    double p = sys.bonds[i].p;
    bool open = cfg.open(static_cast<std::int64_t>(i));
    if (open) {
      if (p <= 0.0) return kMinusInf;
      lw += std::log(p);
    } else {
      if (p >= 1.0) return kMinusInf;
      lw += std::log1p(-p);
    }
  }
  lw += static_cast<double>(cluster_count(sys, cfg)) * std::log(sys.params.q);
  return lw;
}

}  // namespace rclab
