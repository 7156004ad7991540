#include "rclab/lattice.hpp"

#include <algorithm>
#include <cmath>

namespace rclab {

namespace {

std::uint64_t coord_key(const Coord& c) {
  std::uint64_t k = 0;
  for (int i = 0; i < kMaxDim; ++i) {
    k = (k << 16) | (static_cast<std::uint64_t>(c[i] + 16384) & 0xFFFFULL);
  }
  return k;
}

std::int64_t box_volume(const Coord& lo, const Coord& hi, int dim) {
  std::int64_t v = 1;
  for (int a = 0; a < dim; ++a) {
    if (hi[a] < lo[a]) return 0;
    v *= hi[a] - lo[a] + 1;
  }
  return v;
}

std::int64_t box_index(const Coord& lo, const Coord& hi, int dim,
                       const Coord& c) {
  std::int64_t idx = 0;
  for (int a = 0; a < dim; ++a) {
    if (c[a] < lo[a] || c[a] > hi[a]) return -1;
    idx = idx * (hi[a] - lo[a] + 1) + (c[a] - lo[a]);
  }
  return idx;
}

Coord box_at(const Coord& lo, const Coord& hi, int dim, std::int64_t idx) {
  Coord c{};
  for (int a = dim - 1; a >= 0; --a) {
    std::int64_t ext = hi[a] - lo[a] + 1;
    c[a] = lo[a] + static_cast<std::int32_t>(idx % ext);
    idx /= ext;
  }
  return c;
}

}  // namespace

bool Region::contains(const Coord& c) const {
  if (kind_ == RegionKind::Custom) {
    return custom_->vertex_lookup.count(coord_key(c)) != 0;
  }
  for (int a = 0; a < dim_; ++a) {
    if (c[a] < lo_[a] || c[a] > hi_[a]) return false;
  }
  for (int a = dim_; a < kMaxDim; ++a) {
    if (c[a] != 0) return false;
  }
  return true;
}

std::int64_t Region::vertex_index(const Coord& c) const {
  if (kind_ == RegionKind::Custom) {
    auto it = custom_->vertex_lookup.find(coord_key(c));
    return it == custom_->vertex_lookup.end() ? -1 : it->second;
  }
  if (!contains(c)) return -1;
  return box_index(lo_, hi_, dim_, c);
}

Coord Region::vertex_at(std::int64_t idx) const {
  if (kind_ == RegionKind::Custom) return custom_->vertices[idx];
  return box_at(lo_, hi_, dim_, idx);
}

Bond Region::bond_at(std::int64_t bid) const {
  if (kind_ == RegionKind::Custom) return custom_->bonds[bid];
  for (int a = dim_ - 1; a >= 0; --a) {
    if (bid >= bond_offset_[a]) {
      Bond b;
      b.axis = a;
      b.w = box_at(bond_lo_[a], bond_hi_[a], dim_, bid - bond_offset_[a]);
      return b;
    }
  }
  throw std::out_of_range("bond id");
}

std::int64_t Region::bond_index(const Bond& b) const {
  if (kind_ == RegionKind::Custom) {
    auto it = custom_->bond_lookup.find(bond_key(b));
    return it == custom_->bond_lookup.end() ? -1 : it->second;
  }
  if (b.axis < 0 || b.axis >= dim_) return -1;
  for (int a = dim_; a < kMaxDim; ++a) {
    if (b.w[a] != 0) return -1;
  }
  std::int64_t idx = box_index(bond_lo_[b.axis], bond_hi_[b.axis], dim_, b.w);
  if (idx < 0) return -1;
  return bond_offset_[b.axis] + idx;
}

void Region::for_each_bond(
    const std::function<void(std::int64_t, const Bond&)>& f) const {
  if (kind_ == RegionKind::Custom) {
    for (std::int64_t i = 0; i < n_bonds_; ++i) f(i, custom_->bonds[i]);
    return;
  }
  for (int a = 0; a < dim_; ++a) {
    std::int64_t n = box_volume(bond_lo_[a], bond_hi_[a], dim_);
    for (std::int64_t i = 0; i < n; ++i) {
      Bond b;
      b.axis = a;
      b.w = box_at(bond_lo_[a], bond_hi_[a], dim_, i);
      f(bond_offset_[a] + i, b);
    }
  }
}

Region Region::interior() const {
  if (kind_ == RegionKind::Custom) {
    std::vector<Coord> inner;
    for (const Coord& v : custom_->vertices) {
      bool all = true;
      for (int a = 0; a < dim_ && all; ++a) {
        all = contains(coord_shift(v, a, 1)) && contains(coord_shift(v, a, -1));
      }
      if (all) inner.push_back(v);
    }
    return Region::custom(dim_, std::move(inner), include_exterior_);
  }
  Coord lo = lo_;
  Coord hi = hi_;
  for (int a = 0; a < dim_; ++a) {
    ++lo[a];
    --hi[a];
  }
  return Region::box(dim_, lo, hi, kind_, include_exterior_, plaque_axis_);
}

Region Region::box(int dim, Coord lo, Coord hi, RegionKind kind,
                   bool include_exterior, int plaque_axis) {
  if (dim < 1 || dim > kMaxDim) throw std::invalid_argument("dimension");
  for (int a = 0; a < dim; ++a) {
    if (hi[a] < lo[a]) throw std::invalid_argument("empty box axis");
  }
  Region r;
  r.dim_ = dim;
  r.kind_ = kind;
  r.lo_ = lo;
  r.hi_ = hi;
  r.include_exterior_ = include_exterior;
  r.plaque_axis_ = plaque_axis;
  r.init_box();
  return r;
}

void Region::init_box() {
  n_vertices_ = box_volume(lo_, hi_, dim_);
  std::int64_t off = 0;
  for (int a = 0; a < dim_; ++a) {
    bond_lo_[a] = lo_;
    bond_hi_[a] = hi_;
    if (include_exterior_) {
      bond_lo_[a][a] -= 1;  // w = lo-1 is the boundary bond from below
    } else {
      bond_hi_[a][a] -= 1;  // both endpoints inside
    }
    bond_offset_[a] = off;
    off += box_volume(bond_lo_[a], bond_hi_[a], dim_);
  }
  n_bonds_ = off;
}

Region Region::custom(int dim, std::vector<Coord> vertices,
                      bool include_exterior) {
  Region r;
  r.dim_ = dim;
  r.kind_ = RegionKind::Custom;
  r.include_exterior_ = include_exterior;
  r.init_custom(std::move(vertices));
  return r;
}

void Region::init_custom(std::vector<Coord> vertices) {
  std::sort(vertices.begin(), vertices.end());
  vertices.erase(std::unique(vertices.begin(), vertices.end()),
                 vertices.end());
  auto data = std::make_shared<CustomData>();
  data->vertices = std::move(vertices);
  for (std::size_t i = 0; i < data->vertices.size(); ++i) {
    data->vertex_lookup[coord_key(data->vertices[i])] =
        static_cast<std::int64_t>(i);
  }
  auto inside = [&](const Coord& c) {
    return data->vertex_lookup.count(coord_key(c)) != 0;
  };
  Coord lo{}, hi{};
  bool first = true;
  for (const Coord& v : data->vertices) {
    if (first) {
      lo = hi = v;
      first = false;
    }
    for (int a = 0; a < dim_; ++a) {
      lo[a] = std::min(lo[a], v[a]);
      hi[a] = std::max(hi[a], v[a]);
    }
    for (int a = 0; a < dim_; ++a) {
      Coord up = coord_shift(v, a, 1);
      if (inside(up) || include_exterior_) {
        data->bonds.push_back(Bond{v, a});
      }
      Coord dn = coord_shift(v, a, -1);
      if (!inside(dn) && include_exterior_) {
        data->bonds.push_back(Bond{dn, a});
      }
    }
  }
  // canonical order, no duplicates
  std::sort(data->bonds.begin(), data->bonds.end(),
            [](const Bond& x, const Bond& y) {
              return std::tie(x.axis, x.w) < std::tie(y.axis, y.w);
            });
  data->bonds.erase(std::unique(data->bonds.begin(), data->bonds.end()),
                    data->bonds.end());
  for (std::size_t i = 0; i < data->bonds.size(); ++i) {
    data->bond_lookup[bond_key(data->bonds[i])] =
        static_cast<std::int64_t>(i);
  }
  lo_ = lo;
  hi_ = hi;
  n_vertices_ = static_cast<std::int64_t>(data->vertices.size());
  n_bonds_ = static_cast<std::int64_t>(data->bonds.size());
  custom_ = std::move(data);
}

Region build_box(int N, int d, bool include_exterior) {
  if (N < 0) throw std::invalid_argument("box extent");
  Coord lo{}, hi{};
  for (int a = 0; a < d; ++a) {
    lo[a] = -N;
    hi[a] = N;
  }
  return Region::box(d, lo, hi, RegionKind::Box, include_exterior);
}

Region build_block(int l, int h, int d, bool include_exterior) {
  if (l < 1 || h < 1 || d < 2) throw std::invalid_argument("block parameters");
  Coord lo{}, hi{};
  for (int a = 0; a < d - 1; ++a) {
    lo[a] = -l;
    hi[a] = l;
  }
  lo[d - 1] = 0;
  hi[d - 1] = h;
  return Region::box(d, lo, hi, RegionKind::Block, include_exterior);
}

Region build_slab(int L, int N, int d, bool include_exterior) {
  if (d < 3) throw std::invalid_argument("slabs need d >= 3");
  if (L < 0 || N < 1) throw std::invalid_argument("slab parameters");
  Coord lo{}, hi{};
  for (int a = 0; a < d - 2; ++a) {
    lo[a] = -L;
    hi[a] = L;
  }
  for (int a = d - 2; a < d; ++a) {
    lo[a] = -N;
    hi[a] = N;
  }
  return Region::box(d, lo, hi, RegionKind::Slab, include_exterior);
}

Region build_rectangle(int N, double delta, int L, int d,
                       bool include_exterior) {
  if (L < 0 || N < 1) throw std::invalid_argument("rectangle parameters");
  double dn = delta * N;
  if (std::abs(dn - std::llround(dn)) > 1e-9) {
    throw std::invalid_argument("delta*N must be integral");
  }
  auto span = static_cast<std::int32_t>(std::llround(dn)) + L;
  Coord lo{}, hi{};
  for (int a = 0; a < d - 1; ++a) {
    lo[a] = -N;
    hi[a] = N;
  }
  lo[d - 1] = -span;
  hi[d - 1] = span;
  return Region::box(d, lo, hi, RegionKind::Rectangle, include_exterior);
}

Region seed_plaque(const Coord& center, int axis, int K, int d) {
  if (K < 1 || axis < 0 || axis >= d) throw std::invalid_argument("plaque");
  Coord lo = center, hi = center;
  for (int a = 0; a < d; ++a) {
    if (a == axis) continue;
    lo[a] -= K;
    hi[a] += K;
  }
  return Region::box(d, lo, hi, RegionKind::SeedPlaque, false, axis);
}

Region block_top_face(int l, int h, int d) {
  Coord lo{}, hi{};
  for (int a = 0; a < d - 1; ++a) {
    lo[a] = -l;
    hi[a] = l;
  }
  lo[d - 1] = hi[d - 1] = h;
  return Region::box(d, lo, hi, RegionKind::Box, false);
}

std::vector<Region> top_subfacets(int l, int h, int d) {
  std::vector<Region> out;
  int n = 1 << (d - 1);
  for (int j = 1; j <= n; ++j) {
    int pattern = j - 1;
    Coord lo{}, hi{};
    for (int a = 0; a < d - 1; ++a) {
      int bit = (pattern >> (d - 2 - a)) & 1;
      lo[a] = bit ? -l : 0;
      hi[a] = bit ? 0 : l;
    }
    lo[d - 1] = hi[d - 1] = h;
    out.push_back(Region::box(d, lo, hi, RegionKind::Box, false));
  }
  return out;
}

std::vector<Region> side_subfacets(int l, int h, int d) {
  std::vector<Region> out;
  int patterns = 1 << (d - 2);
  for (int a = 1; a <= d - 1; ++a) {     // fixed lateral axis, 1-based
    for (int s = 0; s <= 1; ++s) {       // 0: +l side, 1: -l side
      for (int pattern = 0; pattern < patterns; ++pattern) {
        Coord lo{}, hi{};
        int bitpos = d - 3;  // remaining lateral axes, ascending order
        for (int b = 0; b < d - 1; ++b) {
          if (b == a - 1) {
            lo[b] = hi[b] = s ? -l : l;
          } else {
            int bit = (pattern >> bitpos) & 1;
            --bitpos;
            lo[b] = bit ? -l : 0;
            hi[b] = bit ? 0 : l;
          }
        }
        lo[d - 1] = 0;
        hi[d - 1] = h;
        out.push_back(Region::box(d, lo, hi, RegionKind::Box, false));
      }
    }
  }
  return out;
}

int steering_choice(const Coord& y, int d) {
  int pattern = 0;
  for (int a = 0; a < d - 1; ++a) {
    // target point has coordinate -y_a; negative values need the -l..0 half
    int bit = (y[a] > 0) ? 1 : 0;
    pattern |= bit << (d - 2 - a);
  }
  return pattern + 1;
}

const char* orientation_name(Orientation o) {
  switch (o) {
    case Orientation::North: return "north";
    case Orientation::West: return "west";
    case Orientation::South: return "south";
    case Orientation::East: return "east";
  }
  return "?";
}

Coord rotate_planar(Orientation o, Coord c, int d) {
  int u = d - 2, v = d - 1;
  std::int32_t a = c[u], b = c[v];
  switch (o) {
    case Orientation::North: break;
    case Orientation::West:
      c[u] = -b;
      c[v] = a;
      break;
    case Orientation::South:
      c[u] = -a;
      c[v] = -b;
      break;
    case Orientation::East:
      c[u] = b;
      c[v] = -a;
      break;
  }
  return c;
}

Coord orientation_step(Orientation o, int d) {
  Coord c{};
  c[d - 1] = 1;
  return rotate_planar(o, c, d);
}

Orientation compose(Orientation a, Orientation b) {
  return static_cast<Orientation>((static_cast<int>(a) + static_cast<int>(b)) % 4);
}

Orientation opposite(Orientation o) {
  return compose(o, Orientation::South);
}

Region PlacedBlock::region(bool include_exterior) const {
  Coord llo{}, lhi{};
  for (int a = 0; a < d - 1; ++a) {
    llo[a] = -l;
    lhi[a] = l;
  }
  llo[d - 1] = 0;
  lhi[d - 1] = h;
  Region local = Region::box(d, llo, lhi, RegionKind::Block, include_exterior);
  return place_box(*this, local);
}

Region PlacedBlock::interior() const {
  Region full = region(false);
  Coord lo = full.lo(), hi = full.hi();
  for (int a = 0; a < d; ++a) {
    ++lo[a];
    --hi[a];
  }
  return Region::box(d, lo, hi, RegionKind::Block, false);
}

Bond PlacedBlock::to_global_bond(const Bond& local) const {
  Coord g1 = to_global(local.w);
  Coord g2 = to_global(coord_shift(local.w, local.axis, 1));
  int axis = 0;
  for (int a = 0; a < d; ++a) {
    if (g1[a] != g2[a]) axis = a;
  }
  Coord w{};
  for (int a = 0; a < kMaxDim; ++a) w[a] = std::min(g1[a], g2[a]);
  return Bond{w, axis};
}

Region place_box(const PlacedBlock& pb, const Region& local_box) {
  Coord c1 = pb.to_global(local_box.lo());
  Coord c2 = pb.to_global(local_box.hi());
  Coord lo{}, hi{};
  for (int a = 0; a < kMaxDim; ++a) {
    lo[a] = std::min(c1[a], c2[a]);
    hi[a] = std::max(c1[a], c2[a]);
  }
  int axis = local_box.plaque_axis();
  if (axis >= pb.d - 2) {
    // plane axes may swap under the rotation
    Coord probe{};
    probe[axis] = 1;
    Coord image = rotate_planar(pb.o, probe, pb.d);
    axis = image[pb.d - 2] != 0 ? pb.d - 2 : pb.d - 1;
  }
  return Region::box(local_box.dim(), lo, hi, local_box.kind(),
                     local_box.include_exterior(), axis);
}

}  // namespace rclab
