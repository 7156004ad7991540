#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace rclab {

inline constexpr int kMaxDim = 4;

// Lattice site. Axes beyond the region dimension are kept at zero.
using Coord = std::array<std::int32_t, kMaxDim>;

inline Coord coord3(std::int32_t x, std::int32_t y, std::int32_t z) {
  return Coord{x, y, z, 0};
}
inline Coord coord2(std::int32_t x, std::int32_t y) {
  return Coord{x, y, 0, 0};
}
inline Coord coord_add(Coord a, const Coord& b) {
  for (int i = 0; i < kMaxDim; ++i) a[i] += b[i];
  return a;
}
inline Coord coord_shift(Coord a, int axis, std::int32_t d) {
  a[axis] += d;
  return a;
}

// Nearest-neighbor bond {w, w + e_axis}, identified by its lower endpoint.
struct Bond {
  Coord w{};
  int axis = 0;

  friend bool operator==(const Bond&, const Bond&) = default;
};

// Region-independent 64-bit key of a bond; used to key product-measure RNG
// draws so that overlapping windows see one consistent configuration.
// Coordinates must stay within +/-2^14.
inline std::uint64_t bond_key(const Bond& b) {
  std::uint64_t k = static_cast<std::uint64_t>(b.axis);
  for (int i = 0; i < kMaxDim; ++i) {
    k = (k << 15) | (static_cast<std::uint64_t>(b.w[i] + 16384) & 0x7FFFULL);
  }
  return k;
}

// Region-independent site key with the same coordinate budget as bond_key.
inline std::uint64_t site_key(const Coord& c) {
  std::uint64_t k = 0;
  for (int i = 0; i < kMaxDim; ++i) {
    k = (k << 16) | (static_cast<std::uint64_t>(c[i] + 16384) & 0xFFFFULL);
  }
  return k;
}

enum class RegionKind { Box, Slab, Block, Rectangle, SeedPlaque, Custom };

// Finite vertex set with its bond set E: every nearest-neighbor bond having
// at least one endpoint in the vertex set (boundary bonds to the exterior
// are dropped when include_exterior is false). Box-backed regions never
// materialize their bond list; ids are arithmetic in O(1) both ways.
class Region {
 public:
  Region() = default;

  int dim() const { return dim_; }
  RegionKind kind() const { return kind_; }
  const Coord& lo() const { return lo_; }
  const Coord& hi() const { return hi_; }
  bool include_exterior() const { return include_exterior_; }
  int plaque_axis() const { return plaque_axis_; }

  std::int64_t n_vertices() const { return n_vertices_; }
  std::int64_t n_bonds() const { return n_bonds_; }

  bool contains(const Coord& c) const;
  std::int64_t vertex_index(const Coord& c) const;  // -1 if outside
  Coord vertex_at(std::int64_t idx) const;

  Bond bond_at(std::int64_t bid) const;
  std::int64_t bond_index(const Bond& b) const;  // -1 if not in E

  // Both endpoints of the bond, in order (w, w+e_axis).
  static std::pair<Coord, Coord> bond_sites(const Bond& b) {
    return {b.w, coord_shift(b.w, b.axis, 1)};
  }

  void for_each_bond(const std::function<void(std::int64_t, const Bond&)>& f) const;

  // Open-interior region: every vertex keeping all its 2d neighbors inside.
  Region interior() const;

  // Smallest enclosing box test helpers.
  bool box_backed() const { return kind_ != RegionKind::Custom; }

  static Region box(int dim, Coord lo, Coord hi, RegionKind kind,
                    bool include_exterior, int plaque_axis = -1);
  static Region custom(int dim, std::vector<Coord> vertices,
                       bool include_exterior);

 private:
  struct CustomData {
    std::vector<Coord> vertices;  // sorted
    std::vector<Bond> bonds;
    std::unordered_map<std::uint64_t, std::int64_t> vertex_lookup;
    std::unordered_map<std::uint64_t, std::int64_t> bond_lookup;
  };

  void init_box();
  void init_custom(std::vector<Coord> vertices);

  int dim_ = 0;
  RegionKind kind_ = RegionKind::Box;
  Coord lo_{};
  Coord hi_{};
  bool include_exterior_ = true;
  int plaque_axis_ = -1;
  std::int64_t n_vertices_ = 0;
  std::int64_t n_bonds_ = 0;
  // Per-axis bond grids: bonds along axis a are indexed row-major over a box
  // equal to [lo,hi] except that the a-range is extended by one below when
  // exterior bonds are included, or shrunk by one above when they are not.
  std::array<Coord, kMaxDim> bond_lo_{};
  std::array<Coord, kMaxDim> bond_hi_{};
  std::array<std::int64_t, kMaxDim> bond_offset_{};
  std::shared_ptr<const CustomData> custom_;
};

// Builders for the named geometries.
Region build_box(int N, int d, bool include_exterior = true);
Region build_block(int l, int h, int d, bool include_exterior = true);
Region build_slab(int L, int N, int d, bool include_exterior = true);
Region build_rectangle(int N, double delta, int L, int d,
                       bool include_exterior = true);
Region seed_plaque(const Coord& center, int axis, int K, int d);

// Faces of the block B(l,h). The top face sits at height h, sides at
// lateral coordinate +/-l. Subfacet regions overlap on coordinate
// hyperplanes; they cover the face without partitioning it.
Region block_top_face(int l, int h, int d);
std::vector<Region> top_subfacets(int l, int h, int d);    // size 2^(d-1)
std::vector<Region> side_subfacets(int l, int h, int d);   // 2(d-1)2^(d-2)

// Index (1-based) of the top subfacet T_j containing (-y_1,...,-y_{d-1},h);
// ties on zero coordinates resolve to the smallest index.
int steering_choice(const Coord& y, int d);

// Planar orientations: rotations in the (d-2, d-1) coordinate plane.
enum class Orientation { North, West, South, East };

const char* orientation_name(Orientation o);
Coord rotate_planar(Orientation o, Coord c, int d);
// Forward unit vector of the orientation in the plane.
Coord orientation_step(Orientation o, int d);
Orientation compose(Orientation a, Orientation b);  // rotation a applied to b
Orientation opposite(Orientation o);

// Block placed by rotation + translation: sites are
// anchor + rotate(local), local in B(l,h).
struct PlacedBlock {
  int d = 3;
  int l = 0;
  int h = 0;
  Orientation o = Orientation::North;
  Coord anchor{};

  Coord to_global(const Coord& local) const {
    return coord_add(anchor, rotate_planar(o, local, d));
  }
  // Image of a local bond; the rotated axis direction may flip sign, so the
  // global bond is re-anchored at the lower endpoint.
  Bond to_global_bond(const Bond& local) const;
  Region region(bool include_exterior = false) const;
  Region interior() const;
};

// Axis-aligned image of a local box under a placement.
Region place_box(const PlacedBlock& pb, const Region& local_box);

}  // namespace rclab
