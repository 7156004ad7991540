#include "rclab/renorm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "json.hpp"

namespace rclab {

void RenormSpec::validate() const {
  if (d < 2 || d > kMaxDim) throw std::invalid_argument("renorm: bad dimension");
  if (K < 1 || l < K || h < 2 * K) {
    throw std::invalid_argument("renorm: need K >= 1, l >= K, h >= 2K");
  }
  if (l > L) throw std::invalid_argument("renorm: l must not exceed L");
  if (H < 3 * L) throw std::invalid_argument("renorm: need H >= 3L");
  if (h > H || 100 * (H - h) > H) {
    throw std::invalid_argument("renorm: h must be within one percent of H");
  }
  if (!(eta > 0.0) || !(eta < 1.0)) {
    throw std::invalid_argument("renorm: eta must lie in (0,1)");
  }
}

namespace {

struct GBox {
  Coord lo{};
  Coord hi{};
};

// Axis-aligned global image of a local box under a placement.
GBox global_box(const PlacedBlock& pb, const Coord& llo, const Coord& lhi) {
  Coord g1 = pb.to_global(llo);
  Coord g2 = pb.to_global(lhi);
  GBox out;
  for (int a = 0; a < kMaxDim; ++a) {
    out.lo[a] = std::min(g1[a], g2[a]);
    out.hi[a] = std::max(g1[a], g2[a]);
  }
  return out;
}

GBox footprint_box(const PlacedBlock& pb) {
  Coord lo{}, hi{};
  for (int a = 0; a + 1 < pb.d; ++a) {
    lo[a] = -pb.l;
    hi[a] = pb.l;
  }
  hi[pb.d - 1] = pb.h;
  return global_box(pb, lo, hi);
}

GBox interior_box(const PlacedBlock& pb) {
  Coord lo{}, hi{};
  for (int a = 0; a + 1 < pb.d; ++a) {
    lo[a] = -pb.l + 1;
    hi[a] = pb.l - 1;
  }
  lo[pb.d - 1] = 1;
  hi[pb.d - 1] = pb.h - 1;
  return global_box(pb, lo, hi);
}

bool boxes_meet(int d, const GBox& x, const GBox& y) {
  for (int a = 0; a < d; ++a) {
    if (x.hi[a] < y.lo[a] || y.hi[a] < x.lo[a]) return false;
  }
  return true;
}

// Faces whose seed plaques an evaluation may read: the top plus every side.
std::vector<GBox> candidate_faces(const PlacedBlock& pb) {
  std::vector<GBox> out;
  int d = pb.d;
  Coord lo{}, hi{};
  for (int a = 0; a + 1 < d; ++a) {
    lo[a] = -pb.l;
    hi[a] = pb.l;
  }
  lo[d - 1] = hi[d - 1] = pb.h;
  out.push_back(global_box(pb, lo, hi));
  for (int fa = 0; fa + 1 < d; ++fa) {
    for (int sign = -1; sign <= 1; sign += 2) {
      Coord flo{}, fhi{};
      for (int a = 0; a + 1 < d; ++a) {
        flo[a] = -pb.l;
        fhi[a] = pb.l;
      }
      flo[fa] = fhi[fa] = sign * pb.l;
      fhi[d - 1] = pb.h;
      out.push_back(global_box(pb, flo, fhi));
    }
  }
  return out;
}

// Two evaluations clash when one could read bonds the other's reach walks,
// i.e. the interiors come within one step of each other or a scanned face
// plane cuts into the other interior. Touching face planes are fine: shared
// plaque reads between increasing events only help.
bool bricks_conflict(const PlacedBlock& A, const PlacedBlock& B) {
  int d = A.d;
  GBox ia = interior_box(A);
  GBox ib = interior_box(B);
  GBox grown = ia;
  for (int a = 0; a < d; ++a) {
    grown.lo[a] -= 1;
    grown.hi[a] += 1;
  }
  if (boxes_meet(d, grown, ib)) return true;
  for (const GBox& f : candidate_faces(A)) {
    if (boxes_meet(d, f, ib)) return true;
  }
  for (const GBox& f : candidate_faces(B)) {
    if (boxes_meet(d, f, ia)) return true;
  }
  return false;
}

// Plane target segment: {axis = level} x [plo, phi] on the other plane axis.
struct Segment {
  int axis = 0;
  int paxis = 0;
  int level = 0;
  int plo = 0;
  int phi = 0;
};

bool hits_segment(const GBox& fp, const Segment& s) {
  if (fp.lo[s.axis] > s.level || fp.hi[s.axis] < s.level) return false;
  return fp.hi[s.paxis] >= s.plo && fp.lo[s.paxis] <= s.phi;
}

int floor_div(int a, int b) {
  int q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

struct Grower {
  const BondOracle& open;
  RenormSpec spec;
  int m;
  int N;
  int px, py;  // plane axes d-2, d-1
  GrowResult res;
  const GrowHooks* hooks;

  Grower(const BondOracle& o, const RenormSpec& sp, int m_in,
         const GrowHooks* hk)
      : open(o), spec(sp), m(m_in), N(sp.N()), px(sp.d - 2), py(sp.d - 1),
        hooks(hk) {
    res.spec = spec;
    res.m = m;
    int side = 2 * m + 1;
    res.squares.resize(static_cast<std::size_t>(side) * side);
    for (int b = -m; b <= m; ++b) {
      for (int a = -m; a <= m; ++a) {
        SquareState& st = *res.at(a, b);
        st.a = a;
        st.b = b;
      }
    }
  }

  // ---- frame helpers ------------------------------------------------------

  // Global image of the local +x axis: plane axis and sign.
  void probe_local_x(Orientation o, int& axis, int& sigma) const {
    Coord e{};
    e[px] = 1;
    Coord g = rotate_planar(o, e, spec.d);
    axis = g[px] != 0 ? px : py;
    sigma = g[axis];
  }

  // 0 when the local +x half points along `dir`, 1 for the -x half.
  int bit_toward_dir(Orientation o, Orientation dir) const {
    Coord e{};
    e[px] = 1;
    Coord g = rotate_planar(o, e, spec.d);
    Coord s = orientation_step(dir, spec.d);
    return g == s ? 0 : 1;
  }

  // Half that moves the pile toward the center line through (cx, cy).
  int bit_center(Orientation o, const Coord& anchor, int cx, int cy) const {
    int axis, sigma;
    probe_local_x(o, axis, sigma);
    int target = axis == px ? cx : cy;
    return sigma * (anchor[axis] - target) > 0 ? 1 : 0;
  }

  // Fine top subfacet: plane half as given, thin halves steered toward the
  // slab axis so anchors keep |thin| <= l-K.
  int top_index(int plane_bit, const Coord& anchor) const {
    int pattern = plane_bit;
    for (int a = 0; a + 2 < spec.d; ++a) {
      if (anchor[a] > 0) pattern |= 1 << (spec.d - 2 - a);
    }
    return pattern + 1;
  }

  // Fine side subfacet on the plane-lateral face of sign s (0: +l, 1: -l).
  int plane_side_index(int s, const Coord& anchor) const {
    int d = spec.d;
    int pattern = 0;
    int bitpos = d - 3;
    for (int b = 0; b + 2 < d; ++b) {
      if (anchor[b] > 0) pattern |= 1 << bitpos;
      --bitpos;
    }
    return ((d - 2) * 2 + s) * (1 << (d - 2)) + pattern + 1;
  }

  Coord pick_top(const Brick& br, int bit) const {
    return bit ? br.top_neg : br.top_pos;
  }

  Coord pick_side(const Brick& br, int s) const {
    return s ? br.side_neg : br.side_pos;
  }

  // ---- square geometry ----------------------------------------------------

  GBox square_rect(int a, int b) const {
    GBox r;
    r.lo[px] = 2 * N * a - N + 1;
    r.hi[px] = 2 * N * a + N;
    r.lo[py] = 2 * N * b - N + 1;
    r.hi[py] = 2 * N * b + N;
    return r;
  }

  Segment target_of(int a, int b, Orientation dir) const {
    int cx = 2 * N * a;
    int cy = 2 * N * b;
    Coord s = orientation_step(dir, spec.d);
    Segment t;
    t.axis = s[px] != 0 ? px : py;
    t.paxis = t.axis == px ? py : px;
    int center = t.axis == px ? cx : cy;
    int sign = s[t.axis];
    t.level = center + sign * (N - 2 * spec.H);
    int pcenter = t.paxis == px ? cx : cy;
    t.plo = pcenter - N / 2;
    t.phi = pcenter + N / 2;
    return t;
  }

  // ---- brick evaluation ---------------------------------------------------

  std::optional<Brick> eval_brick(const PlacedBlock& pb) {
    ++res.bricks_used;
    auto local_open = [this, pb](const Bond& b) {
      return open(pb.to_global_bond(b));
    };
    auto reached = block_reach(local_open, spec.l, spec.h, spec.d,
                               root_plaque_sites(spec.K, spec.d));
    int d = spec.d;
    int ntop = 1 << (d - 1);
    std::vector<std::optional<Coord>> tops(ntop + 1);
    for (int j = 1; j <= ntop; ++j) {
      tops[j] =
          top_seed_connection(local_open, spec.K, spec.l, spec.h, d, j, reached);
      if (!tops[j]) return std::nullopt;
    }
    int nside = 2 * (d - 1) * (1 << (d - 2));
    std::vector<std::optional<Coord>> sides(nside + 1);
    for (int j = 1; j <= nside; ++j) {
      sides[j] = side_seed_connection(local_open, spec.K, spec.l, spec.h, d, j,
                                      reached, nullptr, nullptr);
      if (!sides[j]) return std::nullopt;
    }
    Brick br;
    br.block = pb;
    br.top_pos = pb.to_global(*tops[top_index(0, pb.anchor)]);
    br.top_neg = pb.to_global(*tops[top_index(1, pb.anchor)]);
    br.side_pos = pb.to_global(*sides[plane_side_index(0, pb.anchor)]);
    br.side_neg = pb.to_global(*sides[plane_side_index(1, pb.anchor)]);
    return br;
  }

  // ---- inspection ---------------------------------------------------------

  struct RunCtx {
    SquareState* st = nullptr;
    GBox rect;                 // allowed plane rectangle
    std::vector<int> members;  // witness indices in conflict scope
  };

  bool fail(RunCtx& rc, const char* why) {
    if (rc.st->note.empty()) rc.st->note = why;
    return false;
  }

  // Places, checks and evaluates one brick. Returns the witness index or -1
  // with the square's note set. Bounds are checked before any bond is read.
  int place_brick(RunCtx& rc, const PlacedBlock& pb, int pred) {
    SquareState& st = *rc.st;
    if (static_cast<int>(st.witness.size()) >= 100) {
      fail(rc, "budget");
      return -1;
    }
    GBox fp = footprint_box(pb);
    for (int a = 0; a + 2 < spec.d; ++a) {
      if (fp.lo[a] < -(spec.L + spec.l) || fp.hi[a] > spec.L + spec.l) {
        fail(rc, "bounds");
        return -1;
      }
    }
    if (fp.lo[px] < rc.rect.lo[px] || fp.hi[px] > rc.rect.hi[px] ||
        fp.lo[py] < rc.rect.lo[py] || fp.hi[py] > rc.rect.hi[py]) {
      fail(rc, "bounds");
      return -1;
    }
    for (int w : rc.members) {
      if (w == pred) continue;
      if (bricks_conflict(pb, st.witness[w].block)) {
        fail(rc, "overlap");
        return -1;
      }
    }
    auto br = eval_brick(pb);
    if (!br) {
      fail(rc, "brick");
      return -1;
    }
    int idx = static_cast<int>(st.witness.size());
    st.witness.push_back(*br);
    rc.members.push_back(idx);
    return idx;
  }

  // Grows same-orientation bricks from `from` (attaching at its side face
  // when from_side, at steered tops otherwise) until one footprint meets the
  // target segment. Returns the gate index or -1.
  int tail(RunCtx& rc, int from, Orientation to, bool from_side,
           const Segment& seg, int cx, int cy) {
    SquareState& st = *rc.st;
    int cur = from;
    if (from_side) {
      int s = bit_toward_dir(st.witness[from].block.o, to);
      Coord a0 = pick_side(st.witness[from], s);
      cur = place_brick(rc, PlacedBlock{spec.d, spec.l, spec.h, to, a0}, from);
      if (cur < 0) return -1;
      if (hits_segment(footprint_box(st.witness[cur].block), seg)) return cur;
    }
    while (true) {
      int bit = bit_center(to, st.witness[cur].block.anchor, cx, cy);
      Coord a2 = pick_top(st.witness[cur], bit);
      int nxt = place_brick(rc, PlacedBlock{spec.d, spec.l, spec.h, to, a2}, cur);
      if (nxt < 0) return -1;
      cur = nxt;
      if (hits_segment(footprint_box(st.witness[cur].block), seg)) return cur;
    }
  }

  // The root square is probed by four independent piles out of the origin.
  // Each run needs its own oriented origin plaque open so that the four
  // piles share one open cluster.
  void inspect_root() {
    SquareState& st = *res.at(0, 0);
    st.order = 0;
    st.z = 0;
    for (Orientation D :
         {Orientation::North, Orientation::West, Orientation::South,
          Orientation::East}) {
      RunCtx rc;
      rc.st = &st;
      rc.rect = square_rect(0, 0);
      PlacedBlock first{spec.d, spec.l, spec.h, D, Coord{}};
      auto local_open = [this, first](const Bond& b) {
        return open(first.to_global_bond(b));
      };
      if (!plaque_open(local_open, Coord{}, spec.d - 1, spec.K, spec.d)) {
        fail(rc, "seed");
        return;
      }
      Segment seg = target_of(0, 0, D);
      int cur = place_brick(rc, first, -1);
      if (cur < 0) return;
      while (!hits_segment(footprint_box(st.witness[cur].block), seg)) {
        int bit = bit_center(D, st.witness[cur].block.anchor, 0, 0);
        Coord a2 = pick_top(st.witness[cur], bit);
        int nxt =
            place_brick(rc, PlacedBlock{spec.d, spec.l, spec.h, D, a2}, cur);
        if (nxt < 0) return;
        cur = nxt;
      }
      st.gate[static_cast<int>(D)] = cur;
    }
    st.z = 1;
  }

  Orientation side_toward(int perp, int want_sign) const {
    for (Orientation c : {Orientation::North, Orientation::West,
                          Orientation::South, Orientation::East}) {
      Coord s = orientation_step(c, spec.d);
      if (s[perp] == want_sign) return c;
    }
    throw std::logic_error("no orientation along axis");
  }

  void inspect(int Sa, int Sb, int order) {
    SquareState& st = *res.at(Sa, Sb);
    st.order = order;
    st.z = 0;
    const SquareState* P = nullptr;
    int gn = 0;
    static const int dva[4] = {0, 0, 1, -1};
    static const int dvb[4] = {1, -1, 0, 0};
    for (int k = 0; k < 4; ++k) {
      const SquareState* nb = res.at(Sa + dva[k], Sb + dvb[k]);
      if (nb != nullptr && nb->z == 1) {
        ++gn;
        if (P == nullptr || nb->order < P->order) P = nb;
      }
    }
    st.good_neighbors = gn;
    if (P == nullptr) {
      st.note = "no good neighbour";
      return;
    }
    // approach direction: from P into S
    Orientation o = Orientation::North;
    {
      int da = Sa - P->a, db = Sb - P->b;
      for (Orientation c : {Orientation::North, Orientation::West,
                            Orientation::South, Orientation::East}) {
        Coord s = orientation_step(c, spec.d);
        if (s[px] == da && s[py] == db) o = c;
      }
    }
    RunCtx rc;
    rc.st = &st;
    GBox rp = square_rect(P->a, P->b);
    GBox rs = square_rect(Sa, Sb);
    rc.rect.lo[px] = std::min(rp.lo[px], rs.lo[px]);
    rc.rect.hi[px] = std::max(rp.hi[px], rs.hi[px]);
    rc.rect.lo[py] = std::min(rp.lo[py], rs.lo[py]);
    rc.rect.hi[py] = std::max(rp.hi[py], rs.hi[py]);

    int cx = 2 * N * Sa;
    int cy = 2 * N * Sb;
    Coord stp = orientation_step(o, spec.d);
    int fa = stp[px] != 0 ? px : py;  // approach axis
    int fsig = stp[fa];
    int perp = fa == px ? py : px;
    int trig = (fa == px ? cx : cy) - fsig * (N / 2);

    // centering: pile from the predecessor's gate toward the trigger level
    std::vector<int> trunk;
    int gate_idx = P->gate[static_cast<int>(o)];
    const Brick* cur_br = &P->witness[gate_idx];
    int cur = -1;
    while (true) {
      int bit = bit_center(o, cur_br->block.anchor, cx, cy);
      Coord a2 = pick_top(*cur_br, bit);
      int nxt = place_brick(rc, PlacedBlock{spec.d, spec.l, spec.h, o, a2}, cur);
      if (nxt < 0) return;
      trunk.push_back(nxt);
      cur = nxt;
      cur_br = &st.witness[cur];
      GBox fp = footprint_box(cur_br->block);
      if (fp.lo[fa] <= trig && trig <= fp.hi[fa]) break;
    }

    // bifurcation above the trigger brick
    int bit0 = bit_center(o, st.witness[cur].block.anchor, cx, cy);
    Coord z1 = pick_top(st.witness[cur], bit0);
    int want = z1[perp] - (perp == px ? cx : cy) < 0 ? -1 : 1;
    Orientation s1 = side_toward(perp, want);
    Orientation s2 = opposite(s1);

    int b1 = place_brick(rc, PlacedBlock{spec.d, spec.l, spec.h, o, z1}, cur);
    if (b1 < 0) return;
    int b2 = place_brick(
        rc,
        PlacedBlock{spec.d, spec.l, spec.h, o,
                    pick_top(st.witness[b1], bit_toward_dir(o, s1))},
        b1);
    if (b2 < 0) return;
    int b3 = place_brick(
        rc,
        PlacedBlock{spec.d, spec.l, spec.h, o,
                    pick_top(st.witness[b2], bit_toward_dir(o, s2))},
        b2);
    if (b3 < 0) return;
    int b4 = place_brick(
        rc,
        PlacedBlock{spec.d, spec.l, spec.h, s2,
                    pick_side(st.witness[b3], bit_toward_dir(o, s2))},
        b3);
    if (b4 < 0) return;
    int b5 = place_brick(
        rc,
        PlacedBlock{spec.d, spec.l, spec.h, s2,
                    pick_top(st.witness[b4], bit_toward_dir(s2, o))},
        b4);
    if (b5 < 0) return;
    int b6 = place_brick(
        rc,
        PlacedBlock{spec.d, spec.l, spec.h, s2,
                    pick_top(st.witness[b5], bit_toward_dir(s2, o))},
        b5);
    if (b6 < 0) return;
    int b7 = place_brick(
        rc,
        PlacedBlock{spec.d, spec.l, spec.h, s2,
                    pick_top(st.witness[b6], bit_toward_dir(s2, opposite(o)))},
        b6);
    if (b7 < 0) return;

    // three fresh gates, then the back gate out of the trunk
    int g1 = tail(rc, b2, s1, true, target_of(Sa, Sb, s1), cx, cy);
    if (g1 < 0) return;
    int g2 = tail(rc, b6, o, true, target_of(Sa, Sb, o), cx, cy);
    if (g2 < 0) return;
    int g3 = tail(rc, b7, s2, false, target_of(Sa, Sb, s2), cx, cy);
    if (g3 < 0) return;
    st.gate[static_cast<int>(s1)] = g1;
    st.gate[static_cast<int>(o)] = g2;
    st.gate[static_cast<int>(s2)] = g3;
    Segment back = target_of(Sa, Sb, opposite(o));
    for (int t : trunk) {
      if (hits_segment(footprint_box(st.witness[t].block), back)) {
        st.gate[static_cast<int>(opposite(o))] = t;
        break;
      }
    }
    if (st.gate[static_cast<int>(opposite(o))] < 0) {
      st.note = "gate";
      return;
    }
    st.z = 1;
  }

  void run() {
    inspect_root();
    if (hooks != nullptr && hooks->on_square) {
      hooks->on_square(res, *res.at(0, 0));
    }
    // fixed inspection order: ring, then b, then a
    std::vector<std::pair<int, int>> order;
    for (int b = -m; b <= m; ++b) {
      for (int a = -m; a <= m; ++a) order.emplace_back(a, b);
    }
    std::sort(order.begin(), order.end(), [](auto u, auto v) {
      int ru = std::max(std::abs(u.first), std::abs(u.second));
      int rv = std::max(std::abs(v.first), std::abs(v.second));
      if (ru != rv) return ru < rv;
      if (u.second != v.second) return u.second < v.second;
      return u.first < v.first;
    });
    int seq = 1;
    while (true) {
      SquareState* next = nullptr;
      for (auto [a, b] : order) {
        SquareState* st = res.at(a, b);
        if (st->z != -1) continue;
        bool good_nb = false;
        static const int dva[4] = {0, 0, 1, -1};
        static const int dvb[4] = {1, -1, 0, 0};
        for (int k = 0; k < 4 && !good_nb; ++k) {
          const SquareState* nb = res.at(a + dva[k], b + dvb[k]);
          good_nb = nb != nullptr && nb->z == 1;
        }
        if (good_nb) {
          next = st;
          break;
        }
      }
      if (next == nullptr) break;
      inspect(next->a, next->b, seq++);
      if (hooks != nullptr && hooks->on_square) hooks->on_square(res, *next);
    }
  }
};

}  // namespace

void brick_footprint(const PlacedBlock& pb, Coord& lo, Coord& hi) {
  GBox fp = footprint_box(pb);
  lo = fp.lo;
  hi = fp.hi;
}

const SquareState* GrowResult::at(int a, int b) const {
  if (std::abs(a) > m || std::abs(b) > m) return nullptr;
  int side = 2 * m + 1;
  return &squares[static_cast<std::size_t>(b + m) * side + (a + m)];
}

SquareState* GrowResult::at(int a, int b) {
  return const_cast<SquareState*>(
      static_cast<const GrowResult*>(this)->at(a, b));
}

GrowResult grow_cluster(const BondOracle& open, const RenormSpec& spec, int m,
                        const GrowHooks* hooks) {
  spec.validate();
  if (m < 0) throw std::invalid_argument("grow_cluster: m must be >= 0");
  Grower g(open, spec, m, hooks);
  g.run();
  return std::move(g.res);
}

// Interval hull of the bifurcation above `start`, over every admissible seed
// choice. The last three steps are the tail start bricks; their supports are
// what the layout keeps apart.
std::vector<BranchStep> brick_layout_branch(const RenormSpec& spec,
                                            const PlacedBlock& start,
                                            Orientation side) {
  spec.validate();
  if (start.l != spec.l || start.h != spec.h || start.d != spec.d) {
    throw std::invalid_argument("brick_layout_branch: start does not match spec");
  }
  int d = spec.d, l = spec.l, h = spec.h, K = spec.K;
  int px = d - 2;
  Orientation o = start.o;
  Orientation s1 = side;
  Orientation s2 = opposite(side);
  {
    Coord fwd = orientation_step(o, d);
    Coord sd = orientation_step(side, d);
    bool perp = true;
    for (int a = 0; a < d; ++a) {
      if (fwd[a] != 0 && sd[a] != 0) perp = false;
    }
    if (!perp) {
      throw std::invalid_argument("brick_layout_branch: side not perpendicular");
    }
  }

  struct IBox {
    Coord lo{}, hi{};
  };
  auto rot_box = [&](Orientation ro, const Coord& llo, const Coord& lhi) {
    PlacedBlock t{d, l, h, ro, Coord{}};
    Coord g1 = t.to_global(llo);
    Coord g2 = t.to_global(lhi);
    IBox r;
    for (int a = 0; a < kMaxDim; ++a) {
      r.lo[a] = std::min(g1[a], g2[a]);
      r.hi[a] = std::max(g1[a], g2[a]);
    }
    return r;
  };
  auto ibox_add = [&](const IBox& x, const IBox& y) {
    IBox r;
    for (int a = 0; a < kMaxDim; ++a) {
      r.lo[a] = x.lo[a] + y.lo[a];
      r.hi[a] = x.hi[a] + y.hi[a];
    }
    return r;
  };
  auto bit_toward = [&](Orientation fo, Orientation dir) {
    Coord e{};
    e[px] = 1;
    return rotate_planar(fo, e, d) == orientation_step(dir, d) ? 0 : 1;
  };
  // bit 2: hull over both plane halves (centering picks either at runtime)
  auto top_offset = [&](Orientation fo, int bit) {
    Coord llo{}, lhi{};
    for (int a = 0; a + 2 < d; ++a) {
      llo[a] = -(l - K);
      lhi[a] = l - K;
    }
    llo[px] = bit == 0 ? 0 : -(l - K);
    lhi[px] = bit == 1 ? 0 : l - K;
    llo[d - 1] = lhi[d - 1] = h;
    return rot_box(fo, llo, lhi);
  };
  auto side_offset = [&](Orientation fo, int s) {
    Coord llo{}, lhi{};
    for (int a = 0; a + 2 < d; ++a) {
      llo[a] = -(l - K);
      lhi[a] = l - K;
    }
    llo[px] = lhi[px] = s ? -l : l;
    llo[d - 1] = K;
    lhi[d - 1] = h - K;
    return rot_box(fo, llo, lhi);
  };
  auto block_span = [&](Orientation ro) {
    Coord llo{}, lhi{};
    for (int a = 0; a + 1 < d; ++a) {
      llo[a] = -l;
      lhi[a] = l;
    }
    lhi[d - 1] = h;
    return rot_box(ro, llo, lhi);
  };

  std::vector<BranchStep> steps;
  auto add = [&](const char* role, Orientation bo, int from, int branch,
                 const IBox& anchor) {
    BranchStep st;
    st.role = role;
    st.orient = bo;
    st.from = from;
    st.branch = branch;
    st.anchor_lo = anchor.lo;
    st.anchor_hi = anchor.hi;
    IBox sup = ibox_add(anchor, block_span(bo));
    st.support_lo = sup.lo;
    st.support_hi = sup.hi;
    steps.push_back(st);
    return static_cast<int>(steps.size()) - 1;
  };
  auto anchor_of = [&](int idx) {
    IBox a;
    a.lo = steps[idx].anchor_lo;
    a.hi = steps[idx].anchor_hi;
    return a;
  };

  IBox a0{start.anchor, start.anchor};
  int b1 = add("b1", o, -1, 0, ibox_add(a0, top_offset(o, 2)));
  int b2 = add("b2", o, b1, 0,
               ibox_add(anchor_of(b1), top_offset(o, bit_toward(o, s1))));
  int b3 = add("b3", o, b2, 0,
               ibox_add(anchor_of(b2), top_offset(o, bit_toward(o, s2))));
  int b4 = add("b4", s2, b3, 0,
               ibox_add(anchor_of(b3), side_offset(o, bit_toward(o, s2))));
  int b5 = add("b5", s2, b4, 0,
               ibox_add(anchor_of(b4), top_offset(s2, bit_toward(s2, o))));
  int b6 = add("b6", s2, b5, 0,
               ibox_add(anchor_of(b5), top_offset(s2, bit_toward(s2, o))));
  int b7 =
      add("b7", s2, b6, 0,
          ibox_add(anchor_of(b6), top_offset(s2, bit_toward(s2, opposite(o)))));
  add("tail-side1", s1, b2, 1,
      ibox_add(anchor_of(b2), side_offset(o, bit_toward(o, s1))));
  add("tail-forward", o, b6, 2,
      ibox_add(anchor_of(b6), side_offset(s2, bit_toward(s2, o))));
  add("tail-side2", s2, b7, 3, ibox_add(anchor_of(b7), top_offset(s2, 2)));
  return steps;
}

AlphaReport estimate_alpha(const std::vector<GrowResult>& runs,
                           double eta_hat) {
  AlphaReport rep;
  rep.alpha_eta = std::pow(1.0 - eta_hat, 100);
  std::array<std::pair<std::int64_t, std::int64_t>, 5> acc{};  // trials, succ
  for (const GrowResult& run : runs) {
    for (const SquareState& st : run.squares) {
      if (st.order < 1 || st.z < 0) continue;
      int g = std::clamp(st.good_neighbors, 0, 4);
      ++acc[g].first;
      if (st.z == 1) ++acc[g].second;
      ++rep.inspections;
    }
  }
  const AlphaStratum* worst = nullptr;
  for (int g = 0; g <= 4; ++g) {
    if (acc[g].first == 0) continue;
    AlphaStratum s;
    s.good_neighbors = g;
    s.trials = acc[g].first;
    s.successes = acc[g].second;
    WilsonInterval w = wilson_interval(s.successes, s.trials);
    s.point = w.point;
    s.lo = w.lo;
    s.hi = w.hi;
    rep.strata.push_back(s);
  }
  for (const AlphaStratum& s : rep.strata) {
    if (worst == nullptr || s.point < worst->point) worst = &s;
  }
  if (worst != nullptr) {
    rep.alpha_hat = worst->point;
    rep.lo = worst->lo;
    rep.hi = worst->hi;
  }
  rep.sufficient = rep.inspections >= 1000;
  return rep;
}

bool verify_renormalized_path(const BondOracle& open, const GrowResult& run) {
  const RenormSpec& spec = run.spec;
  int d = spec.d;
  int N = spec.N();
  int px = d - 2, py = d - 1;
  std::vector<const SquareState*> good;
  for (const SquareState& st : run.squares) {
    if (st.z == 1) good.push_back(&st);
  }
  if (good.empty()) return true;
  const SquareState* root = run.at(0, 0);
  if (root == nullptr || root->z != 1) return false;

  auto cell_of = [&](int coord) { return floor_div(coord + N - 1, 2 * N); };
  auto cell_key = [](int a, int b) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
  };
  std::unordered_map<std::uint64_t, std::vector<GBox>> boxes;
  for (const SquareState* st : good) {
    for (const Brick& br : st->witness) {
      GBox fp = footprint_box(br.block);
      int alo = cell_of(fp.lo[px]), ahi = cell_of(fp.hi[px]);
      int blo = cell_of(fp.lo[py]), bhi = cell_of(fp.hi[py]);
      for (int a = alo; a <= ahi; ++a) {
        for (int b = blo; b <= bhi; ++b) {
          boxes[cell_key(a, b)].push_back(fp);
        }
      }
    }
  }
  auto in_box = [&](const GBox& g, const Coord& c) {
    for (int a = 0; a < d; ++a) {
      if (c[a] < g.lo[a] || c[a] > g.hi[a]) return false;
    }
    return true;
  };
  auto bond_allowed = [&](const Coord& u, const Coord& v) {
    auto it = boxes.find(cell_key(cell_of(u[px]), cell_of(u[py])));
    if (it != boxes.end()) {
      for (const GBox& g : it->second) {
        if (in_box(g, u) && in_box(g, v)) return true;
      }
    }
    std::uint64_t k2 = cell_key(cell_of(v[px]), cell_of(v[py]));
    if (k2 != cell_key(cell_of(u[px]), cell_of(u[py]))) {
      auto it2 = boxes.find(k2);
      if (it2 != boxes.end()) {
        for (const GBox& g : it2->second) {
          if (in_box(g, u) && in_box(g, v)) return true;
        }
      }
    }
    return false;
  };

  std::unordered_set<std::uint64_t> seen;
  std::unordered_set<std::uint64_t> touched;
  std::vector<Coord> stack;
  Coord origin{};
  stack.push_back(origin);
  seen.insert(site_key(origin));
  while (!stack.empty()) {
    Coord c = stack.back();
    stack.pop_back();
    touched.insert(cell_key(cell_of(c[px]), cell_of(c[py])));
    for (int a = 0; a < d; ++a) {
      for (int sgn = -1; sgn <= 1; sgn += 2) {
        Coord n = coord_shift(c, a, sgn);
        if (seen.count(site_key(n)) != 0) continue;
        if (!bond_allowed(c, n)) continue;
        Bond b;
        b.w = sgn > 0 ? c : n;
        b.axis = a;
        if (!open(b)) continue;
        seen.insert(site_key(n));
        stack.push_back(n);
      }
    }
  }
  for (const SquareState* st : good) {
    if (touched.count(cell_key(st->a, st->b)) == 0) return false;
  }
  return true;
}

CalibrationResult calibrate_block(const RcParams& params,
                                  const BoundaryCondition& bc, int d, int L,
                                  int H, double eta, const SamplerCfg& scfg) {
  params.validate();
  scfg.validate();
  if (d < 2 || d > kMaxDim) throw std::invalid_argument("calibrate: bad dimension");
  if (L < 1 || H < 3 * L) throw std::invalid_argument("calibrate: need H >= 3L >= 3");
  if (!(eta > 0.0) || !(eta < 1.0)) {
    throw std::invalid_argument("calibrate: eta must lie in (0,1)");
  }
  // Seeds want the top plane's in-plane bonds, so sampling happens on the
  // closed box B(L,H) rather than on interior bonds only.
  Region region = build_block(L, H, d, false);
  CalibrationResult best;
  bool have_best = false;
  int hmin = H - H / 100;
  for (int K = 2; K <= 4; ++K) {
    if (K > L) break;
    for (int h = H; h >= hmin && h >= 2 * K; --h) {
      for (int l = K; l <= L; ++l) {
        EvOccupied ev;
        ev.K = K;
        ev.l = l;
        ev.h = h;
        Estimate est = estimate_event(region, params, bc, EventSpec{ev}, scfg);
        RenormSpec sp;
        sp.d = d;
        sp.K = K;
        sp.l = l;
        sp.h = h;
        sp.L = L;
        sp.H = H;
        sp.eta = eta;
        if (!have_best || est.lo() > best.occupied.lo()) {
          best.spec = sp;
          best.occupied = est;
          have_best = true;
        }
        if (est.lo() >= 1.0 - eta) {
          best.spec = sp;
          best.occupied = est;
          best.ok = true;
          return best;
        }
      }
    }
  }
  best.ok = false;
  return best;
}

std::string witness_json(const GrowResult& run) {
  using nlohmann::ordered_json;
  const RenormSpec& sp = run.spec;
  auto coords = [&](const Coord& c) {
    std::vector<int> v(c.begin(), c.begin() + sp.d);
    return v;
  };
  ordered_json j;
  j["spec"] = {{"d", sp.d}, {"K", sp.K}, {"l", sp.l},     {"h", sp.h},
               {"L", sp.L}, {"H", sp.H}, {"eta", sp.eta}, {"N", sp.N()}};
  j["m"] = run.m;
  j["M"] = 2 * run.m * sp.N();
  j["bricks_used"] = run.bricks_used;
  ordered_json sq = ordered_json::array();
  for (const SquareState& st : run.squares) {
    if (st.z < 0) continue;
    ordered_json e;
    e["a"] = st.a;
    e["b"] = st.b;
    e["z"] = st.z;
    e["order"] = st.order;
    e["good_neighbors"] = st.good_neighbors;
    if (!st.note.empty()) e["note"] = st.note;
    e["gate"] = st.gate;
    ordered_json bricks = ordered_json::array();
    for (const Brick& br : st.witness) {
      ordered_json b;
      b["o"] = orientation_name(br.block.o);
      b["anchor"] = coords(br.block.anchor);
      b["top_pos"] = coords(br.top_pos);
      b["top_neg"] = coords(br.top_neg);
      b["side_pos"] = coords(br.side_pos);
      b["side_neg"] = coords(br.side_neg);
      bricks.push_back(std::move(b));
    }
    e["bricks"] = std::move(bricks);
    sq.push_back(std::move(e));
  }
  j["squares"] = std::move(sq);
  return j.dump(2);
}

std::string witness_svg(const GrowResult& run) {
  const RenormSpec& sp = run.spec;
  int N = sp.N();
  int px = sp.d - 2, py = sp.d - 1;
  int lo = -2 * N * run.m - N + 1;
  int hi = 2 * N * run.m + N;
  int w = hi - lo + 1;
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << w << " "
    << w << "\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << w
    << "\" fill=\"#ffffff\"/>\n";
  auto mapx = [&](int x) { return x - lo; };
  auto mapy = [&](int y) { return hi - y; };
  for (const SquareState& st : run.squares) {
    int xlo = 2 * N * st.a - N + 1;
    int ylo = 2 * N * st.b - N + 1;
    const char* fill = st.z == 1 ? "#9ed29e" : st.z == 0 ? "#e8a0a0" : "#eeeeee";
    s << "<rect x=\"" << mapx(xlo) << "\" y=\"" << mapy(ylo + 2 * N - 1)
      << "\" width=\"" << 2 * N << "\" height=\"" << 2 * N << "\" fill=\""
      << fill << "\" stroke=\"#888888\" stroke-width=\"" << std::max(1, N / 60)
      << "\"/>\n";
  }
  for (const SquareState& st : run.squares) {
    for (std::size_t i = 0; i < st.witness.size(); ++i) {
      GBox fp = footprint_box(st.witness[i].block);
      bool gate = false;
      for (int g : st.gate) gate = gate || (g == static_cast<int>(i));
      s << "<rect x=\"" << mapx(fp.lo[px]) << "\" y=\"" << mapy(fp.hi[py])
        << "\" width=\"" << fp.hi[px] - fp.lo[px] + 1 << "\" height=\""
        << fp.hi[py] - fp.lo[py] + 1 << "\" fill=\"#4a7fb5\" fill-opacity=\""
        << (gate ? "0.9" : "0.45") << "\"/>\n";
    }
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace rclab
