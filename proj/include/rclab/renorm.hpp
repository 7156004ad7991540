#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rclab/observables.hpp"

namespace rclab {

// Two-level scheme: blocks B(l,h) with seed size K are piled into bricks
// inside a slab of half-width L+l, and the plane is tiled by squares of side
// 2N with N = 10(L+H). A square is good when a pile of at most 100 occupied
// bricks connects the entry gate of a previously good neighbour to fresh
// gates on the remaining targets of the square.
struct RenormSpec {
  int d = 3;
  int K = 1;
  int l = 1;   // block half-width
  int h = 3;   // block height
  int L = 1;   // slab scale; l <= L
  int H = 3;   // height scale; H >= 3L and h within one percent of H
  double eta = 0.1;

  int N() const { return 10 * (L + H); }
  void validate() const;
};

struct CalibrationResult {
  RenormSpec spec;
  Estimate occupied;
  bool ok = false;
};

// Scans K in {2,3,4}, h downward from H, l upward from K, and keeps the
// first (K,l,h) whose occupied-block estimate clears 1-eta from below on
// B(L,H). When nothing clears, ok is false and spec/occupied carry the
// best lower bound found.
CalibrationResult calibrate_block(const RcParams& params,
                                  const BoundaryCondition& bc, int d, int L,
                                  int H, double eta, const SamplerCfg& scfg);

// One placed, fully evaluated block. Connection sites are global seed
// centers on the two plane-facing top subfacets and the two plane-facing
// side faces, with thin coordinates steered toward the slab axis. They
// exist whenever the block is occupied.
struct Brick {
  PlacedBlock block;
  Coord top_pos{};   // top seed, local +x half
  Coord top_neg{};   // top seed, local -x half
  Coord side_pos{};  // side seed on the local +x face
  Coord side_neg{};  // side seed on the local -x face
};

// Global footprint box of a placed block.
void brick_footprint(const PlacedBlock& pb, Coord& lo, Coord& hi);

// One step of the bifurcation template: where the next brick may anchor
// (interval hull over all seed choices) and the space its evaluation can
// read. branch 0 is the trunk, 1/2/3 the side1, forward and side2 tails.
struct BranchStep {
  const char* role = "";
  Orientation orient = Orientation::North;
  int from = -1;  // index of the predecessor step, -1 for the start brick
  int branch = 0;
  Coord anchor_lo{}, anchor_hi{};
  Coord support_lo{}, support_hi{};
};

// Static layout of the bifurcation bricks placed above `start` when the
// first side branch leaves toward `side` (a perpendicular orientation).
// Steps end with the three tail start bricks; their supports must be
// pairwise disjoint, which the tests check exhaustively for small l,h.
std::vector<BranchStep> brick_layout_branch(const RenormSpec& spec,
                                            const PlacedBlock& start,
                                            Orientation side);

struct SquareState {
  int a = 0, b = 0;
  int z = -1;              // -1 unexamined, 0 bad, 1 good
  int order = -1;          // inspection sequence number, 0 for the root
  int good_neighbors = 0;  // good face neighbours at inspection time
  std::array<int, 4> gate{-1, -1, -1, -1};  // witness index per orientation
  std::vector<Brick> witness;
  std::string note;  // failure reason, empty while good or unexamined
};

struct GrowResult {
  RenormSpec spec;
  int m = 0;  // squares S_(a,b) with |a|,|b| <= m; domain radius M = 2mN
  std::vector<SquareState> squares;  // (a,b) row-major, a fastest
  std::int64_t bricks_used = 0;

  const SquareState* at(int a, int b) const;
  SquareState* at(int a, int b);
};

struct GrowHooks {
  // Called after every finished inspection, root square included.
  std::function<void(const GrowResult&, const SquareState&)> on_square;
};

// Runs the inspection process on a fixed configuration: the root square is
// probed in all four directions from the origin, then the earliest
// unexamined square with a good neighbour is inspected until none is left.
// Bad squares are data, not errors.
GrowResult grow_cluster(const BondOracle& open, const RenormSpec& spec, int m,
                        const GrowHooks* hooks = nullptr);

struct AlphaStratum {
  int good_neighbors = 0;
  std::int64_t trials = 0;
  std::int64_t successes = 0;
  double point = 0, lo = 0, hi = 1;
};

struct AlphaReport {
  double alpha_hat = 0;  // worst stratum point estimate
  double lo = 0, hi = 1;
  std::vector<AlphaStratum> strata;
  std::int64_t inspections = 0;
  bool sufficient = false;  // >= 1000 pooled non-root inspections
  double alpha_eta = 0;     // (1 - eta)^100 benchmark
};

// Pools the non-root inspections of several runs, stratified by the number
// of good neighbours at inspection time. The root square mixes four
// directional probes and is excluded.
AlphaReport estimate_alpha(const std::vector<GrowResult>& runs,
                           double eta_hat);

// Replays the witness against the configuration: one open cluster inside
// the union of the good squares' witness blocks must touch every good
// square. False means a corrupted witness or an implementation bug.
bool verify_renormalized_path(const BondOracle& open, const GrowResult& run);

std::string witness_json(const GrowResult& run);
std::string witness_svg(const GrowResult& run);

}  // namespace rclab
