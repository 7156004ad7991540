#pragma once

#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rclab/enumerate.hpp"
#include "rclab/sampler.hpp"

namespace rclab {

using BondOracle = std::function<bool(const Bond&)>;

// ---------------------------------------------------------------------------
// Events. Coordinates are sites of the ambient system's region unless noted.
// ---------------------------------------------------------------------------

struct EvTwoPoint {
  Coord a{};
  Coord b{};
};

struct EvConnect {
  std::vector<Coord> A;
  std::vector<Coord> B;
};

// Crossing between the two faces of R(N,delta) orthogonal to the last axis,
// by open paths that stay within the rectangle. The ambient region may be
// the larger R^L(N,delta); the event never reads bonds outside R(N,delta).
struct EvFaceCross {
  int N = 0;
  double delta = 0;
};

// Disconnection of those faces: the complement of EvFaceCross.
struct EvDisconnect {
  int N = 0;
  double delta = 0;
};

// Origin joined to the complement of the region (a ghost or any exterior
// site), i.e. 0 <-> Lambda_N^c.
struct EvBoxPerc {};

// All bonds of the plaque b^axis_K(center) open.
struct EvSeedPresent {
  Coord center{};
  int axis = 0;
  int K = 1;
};

// Block events for the block placed by (anchor, orient); local block
// coordinates are B(l,h). subfacet = 0 asks for any top (resp. side) seed;
// 1-based indices select one subfacet.
struct EvTopSeed {
  int K = 1, l = 1, h = 1;
  int subfacet = 0;
  Coord anchor{};
  Orientation orient = Orientation::North;
};

struct EvSideSeed {
  int K = 1, l = 1, h = 1;
  int subfacet = 0;
  Coord anchor{};
  Orientation orient = Orientation::North;
};

struct EvOccupied {
  int K = 1, l = 1, h = 1;
  Coord anchor{};
  Orientation orient = Orientation::North;
};

using EventSpec = std::variant<EvTwoPoint, EvConnect, EvFaceCross, EvDisconnect,
                               EvBoxPerc, EvSeedPresent, EvTopSeed, EvSideSeed,
                               EvOccupied>;

bool eval_event(const System& sys, const ExplicitConfig& cfg, const EventSpec& spec);
bool event_increasing(const EventSpec& spec);  // all but EvDisconnect
std::string event_name(const EventSpec& spec);

// ---------------------------------------------------------------------------
// Geometric block detectors over a bond oracle, in local block coordinates.
// "Strictly within B(l,h)" means paths over bonds meeting the interior
// B*(l,h); seeds are fully open plaques.
// ---------------------------------------------------------------------------

std::vector<Coord> plaque_sites(const Coord& center, int axis, int K, int d);
bool plaque_open(const BondOracle& open, const Coord& center, int axis, int K, int d);

// Sites of B(l,h) reachable from `sources` through open bonds meeting
// B*(l,h). Visits the whole component; used by the detectors below.
std::vector<Coord> block_reach(const BondOracle& open, int l, int h, int d,
                               const std::vector<Coord>& sources);

// First (lexicographic) fully-open top seed b^d_K(x) with x in T_subfacet
// (any subfacet when 0) reached from `sources`. The reached set may be
// precomputed and shared across subfacet queries.
std::optional<Coord> top_seed_connection(const BondOracle& open, int K, int l,
                                         int h, int d, int subfacet,
                                         const std::vector<Coord>& reached);

// Same for side seeds b^fa_K(x) centered in S_subfacet; returns the center
// and reports the face axis and sign through `axis_out`/`sign_out` if given.
std::optional<Coord> side_seed_connection(const BondOracle& open, int K, int l,
                                          int h, int d, int subfacet,
                                          const std::vector<Coord>& reached,
                                          int* axis_out = nullptr,
                                          int* sign_out = nullptr);

std::vector<Coord> root_plaque_sites(int K, int d);  // b^d_K(0)

bool block_occupied(const BondOracle& open, int K, int l, int h, int d,
                    const std::vector<Coord>& sources);

std::int64_t count_Y(const BondOracle& open, int K, int l, int h, int d);
std::int64_t count_X(const BondOracle& open, int K, int l, int h, int d);

// ---------------------------------------------------------------------------
// Estimators.
// ---------------------------------------------------------------------------

Estimate estimate_event(const System& sys, const SamplerCfg& scfg,
                        const EventSpec& spec);
Estimate estimate_event(const Region& region, const RcParams& params,
                        const BoundaryCondition& bc, const EventSpec& spec,
                        const SamplerCfg& scfg);

enum class TensionMode { Auto, Direct, Interpolation };

struct TensionResult {
  double tau = 0;
  double lo = 0;
  double hi = 0;
  bool infinite = false;  // every sample crossed; no finite estimate
  std::string method;
  std::int64_t n_samples = 0;
  double p_hat = 0;  // direct mode: estimated disconnection probability
};

// tau-hat = -log P(J(N,delta)) / N^{d-1}, sampled on R^L(N,delta) under bc.
// Direct mode counts disconnections; the interpolation mode integrates the
// conditional-minus-unconditional marginal of a separating bond layer in s,
// which stays usable when P(J) underflows.
TensionResult surface_tension_estimate(int N, double delta, int L, int d,
                                       const RcParams& params,
                                       const BoundaryCondition& bc,
                                       const SamplerCfg& scfg,
                                       TensionMode mode = TensionMode::Auto);

struct MixingGapResult {
  int K = 0;
  double gap = 0;
  double half_width = 0;
  Estimate wired;
  Estimate free_bc;
};

// |Phi^{s,w}_{B_K}(omega_b0) - Phi^{s,f}_{B_K}(omega_b0)| where B_K =
// {-K..K}^{d-1} x {0..K}, the bonds below the bottom face carry intensity s,
// and b0 is the bond below the origin. The wired variant joins the whole
// exterior; the free variant keeps only the below-bottom class.
MixingGapResult mixing_gap(int K, double s, double p, double q, int d,
                           const SamplerCfg& scfg);

}  // namespace rclab
