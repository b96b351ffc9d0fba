#pragma once

#include <optional>
#include <string>
#include <vector>

#include "kapla/cost.hpp"
#include "kapla/hw.hpp"
#include "kapla/intra.hpp"
#include "kapla/ir.hpp"
#include "kapla/network.hpp"

namespace kapla {

/// One candidate way to run a contiguous group of layers: where each layer
/// sits on the mesh, how finely the internal edges hand data forward, and
/// whether the layers overlap on disjoint regions or take turns on the
/// shared mesh.
struct SegmentScheme {
  std::vector<int> layers;            // network indices, topologically ordered
  std::vector<Region> regions;        // one per layer, same order
  std::vector<ForwardEdge> forwards;  // segment-internal edges
  bool overlapped = false;            // disjoint regions with pipelined fills
};

/// A priced segment: solved per-layer schedules plus group totals with the
/// internal edges moved off DRAM.
struct SegmentCost {
  SegmentScheme scheme;
  std::vector<Priced> layers;  // same order as scheme.layers
  double energy_pj = 0.0;
  double makespan_cycles = 0.0;
};

struct InterOptions {
  Objective objective = Objective::Energy;
  /// Partial solutions kept per endpoint of the segmentation search.
  int top_k = 4;
  /// Longest group of layers the enumerator proposes as one segment.
  int max_segment_layers = 4;
};

struct NetworkSolution {
  ScheduleIR ir;
  std::vector<SegmentCost> segments;
  double energy_pj = 0.0;  // compute, boundaries, network and idle power
  double makespan_cycles = 0.0;
  double static_pj = 0.0;
};

/// Splits `whole` into one rectangle per weight by straight guillotine cuts,
/// areas tracking the weights. Cut orientations multiply out; the result is
/// deduplicated, and splits where some share drifts past twice (or under
/// half) its proportional area are dropped.
std::vector<std::vector<Region>> region_splits(const Region& whole,
                                               const std::vector<double>& weights);

/// Cheap necessary conditions for the scheme to be schedulable at all. True
/// means no evaluation can succeed, so the scheme is safe to discard without
/// pricing; false promises nothing.
bool conservative_prune(const NetworkDAG& net, const HardwareSpec& hw,
                        const SegmentScheme& scheme);

/// A floor no evaluation of the scheme can beat under the objective: compute
/// energy plus one cold pass of the external tensors, or the matching
/// compute/DRAM-port cycle bound.
double estimate_lower_bound(const NetworkDAG& net, const HardwareSpec& hw,
                            const SegmentScheme& scheme, Objective obj);

/// Solves every layer under the scheme's placement and residence
/// constraints, verifies forwarded neighbors advance in lockstep, and
/// reprices the internal edges as on-chip moves instead of DRAM round trips.
/// Empty when some layer cannot satisfy the scheme.
std::optional<SegmentCost> price_segment(const NetworkDAG& net, const HardwareSpec& hw,
                                         const SegmentScheme& scheme, Objective obj);

/// Prices a segment whose per-layer schedules are already fixed (re-pricing
/// an emitted plan, or plugging in schedules found by another search).
/// Checks each schedule is runnable, then applies the same lockstep, shared
/// residence and edge re-pricing rules as price_segment. On failure returns
/// empty and, when `why` is given, the reason.
std::optional<SegmentCost> price_segment_schedules(
    const NetworkDAG& net, const HardwareSpec& hw, const SegmentScheme& scheme,
    const std::vector<LayerSchedule>& schedules, std::string* why = nullptr);

/// Candidate ways to run layers [first, first+len): the standalone full-mesh
/// scheme for a single layer; for longer ranges, one scheme per forwarding
/// granularity and placement the hardware supports (whole-mesh time sharing,
/// region splits tracking the layers' MAC weights). Empty when the range is
/// not a connected chain or single fork-join, or when the hardware cannot
/// pipeline at all.
std::vector<SegmentScheme> enumerate_segment_schemes(const NetworkDAG& net,
                                                     const HardwareSpec& hw,
                                                     int first, int len);

/// Keeps the cost Pareto front: drops options beaten or equalled on both
/// energy and makespan by an earlier entry.
std::vector<SegmentCost> pareto_front(std::vector<SegmentCost> options);

/// Schedules the whole network: enumerates segment schemes over contiguous
/// layer ranges, prices the survivors of the conservative screen, and picks
/// the best chain of segments by dynamic programming over layer prefixes
/// with a top_k beam. Segments run one after another; idle power is charged
/// over the resulting makespan.
NetworkSolution solve_network(const NetworkDAG& net, const HardwareSpec& hw,
                              const InterOptions& opt = {});

/// Stitches priced segments, given in chain order, into a NetworkSolution:
/// concatenated per-layer schedules, annotations for the multi-layer
/// segments, summed energy and makespan, and the static-power charge for the
/// whole run.
NetworkSolution assemble_solution(const NetworkDAG& net, const HardwareSpec& hw,
                                  const std::vector<const SegmentCost*>& segments);

}  // namespace kapla
