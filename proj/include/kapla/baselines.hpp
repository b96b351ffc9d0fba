#pragma once

#include <cstdint>

#include "kapla/cost.hpp"
#include "kapla/hw.hpp"
#include "kapla/inter.hpp"
#include "kapla/intra.hpp"
#include "kapla/network.hpp"

namespace kapla {

struct BaselineOptions {
  Objective objective = Objective::Energy;
  /// Mesh rectangle the layer may occupy; zero-sized means the full mesh.
  Region region{0, 0, 0, 0};
  /// Sampling key for solve_random.
  uint64_t seed = 0;
  /// Fraction of candidates solve_random prices; 1 prices everything.
  double keep_prob = 1.0;
  /// Candidate cap; 0 reads KAPLA_GUARD from the environment, falling back
  /// to 100 million. Exceeding it raises Error{GuardTripped}.
  int64_t guard = 0;
};

struct BaselineStats {
  int64_t candidates = 0;  // factored plans walked, order choices included
  int64_t priced = 0;      // candidates that passed the hardware checks
};

/// Dense reference search: every per-level cache/stack divisor split of
/// every loop dim, crossed with the per-level update orders, priced through
/// the same evaluator the greedy solver uses. Spatial fan-out and buffer
/// capacity bounds cut subtrees that cannot recover. Ties keep the earliest
/// candidate, so runs are reproducible.
Priced solve_exhaustive(const LayerSpec& layer, const HardwareSpec& hw,
                        const BaselineOptions& opt = {},
                        BaselineStats* stats = nullptr);

/// The same walk, but each candidate is priced only with probability
/// keep_prob, decided by a hash of (seed, candidate index) so the choice for
/// one candidate does not depend on any other. keep_prob = 1 prices
/// everything and agrees with solve_exhaustive bit for bit.
Priced solve_random(const LayerSpec& layer, const HardwareSpec& hw,
                    const BaselineOptions& opt = {},
                    BaselineStats* stats = nullptr);

struct NetworkBaselineOptions {
  Objective objective = Objective::Energy;
  uint64_t seed = 0;
  double keep_prob = 1.0;
  /// Shared candidate budget across all per-layer walks; 0 reads KAPLA_GUARD.
  int64_t guard = 0;
  int max_segment_layers = 4;
};

/// Reference search over a whole network: every contiguous segmentation is
/// enumerated and the best composition picked by exact prefix dynamic
/// programming. Standalone layers are priced by the per-layer walk, so the
/// result is independent of the greedy intra-layer solver; pipelined groups
/// go through the shared segment pricer, whose schedules are constrained by
/// producer pins rather than searched.
NetworkSolution solve_exhaustive_network(const NetworkDAG& net, const HardwareSpec& hw,
                                         const NetworkBaselineOptions& opt = {},
                                         BaselineStats* stats = nullptr);

/// The same segmentation sweep with each per-layer walk sampled at
/// keep_prob. Segment slicing itself is never sampled, only the schedule
/// walks under it, so keep_prob = 1 agrees with solve_exhaustive_network bit
/// for bit.
NetworkSolution solve_random_network(const NetworkDAG& net, const HardwareSpec& hw,
                                     const NetworkBaselineOptions& opt = {},
                                     BaselineStats* stats = nullptr);

}  // namespace kapla
