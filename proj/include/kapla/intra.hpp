#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kapla/cost.hpp"
#include "kapla/hw.hpp"
#include "kapla/ir.hpp"
#include "kapla/network.hpp"

namespace kapla {

/// Multiplicative tiling decisions for one loop dim across the on-chip
/// levels. `unit` is the per-PE tile; `cache[l]` grows level l's per-buffer
/// tile beyond what the inner levels cover; `stack[l]` replicates level l's
/// buffer group spatially. Factors not assigned anywhere run as update
/// trips: cache[l+1] turns into trips at level l, the leftover into trips at
/// the outermost level.
struct TilePlan {
  int64_t unit = 1;
  std::vector<int64_t> cache;
  std::vector<int64_t> stack;
};

/// A complete schedule in factored form. Solvers move through this space;
/// materialize_plan turns a plan into directives.
struct SchedulePlan {
  std::vector<Dim> dims;  // the layer's loop dims, aligned with tiles
  std::vector<TilePlan> tiles;
  std::vector<std::vector<Dim>> order;  // update order per level, innermost first
  int64_t srow_repl = 1;  // filter rows spread over PE rows (row stationary)
  int64_t window_r = 1, window_s = 1;  // per-PE filter tile
};

/// Per-PE tiles and PE-array placement following the hardware's dataflow:
/// row stationary pins one filter row per PE row and spreads output columns
/// across PE columns; systolic spreads input channels over rows and output
/// channels over columns with whole filter windows per PE; flexible starts
/// from bare unit tiles. Falls back to the systolic start when the
/// row-stationary template does not fit (no spatial dims, or S taller than
/// the PE rows). The order vectors are left empty for the caller.
SchedulePlan seed_plan(const LayerSpec& layer, const HardwareSpec& hw);

/// Update orders worth searching at one level: batch, reduction and output
/// channels permuted, fmap sweeps pinned innermost.
std::vector<std::vector<Dim>> gen_loop_orders(const LayerSpec& layer);

/// Loop trips along d not yet absorbed by the plan's factors.
int64_t remaining_trips(const SchedulePlan& plan, const LayerSpec& layer, Dim d);

/// Buffer-group fan-out the plan requests at one level.
int64_t plan_parallelism(const SchedulePlan& plan, size_t level);

/// Tensor names a materialized schedule uses, aligned with layer_tensors:
/// inputs after their producer layers (duplicates get a #k suffix), the
/// weight as "<layer>.w", the output after the layer itself.
std::vector<std::string> tensor_names(const LayerSpec& layer);

/// Turns the plan into directives: derived input windows, paired fmap stacks
/// and updates, spatial shifts by the covered tile extent. Tensors are named
/// after the data they carry (inputs by producer layer, the output by the
/// layer itself), so shared fmaps keep one name across a segment.
LayerSchedule materialize_plan(const SchedulePlan& plan, const LayerSpec& layer,
                               const HardwareSpec& hw);

struct Priced {
  LayerSchedule sched;
  LayerCost cost;
};

/// Materializes and prices the plan, then turns replicated input/weight
/// tiles into rotating shards (shr) wherever the level supports same-level
/// transfer and the objective improves. Every solver scores candidates
/// through this one path.
Priced evaluate_plan(const SchedulePlan& plan, const LayerSpec& layer,
                     const HardwareSpec& hw, const Region& region, Objective obj);

struct IntraOptions {
  Objective objective = Objective::Energy;
  /// Mesh rectangle the layer may occupy; zero-sized means the full mesh.
  Region region{0, 0, 0, 0};
  /// When set, only these dims may keep update trips at the outermost level,
  /// placed outermost in the given order; everything else must be covered on
  /// chip. Pipelined segments use this to keep one granule resident while
  /// sweeping the granule axes. An empty list forces full residence.
  std::optional<std::vector<Dim>> top_sweep;
  /// Exact on-chip coverage per dim, so a consumer stage advances in lockstep
  /// with its producer. Pinned dims are fixed before the greedy passes run
  /// and excluded from further growth; their leftover trips sweep at the
  /// outermost level.
  std::vector<std::pair<Dim, int64_t>> pin_coverage;
};

/// Greedy schedule construction for one layer: seeds the PE array from the
/// hardware dataflow, then per level spreads loop trips spatially while the
/// objective does not degrade and grows cached tiles while it strictly
/// improves, searching the per-level update orders. The result always passes
/// validation, capacity and runnability checks. Throws
/// Error{NoValidSchedule} when even the seed cannot fit.
Priced solve_intra(const LayerSpec& layer, const HardwareSpec& hw,
                   const IntraOptions& opt = {});

}  // namespace kapla
