#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kapla/ir.hpp"

namespace kapla {

/// Element traffic of one tensor at one level, totalled over the whole layer.
struct TensorAccess {
  std::string tensor;
  TensorRole role = TensorRole::Input;

  /// Elements crossing the boundary to the next outer level. Counts the data
  /// each buffer group actually pulls in: the initial fill plus, per loop
  /// advance, the part of the newly needed tile the buffers do not already
  /// hold. Replicated groups each count; shr-way sharding divides.
  int64_t next_volume = 0;

  /// Elements moved between sibling buffers by shr rotation.
  int64_t same_volume = 0;

  /// Distinct elements touched (union of all tiles), with the same
  /// replication multiplier as next_volume. next_volume minus this is pure
  /// re-fetch traffic; for outputs it is the read-back volume.
  int64_t distinct_volume = 0;

  /// Complete walks of the tensor's tile space per one run of this level's
  /// nest: the trip product of the updates outside its outermost relevant
  /// update (1 when no update advances it).
  int64_t full_sweeps = 1;

  /// Diagnostic: elements one buffer consumes over a single pass of the
  /// innermost update that advances this tensor, sliding-window retention
  /// included (per-buffer sizes, no bound clamping).
  int64_t pass_buffer_volume = 0;

  int64_t mult = 1;  // replication factor from stacks shifting none of its dims
  int64_t shr = 1;
};

struct LevelAccess {
  std::string level;
  /// Runs of this level's loop nest over the whole layer: the product of all
  /// outer levels' trip counts.
  int64_t iterations = 1;
  /// Product of this level's own trip counts.
  int64_t trip_product = 1;
  std::vector<int64_t> trips;  // per update, innermost first
  std::vector<TensorAccess> tensors;

  const TensorAccess* find(const std::string& tensor) const;
};

struct AccessReport {
  std::vector<LevelAccess> levels;  // innermost first, aligned with the schedule

  const LevelAccess* find(const std::string& level) const;
};

/// Exact per-level element traffic for one layer's directives.
///
/// Loop bounds come from the next outer level's per-buffer tile sizes, and
/// from full_dims at the outermost level. Trip counts divide the bound by the
/// update step after discounting the stacked extent already covered in
/// parallel; every dim an update advances must agree on the count. Stacked
/// extents larger than the bound are clamped, never an error.
///
/// Throws Error{InvalidInput} on inconsistent trip counts or on tensors that
/// disagree about a shared dim's extent or bound.
AccessReport access_counts(const LayerSchedule& sched, const DimMap& full_dims);

}  // namespace kapla
