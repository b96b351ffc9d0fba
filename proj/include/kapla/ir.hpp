#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kapla/dims.hpp"
#include "kapla/network.hpp"

namespace kapla {

/// tensor{name}(Dim=size, ..., shr=f): a per-buffer subtensor held at one
/// level. shr > 1 means the tile is split across that many sibling buffers
/// and rotated between them instead of being replicated.
struct TensorDecl {
  std::string name;
  TensorRole role = TensorRole::Input;
  DimMap sizes;
  int64_t shr = 1;

  bool operator==(const TensorDecl&) const = default;
};

/// stack(Dim+=shift, ..., repl): replicates the level's buffer group repl
/// times, shifting the named dims per copy. Tensors none of whose dims are
/// shifted are replicated; the others are sharded across the copies.
struct StackDirective {
  DimMap shifts;
  int64_t repl = 1;

  bool operator==(const StackDirective&) const = default;
};

/// update(Dim+=step, ...): one temporal loop, advancing all named dims
/// together. Updates are listed innermost first.
struct UpdateDirective {
  DimMap steps;

  bool operator==(const UpdateDirective&) const = default;
};

struct LevelSchedule {
  std::string level;
  std::vector<TensorDecl> tensors;
  std::vector<StackDirective> stacks;
  std::vector<UpdateDirective> updates;

  bool operator==(const LevelSchedule&) const = default;
  const TensorDecl* find_tensor(const std::string& name) const;
};

/// On-chip levels only, innermost first; DRAM implicitly holds everything.
struct LayerSchedule {
  std::string layer;
  std::vector<LevelSchedule> levels;

  bool operator==(const LayerSchedule&) const = default;
};

struct Region {
  int64_t row0 = 0, col0 = 0, rows = 1, cols = 1;

  int64_t nodes() const { return rows * cols; }
  bool operator==(const Region&) const = default;
};

enum class Granularity : uint8_t { Row, Fmap, Full };
std::string_view granularity_name(Granularity g);
std::optional<Granularity> granularity_from_name(std::string_view name);

struct ForwardEdge {
  std::string producer;
  std::string consumer;
  Granularity granularity = Granularity::Full;

  bool operator==(const ForwardEdge&) const = default;
};

struct RegionAssignment {
  std::string layer;
  Region region;

  bool operator==(const RegionAssignment&) const = default;
};

struct SegmentAnnotation {
  std::vector<std::string> layers;
  std::vector<RegionAssignment> regions;  // one per layer, same order
  std::vector<ForwardEdge> forwards;      // segment-internal edges

  const Region* region_of(const std::string& layer) const;
  bool operator==(const SegmentAnnotation&) const = default;
};

struct ScheduleIR {
  std::vector<LayerSchedule> layers;
  std::vector<SegmentAnnotation> segments;

  bool operator==(const ScheduleIR&) const = default;
  const LayerSchedule* find_layer(const std::string& name) const;
};

/// Elements one buffer holds: ceil(product of sizes / shr).
int64_t footprint_elems(const TensorDecl& t);
int64_t level_footprint_elems(const LevelSchedule& level);

/// Buffers the level fans out to: product of stack replication factors.
int64_t parallelism(const LevelSchedule& level);

/// Union tile width along d across the level's buffer group:
/// size + sum over stacks of (repl-1)*shift.
int64_t stacked_extent(const LevelSchedule& level, const TensorDecl& t, Dim d);

/// Traffic multiplier from stacks that shift none of the tensor's dims.
int64_t replication_mult(const LevelSchedule& level, const TensorDecl& t);

/// Structural validation of one layer's directives against the layer's full
/// dims: positive values, per-level name uniqueness, the two-level nesting
/// rule (inner per-buffer sizes within the next outer tensor, all inner dims
/// present outside), one update per dim per level, every stack/update dim
/// declared by some tensor, shr dividing the replication factor, and
/// per-buffer sizes within the loop bounds. Throws Error{InvalidInput}.
void validate_layer_schedule(const LayerSchedule& sched, const DimMap& full_dims);

struct LevelCapacity {
  std::string level;
  int64_t footprint_bytes = 0;
  int64_t capacity_bytes = 0;
  int64_t parallelism = 1;
  int64_t array_size = 1;
  bool ok = true;
  std::string message;
};

struct CapacityVerdict {
  bool ok = true;
  std::vector<LevelCapacity> levels;
  std::string first_failure;
};

struct HardwareSpec;

/// Per-level footprint and fan-out against the hardware: footprint * element
/// size within capacity, parallelism within the array. The schedule's levels
/// must name a prefix of the hardware's on-chip levels in order.
CapacityVerdict check_capacity(const LayerSchedule& sched, const HardwareSpec& hw);

struct PipelineMatchVerdict {
  bool ok = true;
  std::string message;
};

/// Checks that producer and consumer move the shared tensor in lockstep at
/// their topmost on-chip levels: equal stacked extents on batch and mapped
/// channel dims and equal topmost update steps on the tensor's advanced dims
/// under the output->input role mapping (K->C, Xo->Xi, Yo->Yi).
PipelineMatchVerdict check_pipeline_match(const LayerSchedule& producer,
                                          const LayerSchedule& consumer,
                                          const std::string& shared_tensor);

}  // namespace kapla
