#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kapla/dims.hpp"

namespace kapla {

/// One level of the buffer hierarchy. Levels are ordered innermost first
/// (register file, ..., DRAM last). `array` is the number of buffers at this
/// level per buffer of the next outer level: the innermost array is the PE
/// array per node, the second-outermost is the node mesh.
struct MemLevelSpec {
  std::string name;
  int64_t capacity_bytes = 0;  // 0 = unbounded, only legal at the outermost level
  int64_t array_rows = 1;
  int64_t array_cols = 1;
  double access_cost_pj = 0.0;       // per element moved at this level
  double bandwidth_elems_per_cycle = 1.0;  // toward the next outer level
  bool same_level_transfer = false;

  int64_t array_size() const { return array_rows * array_cols; }
};

enum class PeMapping : uint8_t { RowStationary, Systolic, Flexible };

std::string_view pe_mapping_name(PeMapping m);
std::optional<PeMapping> pe_mapping_from_name(std::string_view name);

struct HardwareSpec {
  std::string name;
  std::vector<MemLevelSpec> levels;  // innermost first, last one is DRAM
  double mac_cost_pj = 1.0;
  double noc_hop_cost_pj = 0.0;  // per element per mesh hop
  double static_power_pj_per_cycle = 0.0;
  int64_t bytes_per_element = 2;
  PeMapping pe_mapping = PeMapping::Flexible;
  bool temporal_layer_pipe = false;
  bool spatial_layer_pipe = false;
  double freq_hz = 1e9;

  const MemLevelSpec& innermost() const { return levels.front(); }
  const MemLevelSpec& dram() const { return levels.back(); }
  /// The node mesh whose buffers hold one GBUF each: the level just inside
  /// DRAM. Single-level-plus-DRAM configs degenerate to a 1x1 mesh.
  int64_t mesh_rows() const;
  int64_t mesh_cols() const;
  int64_t nodes() const { return mesh_rows() * mesh_cols(); }
  /// PEs per node: product of array sizes of all levels inside the mesh level.
  int64_t pes_per_node() const;
  int64_t total_pes() const { return nodes() * pes_per_node(); }
};

void validate_hw(const HardwareSpec& hw);
HardwareSpec load_hw(const std::string& path);
HardwareSpec parse_hw(const std::string& json_text, const std::string& origin);

}  // namespace kapla
