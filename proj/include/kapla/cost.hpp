#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kapla/access.hpp"
#include "kapla/hw.hpp"
#include "kapla/ir.hpp"
#include "kapla/network.hpp"

namespace kapla {

/// Traffic through the boundary between one level and the next outer one.
struct BoundaryCost {
  std::string level;
  int64_t elems = 0;           // fetches plus output drains and read-backs
  int64_t rotation_elems = 0;  // shr shard moves inside the level
  double energy_pj = 0.0;
  double cycles = 0.0;
  double port_elems_per_cycle = 1.0;  // aggregate bandwidth feeding this level
};

/// Per (level, tensor) slice of the traffic, kept so segment pricing can
/// retarget an intermediate tensor's DRAM share exactly. energy_pj covers the
/// boundary and rotation accesses; noc_pj is the tensor's mesh-hop share,
/// nonzero only at the node level.
struct TensorTraffic {
  std::string level;
  std::string tensor;
  TensorRole role = TensorRole::Input;
  int64_t transfers = 0;
  int64_t rotation = 0;
  double energy_pj = 0.0;
  double noc_pj = 0.0;
};

struct LayerCost {
  std::string layer;

  double mac_pj = 0.0;
  double boundary_pj = 0.0;  // all levels, rotation included
  double noc_pj = 0.0;       // mesh hops: DRAM transport and rotation
  double writeback_pj = 0.0; // subset of boundary_pj: compulsory output drain
  double energy_pj = 0.0;    // mac + boundary + noc

  double mac_cycles = 0.0;
  double noc_cycles = 0.0;
  double latency_cycles = 0.0;  // roofline max over mac, boundaries, noc

  std::vector<BoundaryCost> boundaries;  // innermost first
  std::vector<TensorTraffic> traffic;

  int64_t active_pes = 1;
  int64_t nodes_used = 1;
  double dram_hops = 1.0;
};

/// Average mesh hops from the region's centroid to the nearest mesh edge,
/// where DRAM attaches. An edge node pays one hop for its own DRAM link.
double hops_to_dram(const Region& region, const HardwareSpec& hw);

/// Manhattan distance between two regions' centroids. Zero when a consumer
/// reuses its producer's nodes, so temporal forwarding in place is free.
double hops_between(const Region& a, const Region& b);

/// Prices one layer's schedule on the hardware. Every boundary crossing pays
/// both adjacent levels' access costs; outputs pay their drains plus partial
/// re-fetches (2 * next - distinct); rotation pays two same-level accesses,
/// and at the node level one mesh hop. Latency is the roofline max of
/// compute, per-boundary bandwidth and mesh transport. The schedule must
/// cover every on-chip level. `region` is the mesh rectangle the layer runs
/// on (the full mesh for standalone layers). Throws Error{InvalidInput} when
/// the schedule's levels do not line up with the hardware's.
LayerCost price_layer(const LayerSpec& layer, const LayerSchedule& sched,
                      const HardwareSpec& hw, const Region& region);

inline LayerCost price_layer(const LayerSpec& layer, const LayerSchedule& sched,
                             const HardwareSpec& hw) {
  return price_layer(layer, sched, hw,
                     Region{0, 0, hw.mesh_rows(), hw.mesh_cols()});
}

/// Rejects schedules the hardware cannot run: capacity or fan-out overflow
/// at any level, an uncovered on-chip level, or shr rotation at a level
/// without same-level transfer support. Returns an empty string when
/// runnable, else the failure message naming the level.
std::string runnability_failure(const LayerSchedule& sched, const HardwareSpec& hw);

enum class Objective : uint8_t { Energy, Latency };

std::string_view objective_name(Objective o);
std::optional<Objective> objective_from_name(std::string_view name);

/// The scalar a solver minimizes under the given objective.
double objective_metric(const LayerCost& cost, Objective o);

}  // namespace kapla
