#include "kapla/cost.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace kapla {

namespace {

double centroid_row(const Region& r) { return r.row0 + (r.rows - 1) / 2.0; }
double centroid_col(const Region& r) { return r.col0 + (r.cols - 1) / 2.0; }

}  // namespace

std::string_view objective_name(Objective o) {
  switch (o) {
    case Objective::Energy: return "energy";
    case Objective::Latency: return "latency";
  }
  return "?";
}

std::optional<Objective> objective_from_name(std::string_view name) {
  for (Objective o : {Objective::Energy, Objective::Latency})
    if (objective_name(o) == name) return o;
  return std::nullopt;
}

double objective_metric(const LayerCost& cost, Objective o) {
  return o == Objective::Energy ? cost.energy_pj : cost.latency_cycles;
}

double hops_to_dram(const Region& region, const HardwareSpec& hw) {
  double cr = centroid_row(region);
  double cc = centroid_col(region);
  double rows = static_cast<double>(hw.mesh_rows());
  double cols = static_cast<double>(hw.mesh_cols());
  return std::min(std::min(cr + 1.0, rows - cr), std::min(cc + 1.0, cols - cc));
}

double hops_between(const Region& a, const Region& b) {
  return std::abs(centroid_row(a) - centroid_row(b)) +
         std::abs(centroid_col(a) - centroid_col(b));
}

std::string runnability_failure(const LayerSchedule& sched, const HardwareSpec& hw) {
  if (sched.levels.empty()) return "schedule has no levels";
  CapacityVerdict cap = check_capacity(sched, hw);
  if (!cap.ok) return cap.first_failure;
  if (sched.levels.size() + 1 < hw.levels.size())
    return "schedule leaves hardware level '" + hw.levels[sched.levels.size()].name +
           "' unscheduled";
  for (size_t li = 0; li < sched.levels.size(); ++li) {
    if (hw.levels[li].same_level_transfer) continue;
    for (const auto& t : sched.levels[li].tensors)
      if (t.shr > 1)
        return "level '" + sched.levels[li].level + "': tensor '" + t.name +
               "' needs shr rotation but the level has no same-level transfer";
  }
  return "";
}

LayerCost price_layer(const LayerSpec& layer, const LayerSchedule& sched,
                      const HardwareSpec& hw, const Region& region) {
  if (sched.levels.size() + 1 != hw.levels.size()) {
    std::ostringstream os;
    os << "pricing layer '" << layer.name << "': schedule covers "
       << sched.levels.size() << " levels but the hardware has "
       << hw.levels.size() - 1 << " on-chip levels";
    throw Error(Error::Code::InvalidInput, os.str());
  }
  for (size_t li = 0; li < sched.levels.size(); ++li)
    if (sched.levels[li].level != hw.levels[li].name)
      throw Error(Error::Code::InvalidInput,
                  "pricing layer '" + layer.name + "': schedule level '" +
                      sched.levels[li].level + "' does not match hardware level '" +
                      hw.levels[li].name + "'");

  AccessReport rep = access_counts(sched, layer.dims);

  LayerCost cost;
  cost.layer = layer.name;
  const size_t mesh = sched.levels.size() - 1;
  cost.nodes_used = parallelism(sched.levels[mesh]);
  for (const auto& lv : sched.levels) cost.active_pes *= parallelism(lv);
  cost.dram_hops = hops_to_dram(region, hw);

  const int64_t macs = mac_count(layer);
  cost.mac_pj = static_cast<double>(macs) * hw.mac_cost_pj;
  cost.mac_cycles = static_cast<double>(macs) / static_cast<double>(cost.active_pes);

  double noc_elem_hops = 0.0;
  for (size_t li = 0; li < sched.levels.size(); ++li) {
    const LevelAccess& la = rep.levels[li];
    const double unit =
        hw.levels[li].access_cost_pj + hw.levels[li + 1].access_cost_pj;
    const double rot_unit = 2.0 * hw.levels[li].access_cost_pj;

    BoundaryCost bc;
    bc.level = la.level;
    int64_t parents = 1;
    for (size_t j = li + 1; j < sched.levels.size(); ++j)
      parents *= parallelism(sched.levels[j]);
    bc.port_elems_per_cycle =
        hw.levels[li + 1].bandwidth_elems_per_cycle * static_cast<double>(parents);

    for (const TensorAccess& ta : la.tensors) {
      TensorTraffic tt;
      tt.level = la.level;
      tt.tensor = ta.tensor;
      tt.role = ta.role;
      // Outputs drain every produced tile and read partials back in; what was
      // never spilled before (the distinct volume, written exactly once) has
      // no read-back.
      tt.transfers = ta.role == TensorRole::Output
                         ? 2 * ta.next_volume - ta.distinct_volume
                         : ta.next_volume;
      tt.rotation = ta.same_volume;
      tt.energy_pj = static_cast<double>(tt.transfers) * unit +
                     static_cast<double>(tt.rotation) * rot_unit;
      if (li == mesh) {
        double hops = static_cast<double>(tt.transfers) * cost.dram_hops +
                      static_cast<double>(tt.rotation);
        tt.noc_pj = hops * hw.noc_hop_cost_pj;
        noc_elem_hops += hops;
        if (ta.role == TensorRole::Output)
          cost.writeback_pj += static_cast<double>(ta.distinct_volume) * unit;
      }
      bc.elems += tt.transfers;
      bc.rotation_elems += tt.rotation;
      bc.energy_pj += tt.energy_pj;
      cost.noc_pj += tt.noc_pj;
      cost.traffic.push_back(std::move(tt));
    }
    bc.cycles = static_cast<double>(bc.elems) / bc.port_elems_per_cycle;
    cost.boundary_pj += bc.energy_pj;
    cost.boundaries.push_back(std::move(bc));
  }

  cost.noc_cycles = noc_elem_hops / static_cast<double>(cost.nodes_used);
  cost.energy_pj = cost.mac_pj + cost.boundary_pj + cost.noc_pj;
  cost.latency_cycles = std::max(cost.mac_cycles, cost.noc_cycles);
  for (const auto& bc : cost.boundaries)
    cost.latency_cycles = std::max(cost.latency_cycles, bc.cycles);
  return cost;
}

}  // namespace kapla
