#include "kapla/hw.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace kapla {

using nlohmann::json;

std::string_view pe_mapping_name(PeMapping m) {
  switch (m) {
    case PeMapping::RowStationary: return "row_stationary";
    case PeMapping::Systolic: return "systolic";
    case PeMapping::Flexible: return "flexible";
  }
  return "?";
}

std::optional<PeMapping> pe_mapping_from_name(std::string_view name) {
  for (PeMapping m : {PeMapping::RowStationary, PeMapping::Systolic, PeMapping::Flexible})
    if (pe_mapping_name(m) == name) return m;
  return std::nullopt;
}

int64_t HardwareSpec::mesh_rows() const {
  return levels.size() >= 2 ? levels[levels.size() - 2].array_rows : 1;
}

int64_t HardwareSpec::mesh_cols() const {
  return levels.size() >= 2 ? levels[levels.size() - 2].array_cols : 1;
}

int64_t HardwareSpec::pes_per_node() const {
  int64_t p = 1;
  for (size_t i = 0; i + 2 < levels.size(); ++i) p *= levels[i].array_size();
  return p;
}

void validate_hw(const HardwareSpec& hw) {
  if (hw.levels.size() < 2)
    throw invalid("hardware needs at least one on-chip level plus DRAM");
  for (size_t i = 0; i < hw.levels.size(); ++i) {
    const MemLevelSpec& l = hw.levels[i];
    if (l.name.empty()) throw invalid("hardware level without a name");
    for (size_t j = 0; j < i; ++j)
      if (hw.levels[j].name == l.name)
        throw invalid("duplicate hardware level name " + l.name);
    bool outermost = i + 1 == hw.levels.size();
    if (l.capacity_bytes <= 0 && !outermost)
      throw invalid("level " + l.name + ": capacity must be positive");
    if (l.array_rows < 1 || l.array_cols < 1)
      throw invalid("level " + l.name + ": array dims must be >= 1");
    if (l.access_cost_pj < 0)
      throw invalid("level " + l.name + ": negative access cost");
    if (l.bandwidth_elems_per_cycle <= 0)
      throw invalid("level " + l.name + ": bandwidth must be positive");
  }
  if (hw.dram().array_size() != 1)
    throw invalid("outermost level must have a 1x1 array");
  if (hw.mac_cost_pj < 0 || hw.noc_hop_cost_pj < 0 || hw.static_power_pj_per_cycle < 0)
    throw invalid("negative cost constant");
  if (hw.bytes_per_element < 1) throw invalid("bytes_per_element must be >= 1");
  if (hw.freq_hz <= 0) throw invalid("freq_hz must be positive");
}

HardwareSpec parse_hw(const std::string& json_text, const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw invalid(origin + ": " + e.what());
  }
  HardwareSpec hw;
  hw.name = j.value("name", origin);
  if (!j.contains("levels") || !j["levels"].is_array() || j["levels"].empty())
    throw invalid(origin + ": missing 'levels' array");
  for (const json& lj : j["levels"]) {
    MemLevelSpec l;
    l.name = lj.value("name", "");
    l.capacity_bytes = lj.value("capacity_bytes", int64_t{0});
    if (lj.contains("array")) {
      const json& a = lj["array"];
      if (!a.is_array() || a.size() != 2)
        throw invalid(origin + ", level " + l.name + ": array must be [rows, cols]");
      l.array_rows = a[0].get<int64_t>();
      l.array_cols = a[1].get<int64_t>();
    }
    l.access_cost_pj = lj.value("access_cost_pj", 0.0);
    l.bandwidth_elems_per_cycle = lj.value("bandwidth_elems_per_cycle", 1.0);
    l.same_level_transfer = lj.value("same_level_transfer", false);
    hw.levels.push_back(std::move(l));
  }
  hw.mac_cost_pj = j.value("mac_cost_pj", 1.0);
  hw.noc_hop_cost_pj = j.value("noc_hop_cost_pj", 0.0);
  hw.static_power_pj_per_cycle = j.value("static_power_pj_per_cycle", 0.0);
  hw.bytes_per_element = j.value("bytes_per_element", int64_t{2});
  std::string pm = j.value("pe_mapping", "flexible");
  auto m = pe_mapping_from_name(pm);
  if (!m) throw invalid(origin + ": unknown pe_mapping '" + pm + "'");
  hw.pe_mapping = *m;
  hw.temporal_layer_pipe = j.value("temporal_layer_pipe", false);
  hw.spatial_layer_pipe = j.value("spatial_layer_pipe", false);
  hw.freq_hz = j.value("freq_hz", 1e9);
  validate_hw(hw);
  return hw;
}

HardwareSpec load_hw(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw invalid("cannot open hardware file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_hw(ss.str(), path);
}

}  // namespace kapla
