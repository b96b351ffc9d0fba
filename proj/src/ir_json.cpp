#include "kapla/ir_json.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace kapla {

using nlohmann::json;

namespace {

json dims_to_json(const DimMap& m) {
  json j = json::object();
  m.for_each([&](Dim d, int64_t v) { j[std::string(dim_name(d))] = v; });
  return j;
}

DimMap dims_from_json(const json& j, const std::string& where) {
  if (!j.is_object()) throw invalid(where + ": dims must be an object");
  DimMap m;
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto d = dim_from_name(it.key());
    if (!d) throw invalid(where + ": unknown dim '" + it.key() + "'");
    m.set(*d, it.value().get<int64_t>());
  }
  return m;
}

}  // namespace

std::string schedule_to_json(const ScheduleIR& ir, int indent) {
  json root;
  root["layers"] = json::array();
  for (const auto& l : ir.layers) {
    json lj;
    lj["layer"] = l.layer;
    lj["levels"] = json::array();
    for (const auto& lv : l.levels) {
      json vj;
      vj["level"] = lv.level;
      vj["tensors"] = json::array();
      for (const auto& t : lv.tensors) {
        json tj;
        tj["name"] = t.name;
        tj["role"] = std::string(role_name(t.role));
        tj["dims"] = dims_to_json(t.sizes);
        if (t.shr != 1) tj["shr"] = t.shr;
        vj["tensors"].push_back(std::move(tj));
      }
      vj["stacks"] = json::array();
      for (const auto& st : lv.stacks)
        vj["stacks"].push_back(
            {{"shifts", dims_to_json(st.shifts)}, {"repl", st.repl}});
      vj["updates"] = json::array();
      for (const auto& u : lv.updates)
        vj["updates"].push_back({{"steps", dims_to_json(u.steps)}});
      lj["levels"].push_back(std::move(vj));
    }
    root["layers"].push_back(std::move(lj));
  }
  root["segments"] = json::array();
  for (const auto& seg : ir.segments) {
    json sj;
    sj["layers"] = seg.layers;
    sj["regions"] = json::array();
    for (const auto& ra : seg.regions)
      sj["regions"].push_back({{"layer", ra.layer},
                               {"row0", ra.region.row0},
                               {"col0", ra.region.col0},
                               {"rows", ra.region.rows},
                               {"cols", ra.region.cols}});
    sj["forwards"] = json::array();
    for (const auto& fw : seg.forwards)
      sj["forwards"].push_back(
          {{"producer", fw.producer},
           {"consumer", fw.consumer},
           {"granularity", std::string(granularity_name(fw.granularity))}});
    root["segments"].push_back(std::move(sj));
  }
  return root.dump(indent) + "\n";
}

ScheduleIR schedule_from_json(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw invalid(origin + ": " + e.what());
  }
  ScheduleIR ir;
  try {
    for (const json& lj : j.value("layers", json::array())) {
      LayerSchedule l;
      l.layer = lj.at("layer").get<std::string>();
      for (const json& vj : lj.value("levels", json::array())) {
        LevelSchedule lv;
        lv.level = vj.at("level").get<std::string>();
        std::string where = origin + ", layer " + l.layer + ", level " + lv.level;
        for (const json& tj : vj.value("tensors", json::array())) {
          TensorDecl t;
          t.name = tj.at("name").get<std::string>();
          auto r = role_from_name(tj.value("role", "input"));
          if (!r) throw invalid(where + ": unknown tensor role");
          t.role = *r;
          t.sizes = dims_from_json(tj.at("dims"), where);
          t.shr = tj.value("shr", int64_t{1});
          lv.tensors.push_back(std::move(t));
        }
        for (const json& sj : vj.value("stacks", json::array())) {
          StackDirective st;
          st.shifts = dims_from_json(sj.at("shifts"), where);
          st.repl = sj.at("repl").get<int64_t>();
          lv.stacks.push_back(std::move(st));
        }
        for (const json& uj : vj.value("updates", json::array())) {
          UpdateDirective u;
          u.steps = dims_from_json(uj.at("steps"), where);
          lv.updates.push_back(std::move(u));
        }
        l.levels.push_back(std::move(lv));
      }
      ir.layers.push_back(std::move(l));
    }
    for (const json& sj : j.value("segments", json::array())) {
      SegmentAnnotation seg;
      seg.layers = sj.at("layers").get<std::vector<std::string>>();
      for (const json& rj : sj.value("regions", json::array())) {
        RegionAssignment ra;
        ra.layer = rj.at("layer").get<std::string>();
        ra.region = {rj.at("row0").get<int64_t>(), rj.at("col0").get<int64_t>(),
                     rj.at("rows").get<int64_t>(), rj.at("cols").get<int64_t>()};
        seg.regions.push_back(std::move(ra));
      }
      for (const json& fj : sj.value("forwards", json::array())) {
        ForwardEdge fw;
        fw.producer = fj.at("producer").get<std::string>();
        fw.consumer = fj.at("consumer").get<std::string>();
        auto g = granularity_from_name(fj.at("granularity").get<std::string>());
        if (!g) throw invalid(origin + ": unknown granularity");
        fw.granularity = *g;
        seg.forwards.push_back(std::move(fw));
      }
      ir.segments.push_back(std::move(seg));
    }
  } catch (const json::exception& e) {
    throw invalid(origin + ": " + e.what());
  }
  return ir;
}

ScheduleIR load_schedule_json(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw invalid("cannot open schedule file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return schedule_from_json(ss.str(), path);
}

}  // namespace kapla
