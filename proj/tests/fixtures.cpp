#include "fixtures.hpp"

#include <algorithm>
#include <set>

namespace kapla::testing {

LayerSpec wide_conv_layer() {
  LayerSpec l;
  l.name = "conv_a";
  l.kind = LayerKind::Conv;
  l.dims = {{Dim::N, 64}, {Dim::C, 16},  {Dim::K, 96},
            {Dim::Xi, 19}, {Dim::Yi, 19}, {Dim::Xo, 15},
            {Dim::Yo, 15}, {Dim::R, 5},   {Dim::S, 5}};
  return l;
}

LayerSpec depthwise_layer() {
  LayerSpec l;
  l.name = "conv_b";
  l.kind = LayerKind::DepthwiseConv;
  l.dims = {{Dim::N, 64}, {Dim::C, 96},  {Dim::Xi, 15}, {Dim::Yi, 15},
            {Dim::Xo, 7}, {Dim::Yo, 7},  {Dim::R, 3},   {Dim::S, 3}};
  l.sx = l.sy = 2;
  l.inputs = {"conv_a"};
  return l;
}

LayerSchedule wide_conv_schedule() {
  LayerSchedule s;
  s.layer = "conv_a";

  LevelSchedule regf;
  regf.level = "REGF";
  regf.tensors = {
      {"0", TensorRole::Input,
       {{Dim::N, 1}, {Dim::C, 2}, {Dim::Xi, 5}, {Dim::Yi, 1}}, 1},
      {"1", TensorRole::Weight,
       {{Dim::C, 2}, {Dim::K, 3}, {Dim::R, 5}, {Dim::S, 1}}, 1},
      {"2", TensorRole::Output,
       {{Dim::N, 1}, {Dim::K, 3}, {Dim::Xo, 1}, {Dim::Yo, 1}}, 1},
  };
  regf.stacks = {
      {{{Dim::Yi, 1}, {Dim::Yo, 1}}, 8},
      {{{Dim::S, 1}, {Dim::Yi, 1}}, 5},
  };
  regf.updates = {
      {{{Dim::Xi, 1}, {Dim::Xo, 1}}},
      {{{Dim::Yi, 8}, {Dim::Yo, 8}}},
      {{{Dim::N, 1}}},
      {{{Dim::C, 2}}},
      {{{Dim::K, 3}}},
  };

  LevelSchedule gbuf;
  gbuf.level = "GBUF";
  gbuf.tensors = {
      {"0", TensorRole::Input,
       {{Dim::N, 4}, {Dim::C, 4}, {Dim::Xi, 19}, {Dim::Yi, 19}}, 4},
      {"1", TensorRole::Weight,
       {{Dim::C, 4}, {Dim::K, 6}, {Dim::R, 5}, {Dim::S, 5}}, 1},
      {"2", TensorRole::Output,
       {{Dim::N, 4}, {Dim::K, 6}, {Dim::Xo, 15}, {Dim::Yo, 15}}, 1},
  };
  gbuf.stacks = {
      {{{Dim::K, 6}}, 4},
      {{{Dim::N, 4}}, 16},
  };
  gbuf.updates = {
      {{{Dim::C, 4}}},
      {{{Dim::K, 24}}},
      {{{Dim::N, 64}}},
  };

  s.levels = {regf, gbuf};
  return s;
}

LayerSchedule depthwise_schedule() {
  LayerSchedule s;
  s.layer = "conv_b";

  LevelSchedule gbuf;
  gbuf.level = "GBUF";
  gbuf.tensors = {
      {"2", TensorRole::Input,
       {{Dim::N, 4}, {Dim::C, 4}, {Dim::Xi, 9}, {Dim::Yi, 15}}, 1},
      {"3", TensorRole::Weight, {{Dim::C, 4}, {Dim::R, 3}, {Dim::S, 3}}, 1},
      {"4", TensorRole::Output,
       {{Dim::N, 4}, {Dim::C, 4}, {Dim::Xo, 4}, {Dim::Yo, 7}}, 1},
  };
  gbuf.stacks = {
      {{{Dim::C, 4}}, 6},
      {{{Dim::N, 4}}, 16},
      {{{Dim::Xo, 4}}, 2},
  };
  gbuf.updates = {
      {{{Dim::Yo, 7}}},
      {{{Dim::C, 24}}},
      {{{Dim::N, 64}}},
  };

  s.levels = {gbuf};
  return s;
}

HardwareSpec mesh_hw(int64_t regf_bytes, int64_t gbuf_bytes, int mesh, int pes) {
  HardwareSpec hw;
  hw.levels = {
      {"REGF", regf_bytes, pes, pes, 0.2, 4.0, false},
      {"GBUF", gbuf_bytes, mesh, mesh, 2.0, 16.0, true},
      {"DRAM", 0, 1, 1, 100.0, 25.6, false},
  };
  hw.mac_cost_pj = 1.0;
  hw.noc_hop_cost_pj = 0.3;
  hw.static_power_pj_per_cycle = 10.0;
  hw.bytes_per_element = 2;
  hw.pe_mapping = PeMapping::RowStationary;
  hw.temporal_layer_pipe = true;
  hw.spatial_layer_pipe = true;
  hw.freq_hz = 1e9;
  return hw;
}

namespace {

// Trip counts an update step can realize along one dim: stepping s covers a
// remaining distance of D in ceil(D/s) moves, plus the starting position.
std::set<int64_t> reachable_trips(int64_t dist) {
  std::set<int64_t> out;
  if (dist <= 0) {
    out.insert(1);
    return out;
  }
  for (int64_t s = 1; s <= dist; ++s) out.insert(ceil_div(dist, s) + 1);
  return out;
}

}  // namespace

LayerSchedule random_schedule(std::mt19937& rng, DimMap& full_dims) {
  auto ri = [&](int64_t lo, int64_t hi) {
    return std::uniform_int_distribution<int64_t>(lo, hi)(rng);
  };

  std::array<Dim, kNumDims> order = kAllDims;
  std::shuffle(order.begin(), order.end(), rng);
  const int ndims = static_cast<int>(ri(1, 6));
  std::vector<Dim> picked(order.begin(), order.begin() + ndims);

  full_dims = DimMap{};
  for (Dim d : picked) full_dims.set(d, ri(2, 12));

  const int nlevels = static_cast<int>(ri(1, 3));

  // Shared per-level tile sizes keep every tensor's extents and bounds
  // consistent, which the counters require of their inputs.
  std::vector<DimMap> tile(nlevels);
  for (int li = nlevels - 1; li >= 0; --li)
    for (Dim d : picked) {
      int64_t cap = li + 1 < nlevels ? tile[li + 1].get(d) : full_dims.get(d);
      tile[li].set(d, ri(1, cap));
    }

  const int ntensors = static_cast<int>(ri(1, 3));
  std::vector<std::vector<Dim>> tensor_dims(ntensors);
  for (auto& td : tensor_dims) {
    std::shuffle(picked.begin(), picked.end(), rng);
    td.assign(picked.begin(), picked.begin() + ri(1, ndims));
  }

  LayerSchedule sched;
  sched.layer = "rand";
  sched.levels.resize(nlevels);
  for (int li = 0; li < nlevels; ++li) {
    LevelSchedule& lv = sched.levels[li];
    lv.level = "L" + std::to_string(li);

    std::set<Dim> declared;
    for (int ti = 0; ti < ntensors; ++ti) {
      TensorDecl t;
      t.name = "t" + std::to_string(ti);
      t.role = ti == 0 ? TensorRole::Input
                       : ti == 1 ? TensorRole::Weight : TensorRole::Output;
      for (Dim d : tensor_dims[ti]) {
        t.sizes.set(d, tile[li].get(d));
        declared.insert(d);
      }
      lv.tensors.push_back(std::move(t));
    }
    std::vector<Dim> avail(declared.begin(), declared.end());

    const int nstacks = static_cast<int>(ri(0, 2));
    for (int si = 0; si < nstacks && !avail.empty(); ++si) {
      StackDirective st;
      st.repl = ri(1, 4);
      std::shuffle(avail.begin(), avail.end(), rng);
      int nsd = static_cast<int>(ri(1, std::min<int64_t>(2, avail.size())));
      for (int k = 0; k < nsd; ++k)
        st.shifts.set(avail[k], ri(1, tile[li].get(avail[k])));
      lv.stacks.push_back(std::move(st));
    }

    // Group dims into updates whose per-dim trip counts can agree, then pick
    // a step per dim realizing the group's trip count.
    std::shuffle(avail.begin(), avail.end(), rng);
    int nloop = static_cast<int>(ri(0, static_cast<int64_t>(avail.size())));
    std::vector<Dim> loop(avail.begin(), avail.begin() + nloop);
    size_t at = 0;
    while (at < loop.size()) {
      UpdateDirective u;
      size_t want = std::min(loop.size() - at, static_cast<size_t>(ri(1, 2)));
      std::set<int64_t> common;
      std::vector<std::pair<Dim, int64_t>> members;  // dim, remaining distance
      for (size_t k = 0; k < want; ++k) {
        Dim d = loop[at + k];
        int64_t ext = tile[li].get(d);
        for (const auto& st : lv.stacks)
          if (st.shifts.has(d)) ext += (st.repl - 1) * st.shifts.get(d);
        int64_t bound = li + 1 < nlevels ? tile[li + 1].get(d) : full_dims.get(d);
        int64_t dist = bound - ext;
        auto trips = reachable_trips(dist);
        if (members.empty()) {
          common = trips;
        } else {
          std::set<int64_t> merged;
          std::set_intersection(common.begin(), common.end(), trips.begin(),
                                trips.end(),
                                std::inserter(merged, merged.begin()));
          if (merged.empty()) break;  // close the group before this dim
          common = merged;
        }
        members.emplace_back(d, dist);
      }
      std::vector<int64_t> choices(common.begin(), common.end());
      int64_t target = choices[ri(0, static_cast<int64_t>(choices.size()) - 1)];
      for (auto [d, dist] : members) {
        if (dist <= 0 || target == 1) {
          u.steps.set(d, ri(1, std::max<int64_t>(1, dist > 0 ? dist : 4)));
          continue;
        }
        std::vector<int64_t> steps;
        for (int64_t s = 1; s <= dist; ++s)
          if (ceil_div(dist, s) + 1 == target) steps.push_back(s);
        u.steps.set(d, steps[ri(0, static_cast<int64_t>(steps.size()) - 1)]);
      }
      at += members.size();
      if (!u.steps.empty()) lv.updates.push_back(std::move(u));
    }

    for (auto& t : lv.tensors) {
      int64_t mult = 1;
      for (const auto& st : lv.stacks)
        if (!st.shifts.intersects(t.sizes)) mult *= st.repl;
      if (mult > 1 && ri(0, 3) == 0) {
        std::vector<int64_t> divs;
        for (int64_t f = 2; f <= mult; ++f)
          if (mult % f == 0) divs.push_back(f);
        t.shr = divs[ri(0, static_cast<int64_t>(divs.size()) - 1)];
      }
    }
  }
  return sched;
}

}  // namespace kapla::testing
