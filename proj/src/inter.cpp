#include "kapla/inter.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

namespace kapla {

namespace {

// Segment-internal edge, by position inside the scheme's layer list.
struct EdgeRef {
  int prod_pos;
  int cons_pos;
  Granularity granularity;
};

int position_of(const std::vector<int>& layers, int net_index) {
  for (size_t i = 0; i < layers.size(); ++i)
    if (layers[i] == net_index) return static_cast<int>(i);
  return -1;
}

std::vector<EdgeRef> resolve_edges(const NetworkDAG& net, const SegmentScheme& scheme) {
  std::vector<EdgeRef> edges;
  for (const auto& f : scheme.forwards) {
    const int p = position_of(scheme.layers, net.index_of(f.producer));
    const int c = position_of(scheme.layers, net.index_of(f.consumer));
    if (p >= 0 && c >= 0) edges.push_back({p, c, f.granularity});
  }
  return edges;
}

bool layer_has(const LayerSpec& layer, Dim d) {
  const auto dims = loop_dims(layer);
  return std::find(dims.begin(), dims.end(), d) != dims.end();
}

// Granule axes swept at the top level while everything else stays resident.
// Innermost first: rows inside one fmap, fmaps inside the batch.
std::vector<Dim> sweep_for(Granularity g) {
  switch (g) {
    case Granularity::Row: return {Dim::Yo, Dim::N};
    case Granularity::Fmap: return {Dim::N};
    case Granularity::Full: return {};
  }
  return {};
}

// Residence constraint for one layer: the intersection of what its internal
// edges allow. Layers off every internal edge stay unconstrained.
std::optional<std::vector<Dim>> sweep_of(const std::vector<EdgeRef>& edges, int pos) {
  bool touched = false;
  std::vector<Dim> sweep = sweep_for(Granularity::Row);
  for (const auto& e : edges) {
    if (e.prod_pos != pos && e.cons_pos != pos) continue;
    touched = true;
    const auto allow = sweep_for(e.granularity);
    std::vector<Dim> kept;
    for (Dim d : sweep)
      if (std::find(allow.begin(), allow.end(), d) != allow.end()) kept.push_back(d);
    sweep = std::move(kept);
  }
  if (!touched) return std::nullopt;
  return sweep;
}

// Extent of d one top-level sweep trip covers; the full size when d never
// wraps at the top.
int64_t top_coverage(const LayerSchedule& sched, const LayerSpec& layer, Dim d) {
  if (!sched.levels.empty())
    for (const auto& u : sched.levels.back().updates)
      if (u.steps.has(d)) return u.steps.get(d);
  return layer.dims.get_or1(d);
}

// Handoff units the producer emits over its whole run.
int64_t granule_count(const Priced& prod, const LayerSpec& layer, Granularity g) {
  int64_t n = 1;
  for (Dim d : sweep_for(g)) {
    if (!layer_has(layer, d)) continue;
    n *= ceil_div(layer.dims.get_or1(d), top_coverage(prod.sched, layer, d));
  }
  return n;
}

// Whole-tensor elements of one handoff granule under g.
int64_t granule_elems(const DimMap& tensor_dims, Granularity g) {
  int64_t elems = tensor_dims.product();
  for (Dim d : sweep_for(g))
    if (tensor_dims.has(d)) elems /= tensor_dims.get(d);
  return elems;
}

struct SolveCache {
  std::map<std::string, Priced> ok;
  std::set<std::string> failed;
};

std::string solve_key(int net_index, const IntraOptions& io) {
  std::string k = std::to_string(net_index) + '|' +
                  std::to_string(static_cast<int>(io.objective)) + '|' +
                  std::to_string(io.region.row0) + ',' +
                  std::to_string(io.region.col0) + ',' +
                  std::to_string(io.region.rows) + ',' +
                  std::to_string(io.region.cols) + '|';
  if (io.top_sweep)
    for (Dim d : *io.top_sweep) k += std::string(dim_name(d)) + ',';
  else
    k += '-';
  k += '|';
  for (const auto& [d, v] : io.pin_coverage)
    k += std::string(dim_name(d)) + '=' + std::to_string(v) + ',';
  return k;
}

std::optional<Priced> cached_solve(const NetworkDAG& net, const HardwareSpec& hw,
                                   int net_index, const IntraOptions& io,
                                   SolveCache* cache, std::string* err) {
  std::string key;
  if (cache) {
    key = solve_key(net_index, io);
    if (auto it = cache->ok.find(key); it != cache->ok.end()) return it->second;
    if (cache->failed.count(key)) return std::nullopt;
  }
  try {
    Priced got = solve_intra(net.layers[net_index], hw, io);
    if (cache) cache->ok.emplace(key, got);
    return got;
  } catch (const Error& e) {
    if (e.code != Error::Code::NoValidSchedule) throw;
    if (err) *err = e.what();
    if (cache) cache->failed.insert(key);
    return std::nullopt;
  }
}

// Shared tail of segment pricing: lockstep checks, shared residence when the
// mesh is time-shared, moving internal edges off DRAM, and the totals. The
// schedules may come from the solver or from a file being re-priced.
std::optional<SegmentCost> price_solved(const NetworkDAG& net,
                                        const HardwareSpec& hw,
                                        const SegmentScheme& scheme,
                                        std::vector<Priced> solved,
                                        std::string* err) {
  const size_t n = scheme.layers.size();
  const size_t top = hw.levels.size() - 2;
  const auto edges = resolve_edges(net, scheme);

  // Forwarded neighbors must advance in lockstep before any DRAM traffic may
  // be excised.
  for (const auto& e : edges) {
    if (e.granularity == Granularity::Full) continue;
    const std::string& shared = net.layers[scheme.layers[e.prod_pos]].name;
    const auto verdict = check_pipeline_match(solved[e.prod_pos].sched,
                                              solved[e.cons_pos].sched, shared);
    if (!verdict.ok) {
      if (err) *err = verdict.message;
      return std::nullopt;
    }
  }

  // Layers sharing the mesh by turns keep their working sets live at once.
  if (!scheme.overlapped && n > 1 && hw.levels[top].capacity_bytes > 0) {
    int64_t bytes = 0;
    for (const auto& p : solved)
      bytes += level_footprint_elems(p.sched.levels[top]) * hw.bytes_per_element;
    if (bytes > hw.levels[top].capacity_bytes) {
      if (err)
        *err = "combined " + hw.levels[top].name + " working sets need " +
               std::to_string(bytes) + "B";
      return std::nullopt;
    }
  }

  // Move the internal edges off DRAM: the consumer pulls straight from the
  // producer's top-level buffers, paying two same-level accesses per element
  // plus mesh hops between the two regions.
  const std::string& topname = hw.levels[top].name;
  const double c_top = hw.levels[top].access_cost_pj;
  auto top_row = [&](LayerCost& lc, const std::string& tensor,
                     TensorRole role) -> TensorTraffic* {
    for (auto& t : lc.traffic)
      if (t.level == topname && t.tensor == tensor && t.role == role) return &t;
    return nullptr;
  };
  auto top_boundary = [&](LayerCost& lc) -> BoundaryCost* {
    for (auto& b : lc.boundaries)
      if (b.level == topname) return &b;
    return nullptr;
  };

  const auto consumers = net.consumers();
  std::vector<LayerCost> adj;
  adj.reserve(n);
  for (const auto& p : solved) adj.push_back(p.cost);

  for (size_t pos = 0; pos < n; ++pos) {
    const int li = scheme.layers[pos];
    bool forwards_all = !consumers[li].empty();
    for (int c : consumers[li])
      forwards_all &= position_of(scheme.layers, c) >= 0;
    if (!forwards_all) continue;
    TensorTraffic* row =
        top_row(adj[pos], net.layers[li].name, TensorRole::Output);
    BoundaryCost* bc = top_boundary(adj[pos]);
    if (!row || !bc) continue;
    adj[pos].boundary_pj -= row->energy_pj;
    adj[pos].noc_pj -= row->noc_pj;
    adj[pos].writeback_pj = std::max(0.0, adj[pos].writeback_pj - row->energy_pj);
    bc->elems -= row->transfers;
    bc->energy_pj -= row->energy_pj;
    bc->cycles = static_cast<double>(bc->elems) / bc->port_elems_per_cycle;
    adj[pos].noc_cycles = std::max(
        0.0, adj[pos].noc_cycles - static_cast<double>(row->transfers) *
                                       adj[pos].dram_hops / adj[pos].nodes_used);
    row->transfers = 0;
    row->rotation = 0;
    row->energy_pj = 0.0;
    row->noc_pj = 0.0;
  }

  for (const auto& e : edges) {
    LayerCost& lc = adj[e.cons_pos];
    TensorTraffic* row =
        top_row(lc, net.layers[scheme.layers[e.prod_pos]].name, TensorRole::Input);
    BoundaryCost* bc = top_boundary(lc);
    if (!row || !bc) continue;
    const double hops =
        hops_between(scheme.regions[e.prod_pos], scheme.regions[e.cons_pos]);
    const double move_pj =
        static_cast<double>(row->transfers + row->rotation) * 2.0 * c_top;
    const double move_noc = (static_cast<double>(row->transfers) * hops +
                             static_cast<double>(row->rotation)) *
                            hw.noc_hop_cost_pj;
    lc.boundary_pj += move_pj - row->energy_pj;
    lc.noc_pj += move_noc - row->noc_pj;
    bc->elems -= row->transfers;
    bc->energy_pj += move_pj - row->energy_pj;
    bc->cycles = static_cast<double>(bc->elems) / bc->port_elems_per_cycle;
    lc.noc_cycles =
        std::max(0.0, lc.noc_cycles + static_cast<double>(row->transfers) *
                                          (hops - lc.dram_hops) / lc.nodes_used);
    row->energy_pj = move_pj;
    row->noc_pj = move_noc;
  }

  SegmentCost out;
  out.scheme = scheme;
  for (size_t pos = 0; pos < n; ++pos) {
    LayerCost& lc = adj[pos];
    lc.energy_pj = lc.mac_pj + lc.boundary_pj + lc.noc_pj;
    lc.latency_cycles = std::max(lc.mac_cycles, lc.noc_cycles);
    for (const auto& b : lc.boundaries)
      lc.latency_cycles = std::max(lc.latency_cycles, b.cycles);
    out.energy_pj += lc.energy_pj;
    out.layers.push_back({solved[pos].sched, std::move(lc)});
  }

  if (!scheme.overlapped) {
    for (const auto& p : out.layers) out.makespan_cycles += p.cost.latency_cycles;
  } else {
    // Overlapped stages start once their first granule lands; the slowest
    // finish bounds the run.
    std::vector<double> start(n, 0.0);
    for (const auto& e : edges) {
      const LayerSpec& prod = net.layers[scheme.layers[e.prod_pos]];
      const int64_t g =
          granule_count(out.layers[e.prod_pos], prod, e.granularity);
      const double fill =
          out.layers[e.prod_pos].cost.latency_cycles / static_cast<double>(g);
      start[e.cons_pos] = std::max(start[e.cons_pos], start[e.prod_pos] + fill);
    }
    for (size_t pos = 0; pos < n; ++pos)
      out.makespan_cycles =
          std::max(out.makespan_cycles, start[pos] + out.layers[pos].cost.latency_cycles);
  }
  return out;
}

std::optional<SegmentCost> price_segment_impl(const NetworkDAG& net,
                                              const HardwareSpec& hw,
                                              const SegmentScheme& scheme,
                                              Objective obj, SolveCache* cache,
                                              std::string* err) {
  const size_t n = scheme.layers.size();
  if (n == 0 || scheme.regions.size() != n) return std::nullopt;
  const auto edges = resolve_edges(net, scheme);

  // Solve in topological order so each consumer can pin its group sizes to
  // what its producers actually settled on.
  std::vector<Priced> solved;
  solved.reserve(n);
  for (size_t pos = 0; pos < n; ++pos) {
    const LayerSpec& layer = net.layers[scheme.layers[pos]];
    IntraOptions io;
    io.objective = obj;
    io.region = scheme.regions[pos];
    io.top_sweep = sweep_of(edges, static_cast<int>(pos));
    for (const auto& e : edges) {
      if (e.cons_pos != static_cast<int>(pos) || e.granularity == Granularity::Full)
        continue;
      const LayerSpec& prod = net.layers[scheme.layers[e.prod_pos]];
      const Priced& ps = solved[e.prod_pos];
      for (Dim d : sweep_for(e.granularity)) {
        if (!layer_has(layer, d) || !layer_has(prod, d)) continue;
        const int64_t v = top_coverage(ps.sched, prod, d);
        bool clash = false;
        for (auto& p : io.pin_coverage)
          if (p.first == d) {
            clash = p.second != v;
            break;
          }
        if (clash) return std::nullopt;
        bool have = false;
        for (auto& p : io.pin_coverage) have |= p.first == d;
        if (!have) io.pin_coverage.push_back({d, v});
      }
    }
    auto got = cached_solve(net, hw, scheme.layers[pos], io, cache, err);
    if (!got) return std::nullopt;
    solved.push_back(std::move(*got));
  }
  return price_solved(net, hw, scheme, std::move(solved), err);
}

}  // namespace

std::vector<std::vector<Region>> region_splits(const Region& whole,
                                               const std::vector<double>& weights) {
  if (weights.empty()) return {};
  if (weights.size() == 1) return {{whole}};
  double total = 0.0;
  for (double w : weights) total += w;
  const double share = total > 0.0 ? weights[0] / total : 0.0;
  const std::vector<double> rest_w(weights.begin() + 1, weights.end());

  std::vector<std::vector<Region>> out;
  for (bool by_rows : {true, false}) {
    const int64_t span = by_rows ? whole.rows : whole.cols;
    if (span < 2) continue;
    int64_t cut = std::llround(share * static_cast<double>(span));
    cut = std::clamp<int64_t>(cut, 1, span - 1);
    Region first = whole, rest = whole;
    if (by_rows) {
      first.rows = cut;
      rest.row0 += cut;
      rest.rows -= cut;
    } else {
      first.cols = cut;
      rest.col0 += cut;
      rest.cols -= cut;
    }
    for (auto& tail : region_splits(rest, rest_w)) {
      std::vector<Region> split{first};
      split.insert(split.end(), tail.begin(), tail.end());
      if (std::find(out.begin(), out.end(), split) == out.end())
        out.push_back(std::move(split));
    }
  }

  // Drop splits where any share drifts past twice (or under half) its
  // proportional area; a stage that starved would throttle the whole group.
  std::vector<std::vector<Region>> kept;
  for (auto& split : out) {
    bool ok = true;
    for (size_t i = 0; i < split.size() && ok; ++i) {
      const double want =
          total > 0.0 ? weights[i] / total * static_cast<double>(whole.nodes()) : 0.0;
      const double got = static_cast<double>(split[i].nodes());
      ok = got >= want * 0.5 && got <= want * 2.0;
    }
    if (ok) kept.push_back(std::move(split));
  }
  return kept;
}

bool conservative_prune(const NetworkDAG& net, const HardwareSpec& hw,
                        const SegmentScheme& scheme) {
  const size_t top = hw.levels.size() - 2;

  // The smallest mapping of each layer must fit; larger tilings, pins and
  // residence only ever grow the footprints. Two plan families bound the
  // space from below: the solver seed (row-stationary when it applies, with
  // its spatial spread) and the bare unit plan with whole filter windows
  // that brute-force enumeration starts from. Discard only when neither
  // smallest member fits.
  const size_t nlev = hw.levels.size() - 1;
  for (int li : scheme.layers) {
    const LayerSpec& layer = net.layers[li];
    const auto order = gen_loop_orders(layer).front();
    SchedulePlan seed = seed_plan(layer, hw);
    seed.order.assign(nlev, order);
    if (check_capacity(materialize_plan(seed, layer, hw), hw).ok) continue;
    SchedulePlan unit;
    unit.dims = loop_dims(layer);
    unit.tiles.assign(unit.dims.size(),
                      TilePlan{1, std::vector<int64_t>(nlev, 1),
                               std::vector<int64_t>(nlev, 1)});
    unit.window_r = layer.dims.get_or1(Dim::R);
    unit.window_s = layer.dims.get_or1(Dim::S);
    unit.order.assign(nlev, order);
    if (!check_capacity(materialize_plan(unit, layer, hw), hw).ok) return true;
  }

  // Forwarding keeps at least one granule of each internal tensor resident
  // on both sides; together those floors may already exceed the buffers.
  if (scheme.layers.size() > 1 && hw.levels[top].capacity_bytes > 0) {
    const auto edges = resolve_edges(net, scheme);
    std::vector<int64_t> demand(scheme.layers.size(), 0);
    for (const auto& e : edges) {
      const LayerSpec& prod = net.layers[scheme.layers[e.prod_pos]];
      const auto shapes = layer_tensors(prod);
      const int64_t bytes =
          granule_elems(shapes.back().dims, e.granularity) * hw.bytes_per_element;
      demand[e.prod_pos] += bytes;
      demand[e.cons_pos] += bytes;
    }
    if (scheme.overlapped) {
      for (size_t pos = 0; pos < scheme.layers.size(); ++pos)
        if (demand[pos] >
            scheme.regions[pos].nodes() * hw.levels[top].capacity_bytes)
          return true;
    } else {
      int64_t need = 0;
      for (int64_t d : demand) need += d;
      if (need > hw.nodes() * hw.levels[top].capacity_bytes) return true;
    }
  }
  return false;
}

double estimate_lower_bound(const NetworkDAG& net, const HardwareSpec& hw,
                            const SegmentScheme& scheme, Objective obj) {
  const size_t top = hw.levels.size() - 2;
  const double unit =
      hw.levels[top].access_cost_pj + hw.levels.back().access_cost_pj;
  const double dram_port = hw.levels.back().bandwidth_elems_per_cycle;
  const auto edges = resolve_edges(net, scheme);
  const auto consumers = net.consumers();

  double energy = 0.0;
  double span = 0.0;
  for (size_t pos = 0; pos < scheme.layers.size(); ++pos) {
    const int li = scheme.layers[pos];
    const LayerSpec& layer = net.layers[li];
    const double mac_pj = static_cast<double>(mac_count(layer)) * hw.mac_cost_pj;
    energy += mac_pj;

    // External tensors cross DRAM at least once per distinct element;
    // internal ones move between buffers at least once per element.
    int64_t ext = 0;
    const auto shapes = layer_tensors(layer);
    size_t slot = 0;
    for (const auto& sh : shapes) {
      if (sh.role == TensorRole::Input) {
        const size_t s = slot++;
        bool internal = false;
        for (const auto& e : edges)
          internal |= e.cons_pos == static_cast<int>(pos) &&
                      s < layer.inputs.size() &&
                      net.layers[scheme.layers[e.prod_pos]].name == layer.inputs[s];
        if (internal)
          energy += static_cast<double>(sh.dims.product()) * 2.0 *
                    hw.levels[top].access_cost_pj;
        else
          ext += sh.dims.product();
      } else if (sh.role == TensorRole::Weight) {
        ext += sh.dims.product();
      } else {
        bool forwards_all = !consumers[li].empty();
        for (int c : consumers[li])
          forwards_all &= position_of(scheme.layers, c) >= 0;
        if (!forwards_all) ext += sh.dims.product();
      }
    }
    energy += static_cast<double>(ext) * unit;

    const double pes = static_cast<double>(scheme.regions[pos].nodes() *
                                           hw.pes_per_node());
    const double cycles =
        std::max(static_cast<double>(mac_count(layer)) / std::max(pes, 1.0),
                 static_cast<double>(ext) / dram_port);
    span = scheme.overlapped ? std::max(span, cycles) : span + cycles;
  }
  return obj == Objective::Energy ? energy : span;
}

std::optional<SegmentCost> price_segment(const NetworkDAG& net, const HardwareSpec& hw,
                                         const SegmentScheme& scheme, Objective obj) {
  return price_segment_impl(net, hw, scheme, obj, nullptr, nullptr);
}

std::optional<SegmentCost> price_segment_schedules(
    const NetworkDAG& net, const HardwareSpec& hw, const SegmentScheme& scheme,
    const std::vector<LayerSchedule>& schedules, std::string* why) {
  const size_t n = scheme.layers.size();
  if (n == 0 || scheme.regions.size() != n || schedules.size() != n) {
    if (why) *why = "scheme lists " + std::to_string(n) + " layers but " +
                    std::to_string(schedules.size()) + " schedules were given";
    return std::nullopt;
  }
  std::vector<Priced> solved;
  solved.reserve(n);
  for (size_t pos = 0; pos < n; ++pos) {
    const LayerSpec& layer = net.layers[scheme.layers[pos]];
    validate_layer_schedule(schedules[pos], layer.dims);
    const std::string fail = runnability_failure(schedules[pos], hw);
    if (!fail.empty()) {
      if (why) *why = "layer '" + layer.name + "': " + fail;
      return std::nullopt;
    }
    solved.push_back(
        {schedules[pos], price_layer(layer, schedules[pos], hw, scheme.regions[pos])});
  }
  return price_solved(net, hw, scheme, std::move(solved), why);
}

std::vector<SegmentCost> pareto_front(std::vector<SegmentCost> options) {
  std::vector<SegmentCost> kept;
  for (size_t i = 0; i < options.size(); ++i) {
    bool dominated = false;
    for (size_t j = 0; j < options.size() && !dominated; ++j) {
      if (j == i) continue;
      const bool no_worse = options[j].energy_pj <= options[i].energy_pj &&
                            options[j].makespan_cycles <= options[i].makespan_cycles;
      const bool better = options[j].energy_pj < options[i].energy_pj ||
                          options[j].makespan_cycles < options[i].makespan_cycles;
      dominated = no_worse && (better || j < i);
    }
    if (!dominated) kept.push_back(std::move(options[i]));
  }
  return kept;
}

namespace {

// Contiguous ranges must be weakly connected and shaped as a chain or a
// single fork-join before they can pipeline.
bool range_shape_ok(const std::vector<EdgeRef>& edges, size_t n) {
  if (n <= 1) return true;
  if (edges.empty()) return false;
  std::vector<int> indeg(n, 0), outdeg(n, 0);
  std::vector<std::vector<int>> adj(n);
  for (const auto& e : edges) {
    ++outdeg[e.prod_pos];
    ++indeg[e.cons_pos];
    adj[e.prod_pos].push_back(e.cons_pos);
    adj[e.cons_pos].push_back(e.prod_pos);
  }
  std::vector<char> seen(n, 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  size_t visited = 1;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    for (int w : adj[v])
      if (!seen[w]) {
        seen[w] = 1;
        ++visited;
        stack.push_back(w);
      }
  }
  if (visited != n) return false;
  int forks = 0, joins = 0;
  for (size_t i = 0; i < n; ++i) {
    forks += outdeg[i] > 1;
    joins += indeg[i] > 1;
  }
  return forks <= 1 && joins <= 1;
}

std::vector<EdgeRef> range_edges(const NetworkDAG& net, const std::vector<int>& layers) {
  std::vector<EdgeRef> edges;
  for (size_t pos = 0; pos < layers.size(); ++pos) {
    const LayerSpec& l = net.layers[layers[pos]];
    for (const auto& in : l.inputs) {
      const int p = position_of(layers, net.index_of(in));
      if (p >= 0) edges.push_back({p, static_cast<int>(pos), Granularity::Full});
    }
  }
  return edges;
}

std::vector<Granularity> granularity_options(const NetworkDAG& net,
                                             const std::vector<int>& layers,
                                             const std::vector<EdgeRef>& edges) {
  std::vector<Granularity> gs = {Granularity::Full, Granularity::Fmap};
  bool row_ok = !edges.empty();
  for (const auto& e : edges) {
    const LayerSpec& p = net.layers[layers[e.prod_pos]];
    const LayerSpec& c = net.layers[layers[e.cons_pos]];
    row_ok &= c.sx == 1 && c.sy == 1 && layer_has(p, Dim::Yo) && layer_has(c, Dim::Yo);
  }
  if (row_ok) gs.push_back(Granularity::Row);
  return gs;
}

double state_metric(const SegmentCost& sc, const HardwareSpec& hw, Objective obj) {
  if (obj == Objective::Latency) return sc.makespan_cycles;
  return sc.energy_pj + hw.static_power_pj_per_cycle * sc.makespan_cycles;
}

}  // namespace

std::vector<SegmentScheme> enumerate_segment_schemes(const NetworkDAG& net,
                                                     const HardwareSpec& hw,
                                                     int first, int len) {
  const int L = static_cast<int>(net.layers.size());
  if (len < 1 || first < 0 || first + len > L) return {};
  const Region mesh{0, 0, hw.mesh_rows(), hw.mesh_cols()};
  std::vector<int> layers(len);
  for (int i = 0; i < len; ++i) layers[i] = first + i;
  if (len == 1) return {{layers, {mesh}, {}, false}};

  if (!hw.temporal_layer_pipe && !hw.spatial_layer_pipe) return {};
  const auto edges = range_edges(net, layers);
  if (!range_shape_ok(edges, layers.size())) return {};

  std::vector<SegmentScheme> schemes;
  for (Granularity g : granularity_options(net, layers, edges)) {
    std::vector<ForwardEdge> fwd;
    for (const auto& e : edges)
      fwd.push_back({net.layers[layers[e.prod_pos]].name,
                     net.layers[layers[e.cons_pos]].name, g});
    if (hw.temporal_layer_pipe)
      schemes.push_back(
          {layers, std::vector<Region>(layers.size(), mesh), fwd, false});
    if (hw.spatial_layer_pipe) {
      std::vector<double> macs;
      for (int li : layers)
        macs.push_back(static_cast<double>(mac_count(net.layers[li])));
      auto splits = region_splits(mesh, macs);
      if (splits.size() > 3) splits.resize(3);
      for (auto& split : splits)
        schemes.push_back({layers, std::move(split), fwd, true});
    }
  }
  return schemes;
}

NetworkSolution solve_network(const NetworkDAG& net, const HardwareSpec& hw,
                              const InterOptions& opt) {
  validate_network(net);
  const int L = static_cast<int>(net.layers.size());
  SolveCache cache;
  std::string last_err = "no layers";

  // All priced schemes per starting layer; within one layer range the
  // Pareto front keeps the list short without ever dropping the
  // objective-best option. Options covering different ranges never compete
  // here, only in the prefix search below.
  std::vector<std::vector<SegmentCost>> options(L);
  for (int t = 0; t < L; ++t) {
    for (int len = 1; len <= std::min(opt.max_segment_layers, L - t); ++len) {
      std::vector<SegmentCost> priced;
      const auto schemes = enumerate_segment_schemes(net, hw, t, len);

      double best_here = 0.0;
      bool have_best = false;
      for (const auto& scheme : schemes) {
        if (conservative_prune(net, hw, scheme)) continue;
        if (have_best &&
            estimate_lower_bound(net, hw, scheme, opt.objective) >= best_here)
          continue;
        auto sc =
            price_segment_impl(net, hw, scheme, opt.objective, &cache, &last_err);
        if (!sc) continue;
        const double m = state_metric(*sc, hw, opt.objective);
        if (!have_best || m < best_here) {
          best_here = m;
          have_best = true;
        }
        priced.push_back(std::move(*sc));
      }
      for (auto& sc : pareto_front(std::move(priced)))
        options[t].push_back(std::move(sc));
    }
  }

  // Prefix beam: the best top_k partial plans covering layers [0, t).
  struct State {
    double metric = 0.0;
    std::vector<const SegmentCost*> segs;
  };
  std::vector<std::vector<State>> states(L + 1);
  states[0].push_back({});
  for (int t = 0; t < L; ++t) {
    if (states[t].empty()) continue;
    std::stable_sort(states[t].begin(), states[t].end(),
                     [](const State& a, const State& b) { return a.metric < b.metric; });
    if (static_cast<int>(states[t].size()) > std::max(1, opt.top_k))
      states[t].resize(std::max(1, opt.top_k));
    for (const State& st : states[t])
      for (const SegmentCost& sc : options[t]) {
        State next = st;
        next.metric += state_metric(sc, hw, opt.objective);
        next.segs.push_back(&sc);
        states[t + static_cast<int>(sc.scheme.layers.size())].push_back(std::move(next));
      }
  }
  if (states[L].empty())
    throw Error(Error::Code::NoValidSchedule,
                "network '" + net.name + "': " + last_err);
  const State* best = &states[L].front();
  for (const State& st : states[L])
    if (st.metric < best->metric) best = &st;

  return assemble_solution(net, hw, best->segs);
}

NetworkSolution assemble_solution(const NetworkDAG& net, const HardwareSpec& hw,
                                  const std::vector<const SegmentCost*>& segments) {
  NetworkSolution sol;
  for (const SegmentCost* seg : segments) {
    sol.segments.push_back(*seg);
    for (const auto& p : seg->layers) sol.ir.layers.push_back(p.sched);
    sol.energy_pj += seg->energy_pj;
    sol.makespan_cycles += seg->makespan_cycles;
    if (seg->scheme.layers.size() > 1) {
      SegmentAnnotation ann;
      for (size_t pos = 0; pos < seg->scheme.layers.size(); ++pos) {
        const std::string& name = net.layers[seg->scheme.layers[pos]].name;
        ann.layers.push_back(name);
        ann.regions.push_back({name, seg->scheme.regions[pos]});
      }
      ann.forwards = seg->scheme.forwards;
      sol.ir.segments.push_back(std::move(ann));
    }
  }
  sol.static_pj = hw.static_power_pj_per_cycle * sol.makespan_cycles;
  sol.energy_pj += sol.static_pj;
  return sol;
}

}  // namespace kapla
