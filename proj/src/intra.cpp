#include "kapla/intra.hpp"

#include <algorithm>
#include <string>

namespace kapla {

namespace {

bool spatial_kind(const LayerSpec& l) { return l.kind != LayerKind::FC; }

int64_t spf(int64_t v) {
  for (int64_t p = 2; p * p <= v; ++p)
    if (v % p == 0) return p;
  return v;
}

size_t tile_index(const SchedulePlan& plan, Dim d) {
  for (size_t i = 0; i < plan.dims.size(); ++i)
    if (plan.dims[i] == d) return i;
  return plan.dims.size();
}

int64_t coverage(const SchedulePlan& plan, size_t i) {
  const TilePlan& t = plan.tiles[i];
  int64_t c = t.unit;
  for (size_t l = 0; l < t.cache.size(); ++l) c *= t.cache[l] * t.stack[l];
  return c;
}

}  // namespace

int64_t remaining_trips(const SchedulePlan& plan, const LayerSpec& layer, Dim d) {
  size_t i = tile_index(plan, d);
  if (i == plan.dims.size()) return 1;
  return ceil_div(layer.dims.get_or1(d), coverage(plan, i));
}

int64_t plan_parallelism(const SchedulePlan& plan, size_t level) {
  int64_t par = level == 0 ? plan.srow_repl : 1;
  for (const auto& t : plan.tiles) par *= t.stack[level];
  return par;
}

std::vector<std::string> tensor_names(const LayerSpec& layer) {
  // Tensors carry the name of the data: inputs after their producer layers,
  // the output after this layer, so a shared fmap keeps one name everywhere.
  std::vector<std::string> names;
  size_t edge = 0;
  for (const auto& sh : layer_tensors(layer)) {
    if (sh.role == TensorRole::Input) {
      std::string base =
          edge < layer.inputs.size() ? layer.inputs[edge] : std::string("input");
      ++edge;
      std::string n = base;
      for (int k = 2; std::find(names.begin(), names.end(), n) != names.end(); ++k)
        n = base + "#" + std::to_string(k);
      names.push_back(std::move(n));
    } else if (sh.role == TensorRole::Weight) {
      names.push_back(layer.name + ".w");
    } else {
      names.push_back(layer.name);
    }
  }
  return names;
}

SchedulePlan seed_plan(const LayerSpec& layer, const HardwareSpec& hw) {
  const size_t nlev = hw.levels.size() - 1;
  SchedulePlan p;
  p.dims = loop_dims(layer);
  p.tiles.assign(p.dims.size(), TilePlan{1, std::vector<int64_t>(nlev, 1),
                                         std::vector<int64_t>(nlev, 1)});
  p.window_r = layer.dims.get_or1(Dim::R);
  p.window_s = layer.dims.get_or1(Dim::S);

  const MemLevelSpec& pe = hw.levels.front();
  PeMapping mapping = hw.pe_mapping;
  if (mapping == PeMapping::RowStationary &&
      (!spatial_kind(layer) || layer.dims.get_or1(Dim::S) > pe.array_rows))
    mapping = PeMapping::Systolic;  // filter rows do not fit the PE rows

  if (mapping == PeMapping::RowStationary) {
    // One filter row per PE row, sliding over one input row; output columns
    // spread across PE columns and fold if the fmap is taller than the array.
    p.window_s = 1;
    p.srow_repl = layer.dims.get_or1(Dim::S);
    p.tiles[tile_index(p, Dim::Yo)].stack[0] =
        std::min<int64_t>(pe.array_cols, layer.dims.get_or1(Dim::Yo));
  } else if (mapping == PeMapping::Systolic) {
    // Stationary weight blocks: input channels down the rows, output
    // channels across the columns, whole filter windows per PE.
    if (layer.dims.has(Dim::K)) {
      p.tiles[tile_index(p, Dim::C)].stack[0] =
          std::min<int64_t>(pe.array_rows, layer.dims.get_or1(Dim::C));
      p.tiles[tile_index(p, Dim::K)].stack[0] =
          std::min<int64_t>(pe.array_cols, layer.dims.get(Dim::K));
    } else {
      p.tiles[tile_index(p, Dim::C)].stack[0] =
          std::min<int64_t>(pe.array_size(), layer.dims.get_or1(Dim::C));
    }
  }
  return p;
}

std::vector<std::vector<Dim>> gen_loop_orders(const LayerSpec& layer) {
  std::vector<Dim> fmap;
  if (spatial_kind(layer)) fmap = {Dim::Xo, Dim::Yo};
  std::vector<Dim> rest = {Dim::N, Dim::C};
  if (layer.dims.has(Dim::K)) rest.push_back(Dim::K);
  std::vector<std::vector<Dim>> out;
  do {
    std::vector<Dim> o = fmap;
    o.insert(o.end(), rest.begin(), rest.end());
    out.push_back(std::move(o));
  } while (std::next_permutation(rest.begin(), rest.end()));
  return out;
}

LayerSchedule materialize_plan(const SchedulePlan& plan, const LayerSpec& layer,
                               const HardwareSpec& hw) {
  const size_t nlev = hw.levels.size() - 1;
  const size_t nd = plan.dims.size();
  const int64_t full_r = layer.dims.get_or1(Dim::R);
  const int64_t full_s = layer.dims.get_or1(Dim::S);

  // Per-buffer sizes, covered group extents and update trips per level.
  std::vector<std::vector<int64_t>> buf(nlev, std::vector<int64_t>(nd, 1));
  std::vector<std::vector<int64_t>> grp(nlev, std::vector<int64_t>(nd, 1));
  std::vector<std::vector<int64_t>> trips(nlev, std::vector<int64_t>(nd, 1));
  for (size_t i = 0; i < nd; ++i) {
    const int64_t full = layer.dims.get_or1(plan.dims[i]);
    int64_t u = plan.tiles[i].unit;
    for (size_t l = 0; l < nlev; ++l) {
      u *= plan.tiles[i].cache[l];
      buf[l][i] = std::min(u, full);
      u *= plan.tiles[i].stack[l];
      grp[l][i] = std::min(u, full);
      if (l > 0) trips[l - 1][i] = plan.tiles[i].cache[l];
    }
    trips[nlev - 1][i] = ceil_div(full, u);
  }
  auto buf_at = [&](size_t l, Dim d) {
    size_t i = tile_index(plan, d);
    return i < nd ? buf[l][i] : int64_t{1};
  };

  auto shapes = layer_tensors(layer);
  auto names = tensor_names(layer);

  LayerSchedule out;
  out.layer = layer.name;
  for (size_t l = 0; l < nlev; ++l) {
    LevelSchedule lv;
    lv.level = hw.levels[l].name;
    const int64_t wr = l == 0 ? plan.window_r : full_r;
    const int64_t ws = l == 0 ? plan.window_s : full_s;

    for (size_t ti = 0; ti < shapes.size(); ++ti) {
      TensorDecl t;
      t.name = names[ti];
      t.role = shapes[ti].role;
      shapes[ti].dims.for_each([&](Dim d, int64_t) {
        int64_t v;
        switch (d) {
          case Dim::Xi: v = (buf_at(l, Dim::Xo) - 1) * layer.sx + wr; break;
          case Dim::Yi: v = (buf_at(l, Dim::Yo) - 1) * layer.sy + ws; break;
          case Dim::R: v = wr; break;
          case Dim::S: v = ws; break;
          default: v = buf_at(l, d); break;
        }
        t.sizes.set(d, v);
      });
      lv.tensors.push_back(std::move(t));
    }

    for (size_t i = 0; i < nd; ++i) {
      const int64_t r = plan.tiles[i].stack[l];
      if (r <= 1) continue;
      StackDirective st;
      st.repl = r;
      const Dim d = plan.dims[i];
      st.shifts.set(d, buf[l][i]);
      if (d == Dim::Xo) st.shifts.set(Dim::Xi, buf[l][i] * layer.sx);
      if (d == Dim::Yo) st.shifts.set(Dim::Yi, buf[l][i] * layer.sy);
      lv.stacks.push_back(std::move(st));
    }
    if (l == 0 && plan.srow_repl > 1) {
      StackDirective st;
      st.repl = plan.srow_repl;
      st.shifts.set(Dim::Yi, 1);
      for (const auto& sh : shapes)
        if (sh.role == TensorRole::Weight) {
          st.shifts.set(Dim::S, 1);
          break;
        }
      lv.stacks.push_back(std::move(st));
    }

    for (Dim d : plan.order[l]) {
      const size_t i = tile_index(plan, d);
      if (i >= nd) continue;
      if (trips[l][i] <= 1 || grp[l][i] >= layer.dims.get_or1(d)) continue;
      UpdateDirective u;
      u.steps.set(d, grp[l][i]);
      if (d == Dim::Xo) u.steps.set(Dim::Xi, grp[l][i] * layer.sx);
      if (d == Dim::Yo) u.steps.set(Dim::Yi, grp[l][i] * layer.sy);
      lv.updates.push_back(std::move(u));
    }
    out.levels.push_back(std::move(lv));
  }
  return out;
}

Priced evaluate_plan(const SchedulePlan& plan, const LayerSpec& layer,
                     const HardwareSpec& hw, const Region& region, Objective obj) {
  Priced out;
  out.sched = materialize_plan(plan, layer, hw);
  out.cost = price_layer(layer, out.sched, hw, region);
  // Replicated input/weight tiles can instead rotate shards between the
  // sibling buffers; keep whichever prices better, tensor by tensor.
  for (size_t l = out.sched.levels.size(); l-- > 0;) {
    if (!hw.levels[l].same_level_transfer) continue;
    LevelSchedule& lv = out.sched.levels[l];
    for (auto& t : lv.tensors) {
      if (t.role == TensorRole::Output) continue;
      const int64_t mult = replication_mult(lv, t);
      if (mult <= 1 || t.shr == mult) continue;
      const int64_t prev = t.shr;
      t.shr = mult;
      LayerCost c = price_layer(layer, out.sched, hw, region);
      if (objective_metric(c, obj) < objective_metric(out.cost, obj))
        out.cost = std::move(c);
      else
        t.shr = prev;
    }
  }
  return out;
}

Priced solve_intra(const LayerSpec& layer, const HardwareSpec& hw,
                   const IntraOptions& opt) {
  const size_t nlev = hw.levels.size() - 1;
  const Region region = opt.region.rows > 0 && opt.region.cols > 0
                            ? opt.region
                            : Region{0, 0, hw.mesh_rows(), hw.mesh_cols()};

  const auto orders = gen_loop_orders(layer);
  SchedulePlan seed = seed_plan(layer, hw);
  seed.order.assign(nlev, orders.front());

  // Lockstep pins: force the exact requested coverage into the top-level
  // tile before the greedy passes run. The seed's spatial spread must divide
  // the pin, otherwise this layer cannot advance in step with its neighbor.
  for (const auto& [d, v] : opt.pin_coverage) {
    const size_t i = tile_index(seed, d);
    if (i == seed.dims.size()) continue;
    const int64_t cov = coverage(seed, i);
    if (v <= 0 || v % cov != 0)
      throw Error(Error::Code::NoValidSchedule,
                  "layer '" + layer.name + "': cannot pin " +
                      std::string(dim_name(d)) + " coverage to " +
                      std::to_string(v));
    seed.tiles[i].cache[nlev - 1] *= v / cov;
  }
  auto pinned = [&](Dim d) {
    for (const auto& p : opt.pin_coverage)
      if (p.first == d) return true;
    return false;
  };

  {
    LayerSchedule s = materialize_plan(seed, layer, hw);
    CapacityVerdict v = check_capacity(s, hw);
    if (!v.ok)
      throw Error(Error::Code::NoValidSchedule,
                  "layer '" + layer.name +
                      "': seed mapping does not fit: " + v.first_failure);
  }

  auto try_candidate = [&](const SchedulePlan& cand) -> std::optional<Priced> {
    LayerSchedule s = materialize_plan(cand, layer, hw);
    if (!check_capacity(s, hw).ok) return std::nullopt;
    return evaluate_plan(cand, layer, hw, region, opt.objective);
  };

  // Order combinations per level, odometer with the innermost level spinning
  // fastest; deep hierarchies are capped rather than searched exhaustively.
  size_t combos = 1;
  for (size_t l = 0; l < nlev; ++l) {
    combos *= orders.size();
    if (combos >= 216) {
      combos = 216;
      break;
    }
  }

  std::optional<Priced> best;
  double best_metric = 0.0;
  std::string last_failure;

  // Spatial pass: spread loop trips over idle buffers, smallest prime factor
  // at a time, as long as the objective does not degrade.
  auto stack_pass = [&](SchedulePlan& plan, Priced& cur, double& cur_m,
                        size_t l) {
    for (;;) {
      const int64_t par = plan_parallelism(plan, l);
      int64_t limit = hw.levels[l].array_size();
      if (l + 1 == nlev) limit = std::min(limit, region.nodes());
      std::optional<Priced> pick;
      double pick_m = 0.0;
      size_t pick_i = 0;
      int64_t pick_f = 1;
      for (size_t i = 0; i < plan.dims.size(); ++i) {
        if (pinned(plan.dims[i])) continue;
        const int64_t rem = remaining_trips(plan, layer, plan.dims[i]);
        if (rem <= 1) continue;
        const int64_t f = spf(rem);
        if (par * f > limit) continue;
        SchedulePlan cand = plan;
        cand.tiles[i].stack[l] *= f;
        auto pc = try_candidate(cand);
        if (!pc) continue;
        const double m = objective_metric(pc->cost, opt.objective);
        if (!pick || m < pick_m) {
          pick = std::move(pc);
          pick_m = m;
          pick_i = i;
          pick_f = f;
        }
      }
      if (!pick || pick_m > cur_m) break;
      plan.tiles[pick_i].stack[l] *= pick_f;
      cur = std::move(*pick);
      cur_m = pick_m;
    }
  };

  // Cache pass: grow resident tiles while it strictly pays off and the
  // footprint still fits.
  auto cache_pass = [&](SchedulePlan& plan, Priced& cur, double& cur_m,
                        size_t l) {
    for (;;) {
      std::optional<Priced> pick;
      double pick_m = 0.0;
      size_t pick_i = 0;
      int64_t pick_f = 1;
      for (size_t i = 0; i < plan.dims.size(); ++i) {
        if (pinned(plan.dims[i])) continue;
        const int64_t rem = remaining_trips(plan, layer, plan.dims[i]);
        if (rem <= 1) continue;
        const int64_t f = spf(rem);
        SchedulePlan cand = plan;
        cand.tiles[i].cache[l] *= f;
        auto pc = try_candidate(cand);
        if (!pc) continue;
        const double m = objective_metric(pc->cost, opt.objective);
        if (!pick || m < pick_m) {
          pick = std::move(pc);
          pick_m = m;
          pick_i = i;
          pick_f = f;
        }
      }
      if (!pick || pick_m >= cur_m) break;
      plan.tiles[pick_i].cache[l] *= pick_f;
      cur = std::move(*pick);
      cur_m = pick_m;
    }
  };

  // One greedy descent from the seed. The pass orders favor different
  // regimes: caching first keeps traffic down, stacking first fills each
  // array sooner, and the spread-first descent claims parallelism at every
  // level before any tile grows, because an inner cache step that swallows
  // a dimension forecloses spreading it across nodes further out. All are
  // cheap, so the solver runs each and keeps the best endpoint.
  enum class Descent { CacheFirst, StackFirst, SpreadFirst };
  auto run_variant = [&](SchedulePlan plan, Descent how) -> std::optional<Priced> {
    Priced cur = evaluate_plan(plan, layer, hw, region, opt.objective);
    double cur_m = objective_metric(cur.cost, opt.objective);
    if (how == Descent::SpreadFirst)
      for (size_t l = 0; l < nlev; ++l) stack_pass(plan, cur, cur_m, l);
    for (size_t l = 0; l < nlev; ++l) {
      if (how == Descent::StackFirst) {
        stack_pass(plan, cur, cur_m, l);
        cache_pass(plan, cur, cur_m, l);
      } else {
        cache_pass(plan, cur, cur_m, l);
        stack_pass(plan, cur, cur_m, l);
      }
    }

    // Residence constraint for pipelined use: everything outside the sweep
    // dims must be covered on chip, swallowed into the top-level tile (or
    // spread spatially when it does not fit).
    if (opt.top_sweep) {
      const size_t top = nlev - 1;
      for (size_t i = 0; i < plan.dims.size(); ++i) {
        const Dim d = plan.dims[i];
        if (pinned(d)) continue;
        if (std::find(opt.top_sweep->begin(), opt.top_sweep->end(), d) !=
            opt.top_sweep->end())
          continue;
        const int64_t rem = remaining_trips(plan, layer, d);
        if (rem <= 1) continue;
        SchedulePlan grown = plan;
        grown.tiles[i].cache[top] *= rem;
        if (try_candidate(grown)) {
          plan = std::move(grown);
          continue;
        }
        grown = plan;
        grown.tiles[i].stack[top] *= rem;
        int64_t limit = std::min(hw.levels[top].array_size(), region.nodes());
        if (plan_parallelism(grown, top) <= limit && try_candidate(grown)) {
          plan = std::move(grown);
          continue;
        }
        last_failure = "cannot keep " + std::string(dim_name(d)) +
                       " resident at the top level";
        return std::nullopt;
      }
      std::vector<Dim> ord;
      for (Dim d : plan.order[top])
        if (std::find(opt.top_sweep->begin(), opt.top_sweep->end(), d) ==
            opt.top_sweep->end())
          ord.push_back(d);
      for (Dim d : *opt.top_sweep)
        if (tile_index(plan, d) < plan.dims.size()) ord.push_back(d);
      plan.order[top] = std::move(ord);
      cur = evaluate_plan(plan, layer, hw, region, opt.objective);
    }

    const std::string fail = runnability_failure(cur.sched, hw);
    if (!fail.empty()) {
      last_failure = fail;
      return std::nullopt;
    }
    return cur;
  };

  for (size_t ci = 0; ci < combos; ++ci) {
    SchedulePlan plan = seed;
    size_t code = ci;
    for (size_t l = 0; l < nlev; ++l) {
      plan.order[l] = orders[code % orders.size()];
      code /= orders.size();
    }
    for (Descent how : {Descent::CacheFirst, Descent::StackFirst,
                        Descent::SpreadFirst}) {
      auto got = run_variant(plan, how);
      if (!got) continue;
      const double m = objective_metric(got->cost, opt.objective);
      if (!best || m < best_metric) {
        best = std::move(*got);
        best_metric = m;
      }
    }
  }

  if (!best)
    throw Error(Error::Code::NoValidSchedule,
                "layer '" + layer.name + "': " +
                    (last_failure.empty() ? "no runnable schedule found"
                                          : last_failure));
  validate_layer_schedule(best->sched, layer.dims);
  return *best;
}

}  // namespace kapla
