#include "kapla/baselines.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace kapla {

namespace {

int64_t guard_limit(int64_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("KAPLA_GUARD")) {
    char* end = nullptr;
    const long long v = std::strtoll(env, &end, 10);
    if (end != env && v > 0) return v;
  }
  return 100'000'000;
}

// splitmix64. One hash per candidate keeps the sampling decision independent
// of how many candidates a pruning cut removed before it.
uint64_t mix(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

struct Walk {
  const LayerSpec& layer;
  const HardwareSpec& hw;
  Region region;
  Objective objective;
  double keep_prob;
  uint64_t seed;
  int64_t guard;
  /// Idle power per cycle folded into the energy metric. Zero for standalone
  /// layer searches; the network walk charges it so per-layer winners agree
  /// with the segmentation sweep's judgment.
  double static_pj = 0.0;

  std::vector<Dim> dims{};
  size_t nlev = 0;
  std::vector<std::vector<Dim>> orders{};
  size_t combos = 1;
  SchedulePlan plan{};
  std::vector<int64_t> left{};  // trips of each dim not yet split off

  BaselineStats stats{};
  std::optional<Priced> best{};
  double best_metric = 0.0;

  void run() {
    dims = loop_dims(layer);
    nlev = hw.levels.size() - 1;
    orders = gen_loop_orders(layer);
    combos = 1;
    for (size_t l = 0; l < nlev; ++l) {
      combos *= orders.size();
      if (combos >= 216) {
        combos = 216;
        break;
      }
    }
    plan.dims = dims;
    plan.tiles.assign(dims.size(), TilePlan{});
    for (auto& t : plan.tiles) {
      t.cache.assign(nlev, 1);
      t.stack.assign(nlev, 1);
    }
    // Filter windows stay whole in the innermost buffer; they are never
    // blocked temporally, so the walk only enumerates the loop dimensions.
    plan.window_r = layer.dims.get_or1(Dim::R);
    plan.window_s = layer.dims.get_or1(Dim::S);
    plan.order.assign(nlev, orders.front());
    left.resize(dims.size());
    for (size_t i = 0; i < dims.size(); ++i) left[i] = layer.dims.get_or1(dims[i]);
    place(0, 0);
  }

  // Depth first over per-dim factor slots, innermost level first, cache
  // before stack. Once a dim's slots are filled its footprint share is
  // final, and factors only ever grow it, so an overflowing prefix cuts the
  // whole subtree.
  void place(size_t di, size_t slot) {
    if (di == dims.size()) {
      leaf();
      return;
    }
    if (slot == 2 * nlev) {
      if (!check_capacity(materialize_plan(plan, layer, hw), hw).ok) return;
      place(di + 1, 0);
      return;
    }
    const size_t level = slot / 2;
    const bool spatial = slot % 2;
    const int64_t fanout = spatial ? plan_parallelism(plan, level) : 1;
    int64_t limit = hw.levels[level].array_size();
    if (level + 1 == nlev) limit = std::min(limit, region.nodes());
    auto& factor = spatial ? plan.tiles[di].stack[level] : plan.tiles[di].cache[level];
    for (int64_t f = 1; f <= left[di]; ++f) {
      if (left[di] % f) continue;
      if (spatial && fanout * f > limit) break;
      factor = f;
      left[di] /= f;
      place(di, slot + 1);
      left[di] *= f;
      factor = 1;
    }
  }

  void leaf() {
    for (size_t ci = 0; ci < combos; ++ci) {
      if (stats.candidates >= guard)
        throw Error(Error::Code::GuardTripped,
                    "layer '" + layer.name + "': enumeration passed " +
                        std::to_string(guard) +
                        " candidates; raise KAPLA_GUARD to keep going");
      const auto index = static_cast<uint64_t>(stats.candidates++);
      if (keep_prob < 1.0) {
        const double u =
            static_cast<double>(mix(seed ^ index) >> 11) * 0x1.0p-53;
        if (u >= keep_prob) continue;
      }
      size_t code = ci;
      for (size_t l = 0; l < nlev; ++l) {
        plan.order[l] = orders[code % orders.size()];
        code /= orders.size();
      }
      LayerSchedule s = materialize_plan(plan, layer, hw);
      if (!runnability_failure(s, hw).empty()) continue;
      ++stats.priced;
      Priced got = evaluate_plan(plan, layer, hw, region, objective);
      double m = objective_metric(got.cost, objective);
      if (objective == Objective::Energy) m += static_pj * got.cost.latency_cycles;
      if (!best || m < best_metric) {
        best = std::move(got);
        best_metric = m;
      }
    }
  }
};

Priced run_walk(const LayerSpec& layer, const HardwareSpec& hw,
                const BaselineOptions& opt, double keep_prob,
                BaselineStats* stats, double static_pj = 0.0) {
  Walk walk{.layer = layer,
            .hw = hw,
            .region = opt.region.rows > 0 && opt.region.cols > 0
                          ? opt.region
                          : Region{0, 0, hw.mesh_rows(), hw.mesh_cols()},
            .objective = opt.objective,
            .keep_prob = keep_prob,
            .seed = opt.seed,
            .guard = guard_limit(opt.guard),
            .static_pj = static_pj};
  walk.run();
  if (stats) *stats = walk.stats;
  if (!walk.best) {
    char pbuf[32];
    std::snprintf(pbuf, sizeof pbuf, "%g", keep_prob);
    std::string what = "layer '" + layer.name + "': ";
    if (keep_prob < 1.0)
      what += "sampling at p=" + std::string(pbuf) + " priced " +
              std::to_string(walk.stats.priced) + " of " +
              std::to_string(walk.stats.candidates) +
              " candidates and none was runnable; raise the sampling "
              "probability (below 0.1 valid schedules are routinely missed)";
    else
      what += "no runnable schedule among " +
              std::to_string(walk.stats.candidates) + " candidates";
    throw Error(Error::Code::NoValidSchedule, what);
  }
  return std::move(*walk.best);
}

double segment_metric(const SegmentCost& sc, const HardwareSpec& hw, Objective obj) {
  if (obj == Objective::Latency) return sc.makespan_cycles;
  return sc.energy_pj + hw.static_power_pj_per_cycle * sc.makespan_cycles;
}

NetworkSolution run_network_walk(const NetworkDAG& net, const HardwareSpec& hw,
                                 const NetworkBaselineOptions& opt,
                                 double keep_prob, BaselineStats* stats) {
  validate_network(net);
  const int L = static_cast<int>(net.layers.size());
  const int64_t guard = guard_limit(opt.guard);
  BaselineStats acc;
  std::string last_err = "no layers";

  // Price every contiguous range a segmentation could use. Standalone layers
  // run through the per-layer walk and are then fed to the shared segment
  // pricer, so their totals fold exactly like everyone else's.
  std::vector<std::vector<SegmentCost>> options(L);
  for (int t = 0; t < L; ++t) {
    for (int len = 1; len <= std::min(opt.max_segment_layers, L - t); ++len) {
      for (const auto& scheme : enumerate_segment_schemes(net, hw, t, len)) {
        std::optional<SegmentCost> sc;
        if (len == 1) {
          BaselineOptions bo;
          bo.objective = opt.objective;
          bo.seed = opt.seed ^ mix(static_cast<uint64_t>(t));
          bo.guard = guard - acc.candidates;
          if (bo.guard <= 0)
            throw Error(Error::Code::GuardTripped,
                        "network '" + net.name + "': per-layer walks passed " +
                            std::to_string(guard) +
                            " candidates; raise KAPLA_GUARD to keep going");
          BaselineStats st;
          try {
            Priced p = run_walk(net.layers[t], hw, bo, keep_prob, &st);
            acc.candidates += st.candidates;
            acc.priced += st.priced;
            std::string why;
            sc = price_segment_schedules(net, hw, scheme, {p.sched}, &why);
            if (!sc) last_err = why;
          } catch (const Error& e) {
            if (e.code != Error::Code::NoValidSchedule) throw;
            acc.candidates += st.candidates;
            acc.priced += st.priced;
            last_err = e.what();
          }
        } else {
          sc = price_segment(net, hw, scheme, opt.objective);
        }
        if (sc) options[t].push_back(std::move(*sc));
      }
    }
  }
  if (stats) *stats = acc;

  // The metric is additive over segments, so keeping the single best prefix
  // per boundary is an exact search over all compositions. Strict preference
  // keeps the earliest option on ties, making runs reproducible.
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> best(L + 1, kInf);
  std::vector<int> from(L + 1, -1);
  std::vector<const SegmentCost*> via(L + 1, nullptr);
  best[0] = 0.0;
  for (int t = 0; t < L; ++t) {
    if (best[t] == kInf) continue;
    for (const SegmentCost& sc : options[t]) {
      const int t2 = t + static_cast<int>(sc.scheme.layers.size());
      const double m = best[t] + segment_metric(sc, hw, opt.objective);
      if (m < best[t2]) {
        best[t2] = m;
        from[t2] = t;
        via[t2] = &sc;
      }
    }
  }
  if (best[L] == kInf)
    throw Error(Error::Code::NoValidSchedule,
                "network '" + net.name + "': " + last_err);

  std::vector<const SegmentCost*> segs;
  for (int t = L; t > 0; t = from[t]) segs.push_back(via[t]);
  std::reverse(segs.begin(), segs.end());
  return assemble_solution(net, hw, segs);
}

}  // namespace

Priced solve_exhaustive(const LayerSpec& layer, const HardwareSpec& hw,
                        const BaselineOptions& opt, BaselineStats* stats) {
  return run_walk(layer, hw, opt, 1.0, stats);
}

Priced solve_random(const LayerSpec& layer, const HardwareSpec& hw,
                    const BaselineOptions& opt, BaselineStats* stats) {
  return run_walk(layer, hw, opt, opt.keep_prob, stats);
}

NetworkSolution solve_exhaustive_network(const NetworkDAG& net, const HardwareSpec& hw,
                                         const NetworkBaselineOptions& opt,
                                         BaselineStats* stats) {
  return run_network_walk(net, hw, opt, 1.0, stats);
}

NetworkSolution solve_random_network(const NetworkDAG& net, const HardwareSpec& hw,
                                     const NetworkBaselineOptions& opt,
                                     BaselineStats* stats) {
  return run_network_walk(net, hw, opt, opt.keep_prob, stats);
}

}  // namespace kapla
