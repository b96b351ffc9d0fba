#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "fixtures.hpp"
#include "kapla/access.hpp"
#include "kapla/intra.hpp"
#include "kapla/ir_text.hpp"

using namespace kapla;
using namespace kapla::testing;

namespace {

// The reference conv schedule from the fixtures, re-expressed as a factored
// plan: per-PE sliding windows, 8 output rows over PE columns, filter rows
// over PE rows, C4/K6/N4 resident at GBUF with K x4 / N x16 node groups.
SchedulePlan hand_conv_plan() {
  SchedulePlan p;
  p.dims = {Dim::N, Dim::C, Dim::K, Dim::Xo, Dim::Yo};
  p.tiles.assign(5, TilePlan{1, {1, 1}, {1, 1}});
  p.tiles[0].cache = {1, 4};
  p.tiles[0].stack = {1, 16};
  p.tiles[1].cache = {2, 2};
  p.tiles[2].cache = {3, 2};
  p.tiles[2].stack = {1, 4};
  p.tiles[3].cache = {1, 15};
  p.tiles[4].cache = {1, 2};
  p.tiles[4].stack = {8, 1};
  p.srow_repl = 5;
  p.window_r = 5;
  p.window_s = 1;
  p.order = {{Dim::Xo, Dim::Yo, Dim::N, Dim::C, Dim::K},
             {Dim::Xo, Dim::Yo, Dim::C, Dim::K, Dim::N}};
  return p;
}

}  // namespace

TEST_CASE("materializing the hand plan reproduces the reference access counts") {
  const LayerSpec conv = wide_conv_layer();
  const HardwareSpec hw = mesh_hw();

  LayerSchedule mine = materialize_plan(hand_conv_plan(), conv, hw);
  validate_layer_schedule(mine, conv.dims);

  // The reference bakes in a rotated input shard; the raw materialization
  // carries no rotation yet, so compare against the replication variant.
  LayerSchedule ref = wide_conv_schedule();
  for (auto& lv : ref.levels)
    for (auto& t : lv.tensors) t.shr = 1;

  AccessReport a = access_counts(mine, conv.dims);
  AccessReport b = access_counts(ref, conv.dims);
  REQUIRE(a.levels.size() == b.levels.size());
  for (size_t l = 0; l < a.levels.size(); ++l) {
    CAPTURE(l);
    CHECK(a.levels[l].iterations == b.levels[l].iterations);
    CHECK(a.levels[l].trip_product == b.levels[l].trip_product);
    REQUIRE(a.levels[l].tensors.size() == b.levels[l].tensors.size());
    for (size_t t = 0; t < a.levels[l].tensors.size(); ++t) {
      CAPTURE(t);
      const TensorAccess& ta = a.levels[l].tensors[t];
      const TensorAccess& tb = b.levels[l].tensors[t];
      CHECK(ta.role == tb.role);
      CHECK(ta.next_volume == tb.next_volume);
      CHECK(ta.same_volume == tb.same_volume);
      CHECK(ta.distinct_volume == tb.distinct_volume);
      CHECK(ta.mult == tb.mult);
    }
  }

  // Footprints and fan-out should line up with the reference too.
  CHECK(footprint_elems(mine.levels[0].tensors[0]) == 10);
  CHECK(footprint_elems(mine.levels[0].tensors[1]) == 30);
  CHECK(footprint_elems(mine.levels[0].tensors[2]) == 3);
  CHECK(parallelism(mine.levels[0]) == 40);
  CHECK(parallelism(mine.levels[1]) == 64);
}

TEST_CASE("scoring the hand plan rediscovers the hand-picked rotation") {
  const LayerSpec conv = wide_conv_layer();
  const HardwareSpec hw = mesh_hw();
  const Region mesh{0, 0, 16, 16};

  Priced pr = evaluate_plan(hand_conv_plan(), conv, hw, mesh, Objective::Energy);
  const TensorDecl* in = pr.sched.levels[1].find_tensor("input");
  REQUIRE(in != nullptr);
  CHECK(in->shr == 4);
  CHECK(pr.cost.energy_pj <= doctest::Approx(921023488.0));
}

TEST_CASE("energy solve beats the hand schedule on its own hardware") {
  const LayerSpec conv = wide_conv_layer();
  const HardwareSpec hw = mesh_hw();

  Priced sol = solve_intra(conv, hw);
  CHECK(runnability_failure(sol.sched, hw).empty());
  CHECK(check_capacity(sol.sched, hw).ok);

  LayerCost ref = price_layer(conv, wide_conv_schedule(), hw);
  CHECK(sol.cost.energy_pj < ref.energy_pj);
  CHECK(sol.cost.energy_pj == doctest::Approx(744097286.4));
  CHECK(sol.cost.nodes_used >= 32);

  // The row-stationary template survives the search: filter rows are still
  // spread down the PE rows.
  bool srow = false;
  for (const auto& st : sol.sched.levels[0].stacks)
    if (st.shifts.has(Dim::S) && st.repl == 5) srow = true;
  CHECK(srow);

  // Deterministic: a second run lands on the identical schedule.
  Priced again = solve_intra(conv, hw);
  CHECK(render_layer_schedule(again.sched) == render_layer_schedule(sol.sched));
  CHECK(again.cost.energy_pj == sol.cost.energy_pj);
}

TEST_CASE("latency solve trades energy for speed") {
  const LayerSpec conv = wide_conv_layer();
  const HardwareSpec hw = mesh_hw();

  IntraOptions lat;
  lat.objective = Objective::Latency;
  Priced fast = solve_intra(conv, hw, lat);
  Priced lean = solve_intra(conv, hw);

  CHECK(fast.cost.latency_cycles <= lean.cost.latency_cycles);
  CHECK(fast.cost.latency_cycles == doctest::Approx(69940.0));
  CHECK(fast.cost.latency_cycles <
        price_layer(conv, wide_conv_schedule(), hw).latency_cycles);
}

TEST_CASE("solver honors region confinement") {
  const LayerSpec conv = wide_conv_layer();
  const HardwareSpec hw = mesh_hw();

  IntraOptions opt;
  opt.region = Region{0, 0, 2, 2};
  Priced sol = solve_intra(conv, hw, opt);
  CHECK(sol.cost.nodes_used <= 4);
  CHECK(runnability_failure(sol.sched, hw).empty());

  // Corner placement far from the DRAM ports costs more network energy.
  IntraOptions far;
  far.region = Region{7, 7, 2, 2};
  Priced far_sol = solve_intra(conv, hw, far);
  CHECK(far_sol.cost.noc_pj > sol.cost.noc_pj);
}

TEST_CASE("pipeline residence keeps non-sweep dims on chip") {
  const LayerSpec conv = wide_conv_layer();
  const HardwareSpec hw = mesh_hw();

  IntraOptions opt;
  opt.top_sweep = std::vector<Dim>{Dim::Yo, Dim::N};
  Priced sol = solve_intra(conv, hw, opt);
  CHECK(runnability_failure(sol.sched, hw).empty());

  const LevelSchedule& top = sol.sched.levels.back();
  for (const auto& u : top.updates)
    u.steps.for_each([&](Dim d, int64_t) {
      bool sweepish = d == Dim::N || d == Dim::Yo || d == Dim::Yi;
      CHECK(sweepish);
    });

  // Residence is a constraint, so it can only cost against the free solve,
  // and on this layer the tax is small.
  Priced free = solve_intra(conv, hw);
  CHECK(sol.cost.energy_pj >= free.cost.energy_pj);
  CHECK(sol.cost.energy_pj <= 1.25 * free.cost.energy_pj);
}

TEST_CASE("fully-connected layers map onto the systolic template") {
  LayerSpec fc;
  fc.name = "fc1";
  fc.kind = LayerKind::FC;
  fc.dims.set(Dim::N, 16);
  fc.dims.set(Dim::C, 256);
  fc.dims.set(Dim::K, 128);

  const HardwareSpec hw = mesh_hw();
  Priced sol = solve_intra(fc, hw);
  CHECK(runnability_failure(sol.sched, hw).empty());

  bool c_stack = false, k_stack = false;
  for (const auto& st : sol.sched.levels[0].stacks) {
    if (st.shifts.has(Dim::C)) c_stack = true;
    if (st.shifts.has(Dim::K)) k_stack = true;
  }
  CHECK(c_stack);
  CHECK(k_stack);
  for (const auto& t : sol.sched.levels[0].tensors) {
    CHECK_FALSE(t.sizes.has(Dim::Xo));
    CHECK_FALSE(t.sizes.has(Dim::R));
  }
}

TEST_CASE("filters taller than the PE rows fall back to the systolic seed") {
  LayerSpec tall;
  tall.name = "tall";
  tall.kind = LayerKind::Conv;
  tall.dims.set(Dim::N, 4);
  tall.dims.set(Dim::C, 8);
  tall.dims.set(Dim::K, 16);
  tall.dims.set(Dim::Xi, 20);
  tall.dims.set(Dim::Yi, 20);
  tall.dims.set(Dim::Xo, 4);
  tall.dims.set(Dim::Yo, 4);
  tall.dims.set(Dim::R, 17);
  tall.dims.set(Dim::S, 17);

  // 17 filter rows cannot spread over 8 PE rows; whole windows need roomier
  // buffers than the defaults.
  const HardwareSpec hw = mesh_hw(4096, 128 * 1024);
  Priced sol = solve_intra(tall, hw);
  CHECK(runnability_failure(sol.sched, hw).empty());
  for (const auto& st : sol.sched.levels[0].stacks) CHECK_FALSE(st.shifts.has(Dim::S));
}

TEST_CASE("seeds that cannot fit raise no-valid-schedule") {
  const LayerSpec conv = wide_conv_layer();

  try {
    solve_intra(conv, mesh_hw(16));
    FAIL("expected a no-valid-schedule error");
  } catch (const Error& e) {
    CHECK(e.code == Error::Code::NoValidSchedule);
    CHECK(std::string(e.what()).find("conv_a") != std::string::npos);
  }

  // The sliding-window seed needs exactly 11 register elements; 22 bytes is
  // a perfect fit and must still solve.
  Priced sol = solve_intra(conv, mesh_hw(22));
  CHECK(runnability_failure(sol.sched, mesh_hw(22)).empty());
}

TEST_CASE("depthwise layers keep producer naming and spread over nodes") {
  const LayerSpec dw = depthwise_layer();
  const HardwareSpec hw = mesh_hw();

  Priced sol = solve_intra(dw, hw);
  CHECK(runnability_failure(sol.sched, hw).empty());
  CHECK(sol.cost.nodes_used > 1);
  CHECK(sol.sched.levels[0].find_tensor("conv_a") != nullptr);
  CHECK(sol.sched.levels[0].find_tensor("conv_b.w") != nullptr);
  CHECK(sol.sched.levels[0].find_tensor("conv_b") != nullptr);
  for (const auto& t : sol.sched.levels[0].tensors) CHECK_FALSE(t.sizes.has(Dim::K));
}

TEST_CASE("loop order generation pins fmap sweeps innermost") {
  const LayerSpec conv = wide_conv_layer();
  auto conv_orders = gen_loop_orders(conv);
  CHECK(conv_orders.size() == 6);
  for (const auto& o : conv_orders) {
    REQUIRE(o.size() == 5);
    CHECK(o[0] == Dim::Xo);
    CHECK(o[1] == Dim::Yo);
  }

  LayerSpec fc;
  fc.name = "fc";
  fc.kind = LayerKind::FC;
  fc.dims.set(Dim::N, 2);
  fc.dims.set(Dim::C, 4);
  fc.dims.set(Dim::K, 4);
  auto fc_orders = gen_loop_orders(fc);
  CHECK(fc_orders.size() == 6);
  for (const auto& o : fc_orders) CHECK(o.size() == 3);

  const LayerSpec dw = depthwise_layer();
  CHECK(gen_loop_orders(dw).size() == 2);
}

TEST_CASE("plan accounting: parallelism and leftover trips") {
  const LayerSpec conv = wide_conv_layer();
  const HardwareSpec hw = mesh_hw();

  SchedulePlan seed = seed_plan(conv, hw);
  CHECK(plan_parallelism(seed, 0) == 40);  // 8 output rows x 5 filter rows
  CHECK(plan_parallelism(seed, 1) == 1);
  CHECK(remaining_trips(seed, conv, Dim::Yo) == 2);
  CHECK(remaining_trips(seed, conv, Dim::N) == 64);
  CHECK(remaining_trips(seed, conv, Dim::K) == 96);
  CHECK(remaining_trips(seed, conv, Dim::R) == 1);

  SchedulePlan hand = hand_conv_plan();
  CHECK(plan_parallelism(hand, 0) == 40);
  CHECK(plan_parallelism(hand, 1) == 64);
  for (Dim d : {Dim::N, Dim::C, Dim::K, Dim::Xo, Dim::Yo})
    CHECK(remaining_trips(hand, conv, d) == (d == Dim::C || d == Dim::K ? 4 : 1));
}
