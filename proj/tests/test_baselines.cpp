#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdlib>

#include "doctest.h"
#include "fixtures.hpp"
#include "kapla/baselines.hpp"
#include "kapla/inter.hpp"
#include "kapla/intra.hpp"
#include "kapla/ir_text.hpp"

using namespace kapla;
using namespace kapla::testing;

namespace {

LayerSpec small_conv(int64_t n, int64_t c, int64_t k, int64_t fmap, int64_t filt,
                     int64_t stride = 1) {
  LayerSpec l;
  l.name = "conv";
  l.kind = LayerKind::Conv;
  l.sx = l.sy = stride;
  const int64_t in = (fmap - 1) * stride + filt;
  l.dims = DimMap{{Dim::N, n},   {Dim::C, c},   {Dim::K, k},
                  {Dim::Xi, in}, {Dim::Yi, in}, {Dim::Xo, fmap},
                  {Dim::Yo, fmap}, {Dim::R, filt}, {Dim::S, filt}};
  return l;
}

// Two channels on a near-full register file: twelve candidates in total, so
// sparse sampling has a real chance of skipping every one of them.
LayerSpec tight_dw() {
  LayerSpec l;
  l.name = "tight";
  l.kind = LayerKind::DepthwiseConv;
  l.sx = l.sy = 1;
  l.dims = DimMap{{Dim::N, 1},  {Dim::C, 2},  {Dim::Xi, 3}, {Dim::Yi, 3},
                  {Dim::Xo, 1}, {Dim::Yo, 1}, {Dim::R, 3},  {Dim::S, 3}};
  return l;
}

HardwareSpec tight_hw() { return mesh_hw(40, 76, 1, 2); }

}  // namespace

TEST_CASE("exhaustive walk is deterministic") {
  const LayerSpec conv = small_conv(2, 3, 4, 3, 3);
  const HardwareSpec hw = mesh_hw(64, 2048, 2, 2);
  BaselineStats s1{}, s2{};
  Priced a = solve_exhaustive(conv, hw, {}, &s1);
  Priced b = solve_exhaustive(conv, hw, {}, &s2);
  CHECK(render_layer_schedule(a.sched) == render_layer_schedule(b.sched));
  CHECK(a.cost.energy_pj == b.cost.energy_pj);
  CHECK(s1.candidates == s2.candidates);
  CHECK(s1.priced == s2.priced);
  CHECK(s1.candidates > 1000);
  // Capacity pruning happens before a candidate is counted, so every counted
  // candidate prices unless runnability rejects it at the leaf.
  CHECK(s1.priced == s1.candidates);
}

TEST_CASE("sampling at p=1 matches exhaustive bit for bit") {
  const LayerSpec conv = small_conv(2, 3, 4, 3, 3);
  const HardwareSpec hw = mesh_hw(64, 2048, 2, 2);
  BaselineStats se{}, sr{};
  Priced ex = solve_exhaustive(conv, hw, {}, &se);
  BaselineOptions ro;
  ro.keep_prob = 1.0;
  ro.seed = 99;
  Priced rd = solve_random(conv, hw, ro, &sr);
  CHECK(render_layer_schedule(rd.sched) == render_layer_schedule(ex.sched));
  CHECK(rd.cost.energy_pj == ex.cost.energy_pj);
  CHECK(rd.cost.latency_cycles == ex.cost.latency_cycles);
  CHECK(sr.candidates == se.candidates);
  CHECK(sr.priced == se.priced);
}

TEST_CASE("sampled search finds valid but never better schedules") {
  const LayerSpec conv = small_conv(2, 3, 4, 3, 3);
  const HardwareSpec hw = mesh_hw(64, 2048, 2, 2);
  Priced ex = solve_exhaustive(conv, hw);
  for (uint64_t seed : {1ull, 2ull, 3ull}) {
    BaselineOptions ro;
    ro.keep_prob = 0.1;
    ro.seed = seed;
    BaselineStats st{};
    Priced rd = solve_random(conv, hw, ro, &st);
    CHECK(runnability_failure(rd.sched, hw).empty());
    CHECK(rd.cost.energy_pj >= ex.cost.energy_pj);
    // Roughly a tenth of the space is priced; a factor of two of slack keeps
    // the check binomially safe.
    CHECK(st.priced > st.candidates / 20);
    CHECK(st.priced < st.candidates / 5);
  }
}

TEST_CASE("sparse sampling on a tight space fails until p is raised") {
  const LayerSpec layer = tight_dw();
  const HardwareSpec hw = tight_hw();

  BaselineStats st{};
  Priced ex = solve_exhaustive(layer, hw, {}, &st);
  CHECK(st.candidates == 12);
  CHECK(runnability_failure(ex.sched, hw).empty());

  BaselineOptions ro;
  ro.keep_prob = 0.1;
  ro.seed = 4;
  CHECK_THROWS_WITH_AS(solve_random(layer, hw, ro),
                       doctest::Contains("raise the sampling probability"),
                       Error);

  ro.keep_prob = 1.0;
  Priced rd = solve_random(layer, hw, ro);
  CHECK(render_layer_schedule(rd.sched) == render_layer_schedule(ex.sched));
  CHECK(rd.cost.energy_pj == ex.cost.energy_pj);
}

TEST_CASE("candidate guard trips with an actionable message") {
  const LayerSpec conv = small_conv(2, 3, 4, 3, 3);
  const HardwareSpec hw = mesh_hw(64, 2048, 2, 2);
  BaselineOptions bo;
  bo.guard = 50;
  CHECK_THROWS_WITH_AS(solve_exhaustive(conv, hw, bo),
                       doctest::Contains("raise KAPLA_GUARD"), Error);
  try {
    solve_exhaustive(conv, hw, bo);
  } catch (const Error& e) {
    CHECK(e.code == Error::Code::GuardTripped);
  }

  // guard = 0 defers to the environment.
  setenv("KAPLA_GUARD", "50", 1);
  bo.guard = 0;
  CHECK_THROWS_AS(solve_exhaustive(conv, hw, bo), Error);
  unsetenv("KAPLA_GUARD");
  CHECK_NOTHROW(solve_exhaustive(conv, hw, bo));
}

TEST_CASE("greedy solver lands near the exhaustive optimum") {
  const LayerSpec conv = small_conv(2, 3, 4, 3, 3);
  const HardwareSpec hw = mesh_hw(64, 2048, 2, 2);
  for (Objective obj : {Objective::Energy, Objective::Latency}) {
    BaselineOptions bo;
    bo.objective = obj;
    Priced ex = solve_exhaustive(conv, hw, bo);
    IntraOptions io;
    io.objective = obj;
    Priced greedy = solve_intra(conv, hw, io);
    const double ratio =
        objective_metric(greedy.cost, obj) / objective_metric(ex.cost, obj);
    CHECK(ratio >= 1.0 - 1e-12);
    CHECK(ratio <= 1.15);
  }
}

TEST_CASE("network walk composes whole-net optima") {
  const HardwareSpec hw = mesh_hw(64, 2048, 2, 2);
  NetworkDAG net;
  net.name = "chain3";
  net.batch = 2;
  auto layer = [&](const char* name, std::vector<std::string> in, int64_t c,
                   int64_t k, int64_t fmap) {
    LayerSpec l = small_conv(2, c, k, fmap, 3);
    l.name = name;
    l.inputs = std::move(in);
    return l;
  };
  // Near-prime extents keep the divisor lattice, and with it the walk, small.
  net.layers.push_back(layer("a", {}, 3, 2, 7));
  net.layers.push_back(layer("b", {"a"}, 2, 3, 5));
  net.layers.push_back(layer("c", {"b"}, 3, 2, 3));

  BaselineStats st{};
  NetworkSolution ex = solve_exhaustive_network(net, hw, {}, &st);
  CHECK(ex.ir.layers.size() == 3);
  CHECK(st.candidates > 1000);
  CHECK(ex.energy_pj > 0.0);

  // Sampling with p = 1 walks the same candidates in the same order.
  NetworkBaselineOptions ro;
  ro.keep_prob = 1.0;
  ro.seed = 3;
  BaselineStats sr{};
  NetworkSolution rd = solve_random_network(net, hw, ro, &sr);
  CHECK(render_schedule(rd.ir) == render_schedule(ex.ir));
  CHECK(rd.energy_pj == ex.energy_pj);
  CHECK(rd.makespan_cycles == ex.makespan_cycles);
  CHECK(sr.candidates == st.candidates);

  // The greedy solver may pick a different segmentation but never a better
  // total than the full composition sweep, and here it should match it.
  NetworkSolution kap = solve_network(net, hw);
  CHECK(kap.energy_pj >= ex.energy_pj - 1e-9);
  CHECK(kap.energy_pj / ex.energy_pj <= 1.15);
}

TEST_CASE("network sampling failure names the sampling rate") {
  NetworkDAG net;
  net.name = "tight-net";
  net.batch = 1;
  net.layers.push_back(tight_dw());
  const HardwareSpec hw = tight_hw();

  NetworkBaselineOptions ro;
  ro.keep_prob = 0.05;
  ro.seed = 12;
  CHECK_THROWS_WITH_AS(solve_random_network(net, hw, ro),
                       doctest::Contains("raise the sampling probability"),
                       Error);
  ro.keep_prob = 0.5;
  CHECK_NOTHROW(solve_random_network(net, hw, ro));
}
