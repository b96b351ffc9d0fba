#include "oracle.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

namespace kapla::testing {

namespace {

struct OracleDim {
  int64_t ext = 1;
  int64_t bound = 1;
  int64_t step = 0;
  int adv = -1;
};

int64_t span(int64_t lo, int64_t hi, int64_t bound) {
  if (lo < 0) lo = 0;
  if (hi > bound) hi = bound;
  return hi > lo ? hi - lo : 0;
}

}  // namespace

std::vector<OracleLevel> oracle_access(const LayerSchedule& sched,
                                       const DimMap& full_dims) {
  std::vector<OracleLevel> out(sched.levels.size());

  for (size_t li = 0; li < sched.levels.size(); ++li) {
    const LevelSchedule& lv = sched.levels[li];
    OracleLevel& ol = out[li];
    ol.level = lv.level;

    // Extents and bounds, recomputed from scratch.
    std::map<Dim, OracleDim> dims;
    for (const auto& t : lv.tensors) {
      t.sizes.for_each([&](Dim d, int64_t sz) {
        int64_t ext = sz;
        for (const auto& st : lv.stacks)
          if (st.shifts.has(d)) ext += (st.repl - 1) * st.shifts.get(d);
        int64_t bound;
        if (li + 1 < sched.levels.size()) {
          const TensorDecl* ot = sched.levels[li + 1].find_tensor(t.name);
          if (!ot || !ot->sizes.has(d)) throw std::logic_error("oracle: no bound");
          bound = ot->sizes.get(d);
        } else {
          if (!full_dims.has(d)) throw std::logic_error("oracle: no full dim");
          bound = full_dims.get(d);
        }
        auto [it, fresh] = dims.emplace(d, OracleDim{ext, bound, 0, -1});
        if (!fresh && (it->second.ext != ext || it->second.bound != bound))
          throw std::logic_error("oracle: tensors disagree on a dim");
      });
    }

    // Trip counts by literally stepping each dim until its tile reaches the
    // bound, checked for agreement inside each update.
    const int nupd = static_cast<int>(lv.updates.size());
    ol.trips.assign(nupd, 1);
    for (int ui = 0; ui < nupd; ++ui) {
      int64_t agreed = -1;
      lv.updates[ui].steps.for_each([&](Dim d, int64_t step) {
        OracleDim& od = dims.at(d);
        od.step = step;
        od.adv = ui;
        int64_t pos = 0, n = 1;
        while (pos + od.ext < od.bound) {
          pos += step;
          ++n;
        }
        if (agreed < 0)
          agreed = n;
        else if (agreed != n)
          throw std::logic_error("oracle: inconsistent trips");
      });
      ol.trips[ui] = agreed < 0 ? 1 : agreed;
    }

    struct Walker {
      const TensorDecl* decl;
      std::vector<Dim> tdims;
      int outermost_rel = -1;
      int64_t charge = 0;
      int64_t sweeps = 1;
      std::map<Dim, std::set<int64_t>> covered;
    };
    std::vector<Walker> walkers;
    for (const auto& t : lv.tensors) {
      Walker w;
      w.decl = &t;
      t.sizes.for_each([&](Dim d, int64_t) {
        w.tdims.push_back(d);
        w.outermost_rel = std::max(w.outermost_rel, dims.at(d).adv);
      });
      walkers.push_back(std::move(w));
    }

    std::map<Dim, int64_t> pos, prev;
    for (auto& [d, od] : dims) pos[d] = 0;

    auto record = [&](Walker& w) {
      for (Dim d : w.tdims) {
        const OracleDim& od = dims.at(d);
        int64_t p = pos.at(d);
        for (int64_t e = std::max<int64_t>(0, p);
             e < std::min(p + od.ext, od.bound); ++e)
          w.covered[d].insert(e);
      }
    };

    // Initial fill: everything in view is fetched.
    for (auto& w : walkers) {
      int64_t box = 1;
      for (Dim d : w.tdims) box *= span(0, dims.at(d).ext, dims.at(d).bound);
      w.charge = box;
      record(w);
    }

    std::vector<int64_t> state(nupd, 0);
    while (true) {
      int fire = -1;
      for (int i = 0; i < nupd; ++i) {
        if (state[i] + 1 < ol.trips[i]) {
          fire = i;
          break;
        }
      }
      if (fire < 0) break;
      prev = pos;
      ++state[fire];
      for (int j = 0; j < fire; ++j) state[j] = 0;
      for (auto& [d, od] : dims)
        pos[d] = od.adv < 0 ? 0 : state[od.adv] * od.step;

      for (auto& w : walkers) {
        int64_t needed = 1, held = 1;
        for (Dim d : w.tdims) {
          const OracleDim& od = dims.at(d);
          int64_t np = pos.at(d), hp = prev.at(d);
          needed *= span(np, np + od.ext, od.bound);
          held *= span(std::max(np, hp), std::min(np, hp) + od.ext, od.bound);
        }
        w.charge += needed - held;
        if (w.outermost_rel >= 0 && fire > w.outermost_rel) ++w.sweeps;
        record(w);
      }
    }

    for (auto& w : walkers) {
      const TensorDecl& t = *w.decl;
      int64_t mult = 1;
      for (const auto& st : lv.stacks) {
        bool hits = false;
        st.shifts.for_each([&](Dim d, int64_t) {
          if (t.sizes.has(d)) hits = true;
        });
        if (!hits) mult *= st.repl;
      }
      if (mult % t.shr != 0) throw std::logic_error("oracle: shr does not divide");
      int64_t copies = mult / t.shr;

      int64_t full = 1, distinct = 1;
      for (Dim d : w.tdims) {
        full *= span(0, dims.at(d).ext, dims.at(d).bound);
        distinct *= static_cast<int64_t>(w.covered[d].size());
      }

      OracleTensor ot;
      ot.tensor = t.name;
      ot.next_volume = w.charge * copies;
      ot.same_volume = (t.shr - 1) * full * w.sweeps * copies;
      ot.distinct_volume = distinct * copies;
      ot.full_sweeps = w.sweeps;
      ol.tensors.push_back(std::move(ot));
    }
  }

  // Outer levels re-run the whole inner nest once per trip combination.
  for (size_t li = out.size(); li-- > 0;) {
    if (li + 1 < out.size()) {
      int64_t outer_total = 1;
      for (int64_t t : out[li + 1].trips) outer_total *= t;
      out[li].iterations = out[li + 1].iterations * outer_total;
    }
    for (auto& t : out[li].tensors) {
      t.next_volume *= out[li].iterations;
      t.same_volume *= out[li].iterations;
      t.distinct_volume *= out[li].iterations;
    }
  }
  return out;
}

}  // namespace kapla::testing
