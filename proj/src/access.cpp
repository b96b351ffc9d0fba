#include "kapla/access.hpp"

#include <algorithm>
#include <array>
#include <sstream>

namespace kapla {

const TensorAccess* LevelAccess::find(const std::string& tensor) const {
  for (const auto& t : tensors)
    if (t.tensor == tensor) return &t;
  return nullptr;
}

const LevelAccess* AccessReport::find(const std::string& level) const {
  for (const auto& l : levels)
    if (l.level == level) return &l;
  return nullptr;
}

namespace {

constexpr unsigned idx(Dim d) { return static_cast<unsigned>(d); }

/// Per-dim state of one level's loop space.
struct DimInfo {
  bool used = false;
  int64_t ext = 1;    // stacked extent of the tile along this dim
  int64_t bound = 1;  // loop bound (outer tile size, or the full dim at top)
  int64_t step = 0;   // step of the advancing update, 0 if none
  int adv = -1;       // index of the advancing update, -1 if none
};

/// |[lo, hi) ∩ [0, bound)|
int64_t seg(int64_t lo, int64_t hi, int64_t bound) {
  lo = std::clamp<int64_t>(lo, 0, bound);
  hi = std::clamp<int64_t>(hi, 0, bound);
  return hi > lo ? hi - lo : 0;
}

int64_t tile_len(const DimInfo& di, int64_t pos) {
  return seg(pos, pos + di.ext, di.bound);
}

/// Length of the overlap between the tiles at two positions, clamped.
int64_t tile_olap(const DimInfo& di, int64_t p0, int64_t p1) {
  return seg(std::max(p0, p1), std::min(p0, p1) + di.ext, di.bound);
}

}  // namespace

AccessReport access_counts(const LayerSchedule& sched, const DimMap& full_dims) {
  AccessReport rep;
  const size_t nlevels = sched.levels.size();
  rep.levels.resize(nlevels);

  for (size_t li = 0; li < nlevels; ++li) {
    const LevelSchedule& lv = sched.levels[li];
    const LevelSchedule* outer = li + 1 < nlevels ? &sched.levels[li + 1] : nullptr;
    LevelAccess& la = rep.levels[li];
    la.level = lv.level;

    // The level's loop space: one extent and bound per declared dim, shared
    // by every tensor that has it. The walk below only makes sense when the
    // tensors agree, so a mismatch is an input error.
    std::array<DimInfo, kNumDims> dims;
    for (const auto& t : lv.tensors) {
      const TensorDecl* ot = outer ? outer->find_tensor(t.name) : nullptr;
      t.sizes.for_each([&](Dim d, int64_t) {
        int64_t ext = stacked_extent(lv, t, d);
        int64_t bound = ot ? ot->sizes.get(d) : full_dims.get(d);
        DimInfo& di = dims[idx(d)];
        if (!di.used) {
          di.used = true;
          di.ext = ext;
          di.bound = bound;
        } else if (di.ext != ext || di.bound != bound) {
          std::ostringstream os;
          os << "level '" << lv.level << "': tensors disagree on "
             << dim_name(d) << " (extent " << di.ext << " vs " << ext
             << ", bound " << di.bound << " vs " << bound << ")";
          throw invalid(os.str());
        }
      });
    }

    la.trips.assign(lv.updates.size(), 1);
    for (size_t ui = 0; ui < lv.updates.size(); ++ui) {
      int64_t trips = -1;
      lv.updates[ui].steps.for_each([&](Dim d, int64_t step) {
        DimInfo& di = dims[idx(d)];
        di.step = step;
        di.adv = static_cast<int>(ui);
        int64_t t = di.bound > di.ext ? ceil_div(di.bound - di.ext, step) + 1 : 1;
        if (trips < 0) {
          trips = t;
        } else if (trips != t) {
          std::ostringstream os;
          os << "level '" << lv.level << "': inconsistent trip counts in update "
             << ui << " (" << trips << " vs " << t << " for " << dim_name(d)
             << ")";
          throw invalid(os.str());
        }
      });
      la.trips[ui] = trips;
      la.trip_product *= trips;
    }

    for (const auto& t : lv.tensors) {
      TensorAccess ta;
      ta.tensor = t.name;
      ta.role = t.role;
      ta.shr = t.shr;
      ta.mult = replication_mult(lv, t);
      if (ta.mult % ta.shr != 0) {
        std::ostringstream os;
        os << "level '" << lv.level << "': tensor '" << t.name << "' shr="
           << ta.shr << " does not divide its replication factor " << ta.mult;
        throw invalid(os.str());
      }

      // Initial fill, distinct coverage and the outermost relevant update.
      int64_t full = 1;
      int64_t distinct = 1;
      int outermost_rel = -1;
      t.sizes.for_each([&](Dim d, int64_t) {
        const DimInfo& di = dims[idx(d)];
        full *= tile_len(di, 0);
        outermost_rel = std::max(outermost_rel, di.adv);
        int64_t covered;
        if (di.adv < 0) {
          covered = tile_len(di, 0);
        } else if (di.step >= di.ext) {
          covered = 0;  // strided gaps: sum the disjoint clamped tiles
          for (int64_t tt = 0; tt < la.trips[di.adv]; ++tt)
            covered += tile_len(di, tt * di.step);
        } else {
          covered = std::min(di.bound, (la.trips[di.adv] - 1) * di.step + di.ext);
        }
        distinct *= covered;
      });

      // Buffers start each run of the nest cold, so the union charge is the
      // initial fill plus, per advance event, the newly needed tile minus
      // what the buffers held just before. The advanced dims move one step;
      // dims of inner updates wrap from their last position back to zero;
      // outer dims stand still and factor out per update.
      int64_t total = full;
      for (size_t i = 0; i < lv.updates.size(); ++i) {
        if (la.trips[i] <= 1) continue;
        int64_t inner_new = 1, inner_old = 1;
        std::vector<const DimInfo*> advdims;
        t.sizes.for_each([&](Dim d, int64_t) {
          const DimInfo& di = dims[idx(d)];
          if (di.adv == static_cast<int>(i)) {
            advdims.push_back(&di);
          } else if (di.adv < 0) {
            int64_t l0 = tile_len(di, 0);
            inner_new *= l0;
            inner_old *= l0;
          } else if (di.adv < static_cast<int>(i)) {
            inner_new *= tile_len(di, 0);
            inner_old *= tile_olap(di, 0, (la.trips[di.adv] - 1) * di.step);
          }
        });
        int64_t sum = 0;
        for (int64_t tt = 1; tt < la.trips[i]; ++tt) {
          int64_t dnew = 1, dolap = 1;
          for (const DimInfo* di : advdims) {
            dnew *= tile_len(*di, tt * di->step);
            dolap *= tile_olap(*di, tt * di->step, (tt - 1) * di->step);
          }
          sum += dnew * inner_new - dolap * inner_old;
        }
        if (sum == 0) continue;
        int64_t outer_factor = 1;
        for (size_t j = i + 1; j < lv.updates.size(); ++j) {
          std::vector<const DimInfo*> jdims;
          t.sizes.for_each([&](Dim d, int64_t) {
            const DimInfo& di = dims[idx(d)];
            if (di.adv == static_cast<int>(j)) jdims.push_back(&di);
          });
          if (jdims.empty()) {
            outer_factor *= la.trips[j];
          } else {
            int64_t lam = 0;
            for (int64_t tt = 0; tt < la.trips[j]; ++tt) {
              int64_t prod = 1;
              for (const DimInfo* di : jdims) prod *= tile_len(*di, tt * di->step);
              lam += prod;
            }
            outer_factor *= lam;
          }
        }
        total += sum * outer_factor;
      }

      int64_t sweeps = 1;
      for (size_t j = outermost_rel < 0 ? lv.updates.size()
                                        : static_cast<size_t>(outermost_rel) + 1;
           j < lv.updates.size(); ++j)
        sweeps *= la.trips[j];
      ta.full_sweeps = sweeps;

      int64_t copies = ta.mult / ta.shr;
      ta.next_volume = total * copies;
      ta.distinct_volume = distinct * copies;
      ta.same_volume = (t.shr - 1) * full * sweeps * copies;

      // Innermost relevant update, per-buffer view: declared tile sizes, one
      // pass, neighbour retention, no clamping.
      int inner_rel = -1;
      t.sizes.for_each([&](Dim d, int64_t) {
        const DimInfo& di = dims[idx(d)];
        if (di.adv >= 0 && (inner_rel < 0 || di.adv < inner_rel)) inner_rel = di.adv;
      });
      int64_t per_buf = t.sizes.product();
      if (inner_rel < 0) {
        ta.pass_buffer_volume = per_buf;
      } else {
        int64_t retained = 1;
        t.sizes.for_each([&](Dim d, int64_t sz) {
          const DimInfo& di = dims[idx(d)];
          if (di.adv == inner_rel)
            retained *= std::max<int64_t>(0, sz - di.step);
          else
            retained *= sz;
        });
        ta.pass_buffer_volume =
            per_buf + (la.trips[inner_rel] - 1) * (per_buf - retained);
      }

      la.tensors.push_back(std::move(ta));
    }
  }

  // Each level's nest runs once per combination of all outer levels' trips.
  for (size_t li = nlevels; li-- > 0;) {
    LevelAccess& la = rep.levels[li];
    la.iterations =
        li + 1 < nlevels
            ? rep.levels[li + 1].iterations * rep.levels[li + 1].trip_product
            : 1;
    for (TensorAccess& ta : la.tensors) {
      ta.next_volume *= la.iterations;
      ta.same_volume *= la.iterations;
      ta.distinct_volume *= la.iterations;
    }
  }
  return rep;
}

}  // namespace kapla
