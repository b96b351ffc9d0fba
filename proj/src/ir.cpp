#include "kapla/ir.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "kapla/hw.hpp"

namespace kapla {

const TensorDecl* LevelSchedule::find_tensor(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

const Region* SegmentAnnotation::region_of(const std::string& layer) const {
  for (const auto& ra : regions)
    if (ra.layer == layer) return &ra.region;
  return nullptr;
}

const LayerSchedule* ScheduleIR::find_layer(const std::string& name) const {
  for (const auto& l : layers)
    if (l.layer == name) return &l;
  return nullptr;
}

std::string_view granularity_name(Granularity g) {
  switch (g) {
    case Granularity::Row: return "row";
    case Granularity::Fmap: return "fmap";
    case Granularity::Full: return "full";
  }
  return "?";
}

std::optional<Granularity> granularity_from_name(std::string_view name) {
  for (Granularity g : {Granularity::Row, Granularity::Fmap, Granularity::Full})
    if (granularity_name(g) == name) return g;
  return std::nullopt;
}

int64_t footprint_elems(const TensorDecl& t) {
  return ceil_div(t.sizes.product(), t.shr);
}

int64_t level_footprint_elems(const LevelSchedule& level) {
  int64_t total = 0;
  for (const auto& t : level.tensors) total += footprint_elems(t);
  return total;
}

int64_t parallelism(const LevelSchedule& level) {
  int64_t p = 1;
  for (const auto& s : level.stacks) p *= s.repl;
  return p;
}

int64_t stacked_extent(const LevelSchedule& level, const TensorDecl& t, Dim d) {
  if (!t.sizes.has(d)) return 1;
  int64_t ext = t.sizes.get(d);
  for (const auto& s : level.stacks)
    if (s.shifts.has(d)) ext += (s.repl - 1) * s.shifts.get(d);
  return ext;
}

int64_t replication_mult(const LevelSchedule& level, const TensorDecl& t) {
  int64_t mult = 1;
  for (const auto& s : level.stacks)
    if (!s.shifts.intersects(t.sizes)) mult *= s.repl;
  return mult;
}

namespace {

[[noreturn]] void fail(const std::string& layer, const std::string& level,
                       const std::string& what) {
  throw Error(Error::Code::InvalidInput,
              "schedule for layer '" + layer + "', level '" + level + "': " + what);
}

}  // namespace

void validate_layer_schedule(const LayerSchedule& sched, const DimMap& full_dims) {
  if (sched.levels.empty())
    throw Error(Error::Code::InvalidInput,
                "schedule for layer '" + sched.layer + "' has no levels");

  for (size_t li = 0; li < sched.levels.size(); ++li) {
    const LevelSchedule& lv = sched.levels[li];
    if (lv.level.empty()) fail(sched.layer, lv.level, "level has no name");
    if (lv.tensors.empty()) fail(sched.layer, lv.level, "level declares no tensors");

    std::set<std::string> names;
    for (const auto& t : lv.tensors) {
      if (!names.insert(t.name).second)
        fail(sched.layer, lv.level, "duplicate tensor '" + t.name + "'");
      if (t.sizes.empty())
        fail(sched.layer, lv.level, "tensor '" + t.name + "' declares no dims");
      t.sizes.for_each([&](Dim d, int64_t v) {
        if (v <= 0)
          fail(sched.layer, lv.level,
               "tensor '" + t.name + "' has non-positive size for " +
                   std::string(dim_name(d)));
      });
      if (t.shr < 1)
        fail(sched.layer, lv.level, "tensor '" + t.name + "' has shr < 1");
    }

    DimMap declared;  // union of tensor dims at this level, value unused
    for (const auto& t : lv.tensors)
      t.sizes.for_each([&](Dim d, int64_t) { declared.set(d, 1); });

    for (const auto& s : lv.stacks) {
      if (s.repl < 1) fail(sched.layer, lv.level, "stack with repl < 1");
      s.shifts.for_each([&](Dim d, int64_t v) {
        if (v <= 0)
          fail(sched.layer, lv.level,
               "stack has non-positive shift for " + std::string(dim_name(d)));
        if (!declared.has(d))
          fail(sched.layer, lv.level,
               "stack shifts " + std::string(dim_name(d)) +
                   " which no tensor here declares");
      });
    }

    DimMap advanced;  // dim -> index of the update advancing it
    for (size_t ui = 0; ui < lv.updates.size(); ++ui) {
      const auto& u = lv.updates[ui];
      if (u.steps.empty()) fail(sched.layer, lv.level, "update with no dims");
      u.steps.for_each([&](Dim d, int64_t v) {
        if (v <= 0)
          fail(sched.layer, lv.level,
               "update has non-positive step for " + std::string(dim_name(d)));
        if (!declared.has(d))
          fail(sched.layer, lv.level,
               "update advances " + std::string(dim_name(d)) +
                   " which no tensor here declares");
        if (advanced.has(d))
          fail(sched.layer, lv.level,
               std::string(dim_name(d)) + " advanced by more than one update");
        advanced.set(d, static_cast<int64_t>(ui));
      });
    }

    // Per-buffer nesting against the next outer level, the layer's full dims
    // at the top. Every inner dim must exist outside with at least the inner
    // per-buffer size; stacked extents may exceed the bound (the walk clamps).
    const LevelSchedule* outer =
        li + 1 < sched.levels.size() ? &sched.levels[li + 1] : nullptr;
    for (const auto& t : lv.tensors) {
      const TensorDecl* ot = outer ? outer->find_tensor(t.name) : nullptr;
      if (outer && !ot)
        fail(sched.layer, lv.level,
             "tensor '" + t.name + "' missing at outer level '" + outer->level + "'");
      if (ot && ot->role != t.role)
        fail(sched.layer, lv.level,
             "tensor '" + t.name + "' changes role across levels");
      t.sizes.for_each([&](Dim d, int64_t v) {
        int64_t bound = ot ? (ot->sizes.has(d) ? ot->sizes.get(d) : -1)
                           : (full_dims.has(d) ? full_dims.get(d) : -1);
        if (bound < 0)
          fail(sched.layer, lv.level,
               "tensor '" + t.name + "' dim " + std::string(dim_name(d)) +
                   (ot ? " absent at outer level" : " absent from the layer"));
        if (v > bound) {
          std::ostringstream os;
          os << "tensor '" << t.name << "' per-buffer " << dim_name(d) << "="
             << v << " exceeds its bound " << bound;
          fail(sched.layer, lv.level, os.str());
        }
      });

      int64_t mult = replication_mult(lv, t);
      if (t.shr > 1 && mult % t.shr != 0) {
        std::ostringstream os;
        os << "tensor '" << t.name << "' shr=" << t.shr
           << " does not divide its replication factor " << mult;
        fail(sched.layer, lv.level, os.str());
      }
    }
  }
}

CapacityVerdict check_capacity(const LayerSchedule& sched, const HardwareSpec& hw) {
  CapacityVerdict verdict;
  if (sched.levels.size() + 1 > hw.levels.size()) {
    verdict.ok = false;
    verdict.first_failure = "schedule has more on-chip levels than the hardware";
    return verdict;
  }
  for (size_t li = 0; li < sched.levels.size(); ++li) {
    const LevelSchedule& lv = sched.levels[li];
    const MemLevelSpec& mem = hw.levels[li];
    LevelCapacity c;
    c.level = lv.level;
    c.footprint_bytes = level_footprint_elems(lv) * hw.bytes_per_element;
    c.capacity_bytes = mem.capacity_bytes;
    c.parallelism = parallelism(lv);
    c.array_size = mem.array_size();
    if (lv.level != mem.name) {
      c.ok = false;
      c.message = "level name '" + lv.level + "' does not match hardware level '" +
                  mem.name + "'";
    } else if (mem.capacity_bytes > 0 && c.footprint_bytes > mem.capacity_bytes) {
      std::ostringstream os;
      os << "footprint " << c.footprint_bytes << "B exceeds capacity "
         << mem.capacity_bytes << "B";
      c.ok = false;
      c.message = os.str();
    } else if (c.parallelism > c.array_size) {
      std::ostringstream os;
      os << "parallelism " << c.parallelism << " exceeds the " << mem.array_rows
         << "x" << mem.array_cols << " array";
      c.ok = false;
      c.message = os.str();
    }
    if (!c.ok && verdict.ok) {
      verdict.ok = false;
      verdict.first_failure = "level '" + lv.level + "': " + c.message;
    }
    verdict.levels.push_back(std::move(c));
  }
  return verdict;
}

namespace {

// Producer output dims live in (N, C, K, Xo, Yo); the consumer sees the same
// tensor through its input dims (N, C, Xi, Yi).
Dim map_output_dim_to_input(Dim d) {
  switch (d) {
    case Dim::K: return Dim::C;
    case Dim::Xo: return Dim::Xi;
    case Dim::Yo: return Dim::Yi;
    default: return d;
  }
}

}  // namespace

PipelineMatchVerdict check_pipeline_match(const LayerSchedule& producer,
                                          const LayerSchedule& consumer,
                                          const std::string& shared_tensor) {
  PipelineMatchVerdict v;
  auto fail = [&](std::string msg) {
    v.ok = false;
    v.message = std::move(msg);
    return v;
  };
  if (producer.levels.empty() || consumer.levels.empty())
    return fail("empty schedule");
  const LevelSchedule& ptop = producer.levels.back();
  const LevelSchedule& ctop = consumer.levels.back();
  const TensorDecl* pt = ptop.find_tensor(shared_tensor);
  const TensorDecl* ct = ctop.find_tensor(shared_tensor);
  if (!pt || !ct)
    return fail("tensor '" + shared_tensor +
                "' not present at both layers' top levels");

  int64_t pbatch = stacked_extent(ptop, *pt, Dim::N);
  int64_t cbatch = stacked_extent(ctop, *ct, Dim::N);
  if (pbatch != cbatch) {
    std::ostringstream os;
    os << "batch extents differ: " << producer.layer << " covers " << pbatch
       << ", " << consumer.layer << " covers " << cbatch;
    return fail(os.str());
  }

  Dim pchan = pt->sizes.has(Dim::K) ? Dim::K : Dim::C;
  int64_t pch = stacked_extent(ptop, *pt, pchan);
  int64_t cch = stacked_extent(ctop, *ct, Dim::C);
  if (pch != cch) {
    std::ostringstream os;
    os << "channel extents differ: " << producer.layer << " covers " << pch
       << ", " << consumer.layer << " covers " << cch;
    return fail(os.str());
  }

  // Topmost temporal order over the shared tensor, in the consumer's dims.
  DimMap psteps, csteps;
  for (const auto& u : ptop.updates)
    u.steps.for_each([&](Dim d, int64_t s) {
      if (pt->sizes.has(d)) psteps.set(map_output_dim_to_input(d), s);
    });
  for (const auto& u : ctop.updates)
    u.steps.for_each([&](Dim d, int64_t s) {
      if (ct->sizes.has(d)) csteps.set(d, s);
    });
  if (!(psteps == csteps)) {
    std::ostringstream os;
    os << "top-level update steps over '" << shared_tensor << "' differ between "
       << producer.layer << " and " << consumer.layer;
    return fail(os.str());
  }
  return v;
}

}  // namespace kapla
