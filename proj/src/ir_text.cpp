#include "kapla/ir_text.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace kapla {

namespace {

void render_dims(std::ostringstream& os, const DimMap& m, const char* op) {
  bool first = true;
  m.for_each([&](Dim d, int64_t v) {
    if (!first) os << ", ";
    first = false;
    os << dim_name(d) << op << v;
  });
}

void render_level(std::ostringstream& os, const LevelSchedule& lv) {
  os << " " << lv.level << ":\n";
  for (const auto& t : lv.tensors) {
    os << "  tensor{" << t.name << "}(";
    render_dims(os, t.sizes, "=");
    if (t.shr != 1) os << ", shr=" << t.shr;
    os << ")\n";
  }
  for (const auto& st : lv.stacks) {
    os << "  stack(";
    render_dims(os, st.shifts, "+=");
    os << ", " << st.repl << ")\n";
  }
  for (const auto& u : lv.updates) {
    os << "  update(";
    render_dims(os, u.steps, "+=");
    os << ")\n";
  }
}

}  // namespace

std::string render_layer_schedule(const LayerSchedule& sched) {
  std::ostringstream os;
  os << sched.layer << ":\n";
  for (const auto& lv : sched.levels) render_level(os, lv);
  return os.str();
}

std::string render_schedule(const ScheduleIR& ir) {
  std::ostringstream os;
  for (const auto& seg : ir.segments) {
    os << "segment(";
    for (size_t i = 0; i < seg.layers.size(); ++i)
      os << (i ? ", " : "") << seg.layers[i];
    os << ")\n";
    for (const auto& ra : seg.regions)
      os << "region(" << ra.layer << ", " << ra.region.row0 << ", "
         << ra.region.col0 << ", " << ra.region.rows << ", " << ra.region.cols
         << ")\n";
    for (const auto& fw : seg.forwards)
      os << "forward(" << fw.producer << ", " << fw.consumer << ", "
         << granularity_name(fw.granularity) << ")\n";
  }
  for (const auto& l : ir.layers) os << render_layer_schedule(l);
  return os.str();
}

namespace {

struct Cursor {
  const std::string& origin;
  int line = 0;

  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream os;
    os << origin << ":" << line << ": " << what;
    throw invalid(os.str());
  }
};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

int64_t parse_int(std::string_view s, const Cursor& at) {
  s = trim(s);
  int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    at.fail("expected an integer, got '" + std::string(s) + "'");
  return v;
}

/// Splits "a, b, c" at top level commas (no nesting in this grammar).
std::vector<std::string_view> split_args(std::string_view s) {
  std::vector<std::string_view> out;
  size_t start = 0;
  for (size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == ',') {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  }
  if (out.size() == 1 && out[0].empty()) out.clear();
  return out;
}

/// Extracts the argument list of "head(args)" after validating the head.
std::string_view paren_args(std::string_view line, std::string_view head,
                            const Cursor& at) {
  line = trim(line);
  if (line.substr(0, head.size()) != head) at.fail("internal head mismatch");
  std::string_view rest = line.substr(head.size());
  if (rest.empty() || rest.front() != '(' || rest.back() != ')')
    at.fail("expected '" + std::string(head) + "(...)'");
  return rest.substr(1, rest.size() - 2);
}

Dim parse_dim(std::string_view name, const Cursor& at) {
  auto d = dim_from_name(name);
  if (!d) at.fail("unknown dim '" + std::string(name) + "'");
  return *d;
}

void parse_dim_list(std::string_view args, std::string_view op, DimMap& out,
                    const Cursor& at, int64_t* tail_int, int64_t* shr) {
  auto items = split_args(args);
  if (items.empty()) at.fail("empty argument list");
  for (size_t i = 0; i < items.size(); ++i) {
    std::string_view it = items[i];
    size_t pos = it.find(op);
    if (pos == std::string_view::npos) {
      if (tail_int && i + 1 == items.size()) {
        *tail_int = parse_int(it, at);
        return;
      }
      at.fail("expected '" + std::string(op) + "' in '" + std::string(it) + "'");
    }
    std::string_view lhs = trim(it.substr(0, pos));
    std::string_view rhs = it.substr(pos + op.size());
    if (shr && lhs == "shr") {
      if (i + 1 != items.size()) at.fail("shr must come last");
      *shr = parse_int(rhs, at);
      return;
    }
    Dim d = parse_dim(lhs, at);
    if (out.has(d)) at.fail("dim '" + std::string(lhs) + "' listed twice");
    int64_t v = parse_int(rhs, at);
    out.set(d, v);
  }
  if (tail_int) at.fail("missing trailing replication count");
}

/// Outermost tensors in declaration order carry the roles: output last,
/// weights just before it, inputs first. Inner levels inherit by name.
void assign_roles(LayerSchedule& ls) {
  if (ls.levels.empty()) return;
  auto& top = ls.levels.back().tensors;
  const size_t n = top.size();
  for (size_t i = 0; i < n; ++i) {
    if (n >= 3)
      top[i].role = i + 1 == n ? TensorRole::Output
                  : i + 2 == n ? TensorRole::Weight : TensorRole::Input;
    else
      top[i].role = (n == 2 && i == 1) ? TensorRole::Output : TensorRole::Input;
  }
  for (size_t li = ls.levels.size() - 1; li-- > 0;)
    for (auto& t : ls.levels[li].tensors)
      if (const TensorDecl* ot = ls.levels[li + 1].find_tensor(t.name))
        t.role = ot->role;
}

}  // namespace

ScheduleIR parse_schedule(const std::string& text, const std::string& origin) {
  ScheduleIR ir;
  Cursor at{origin, 0};
  std::istringstream in(text);
  std::string raw;
  LayerSchedule* layer = nullptr;
  LevelSchedule* level = nullptr;

  while (std::getline(in, raw)) {
    ++at.line;
    std::string_view line = raw;
    while (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty()) continue;

    size_t indent = 0;
    while (indent < line.size() && line[indent] == ' ') ++indent;
    if (indent < line.size() && line[indent] == '\t')
      at.fail("tabs are not allowed for indentation");
    std::string_view body = trim(line);

    if (indent == 0) {
      if (body.starts_with("segment(")) {
        SegmentAnnotation seg;
        for (auto name : split_args(paren_args(body, "segment", at))) {
          if (name.empty()) at.fail("empty layer name in segment(...)");
          seg.layers.emplace_back(name);
        }
        if (seg.layers.empty()) at.fail("segment(...) needs at least one layer");
        ir.segments.push_back(std::move(seg));
        layer = nullptr;
        level = nullptr;
        continue;
      }
      if (body.starts_with("region(")) {
        if (ir.segments.empty()) at.fail("region(...) before any segment(...)");
        auto args = split_args(paren_args(body, "region", at));
        if (args.size() != 5)
          at.fail("region(...) takes layer, row0, col0, rows, cols");
        RegionAssignment ra;
        ra.layer = std::string(args[0]);
        ra.region = {parse_int(args[1], at), parse_int(args[2], at),
                     parse_int(args[3], at), parse_int(args[4], at)};
        ir.segments.back().regions.push_back(std::move(ra));
        continue;
      }
      if (body.starts_with("forward(")) {
        if (ir.segments.empty()) at.fail("forward(...) before any segment(...)");
        auto args = split_args(paren_args(body, "forward", at));
        if (args.size() != 3)
          at.fail("forward(...) takes producer, consumer, granularity");
        auto g = granularity_from_name(args[2]);
        if (!g) at.fail("unknown granularity '" + std::string(args[2]) + "'");
        ir.segments.back().forwards.push_back(
            {std::string(args[0]), std::string(args[1]), *g});
        continue;
      }
      if (body.back() != ':') at.fail("expected 'layername:'");
      if (layer) assign_roles(*layer);
      ir.layers.emplace_back();
      layer = &ir.layers.back();
      layer->layer = std::string(body.substr(0, body.size() - 1));
      if (layer->layer.empty()) at.fail("empty layer name");
      level = nullptr;
      continue;
    }

    if (indent == 1) {
      if (!layer) at.fail("level line outside a layer block");
      if (body.back() != ':') at.fail("expected 'levelname:'");
      layer->levels.emplace_back();
      level = &layer->levels.back();
      level->level = std::string(body.substr(0, body.size() - 1));
      if (level->level.empty()) at.fail("empty level name");
      continue;
    }

    if (!level) at.fail("directive outside a level block");
    if (body.starts_with("tensor{")) {
      size_t close = body.find('}');
      if (close == std::string_view::npos) at.fail("unterminated tensor{name}");
      TensorDecl t;
      t.name = std::string(body.substr(7, close - 7));
      if (t.name.empty()) at.fail("empty tensor name");
      if (level->find_tensor(t.name))
        at.fail("tensor '" + t.name + "' declared twice at this level");
      parse_dim_list(paren_args(body.substr(close + 1), "", at), "=", t.sizes,
                     at, nullptr, &t.shr);
      if (t.sizes.empty()) at.fail("tensor declares no dims");
      level->tensors.push_back(std::move(t));
    } else if (body.starts_with("stack(")) {
      StackDirective st;
      parse_dim_list(paren_args(body, "stack", at), "+=", st.shifts, at,
                     &st.repl, nullptr);
      if (st.shifts.empty()) at.fail("stack shifts no dims");
      level->stacks.push_back(std::move(st));
    } else if (body.starts_with("update(")) {
      UpdateDirective u;
      parse_dim_list(paren_args(body, "update", at), "+=", u.steps, at,
                     nullptr, nullptr);
      level->updates.push_back(std::move(u));
    } else {
      at.fail("expected tensor{...}, stack(...) or update(...)");
    }
  }
  if (layer) assign_roles(*layer);
  if (ir.layers.empty() && ir.segments.empty()) at.fail("empty schedule");
  return ir;
}

ScheduleIR load_schedule(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw invalid("cannot open schedule file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_schedule(ss.str(), path);
}

}  // namespace kapla
