#include "kapla/network.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace kapla {

using nlohmann::json;

std::string_view kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "Conv";
    case LayerKind::FC: return "FC";
    case LayerKind::DepthwiseConv: return "DepthwiseConv";
    case LayerKind::LocalRegion: return "LocalRegion";
    case LayerKind::ConvBackData: return "ConvBackData";
    case LayerKind::ConvBackWeight: return "ConvBackWeight";
  }
  return "?";
}

std::optional<LayerKind> kind_from_name(std::string_view name) {
  for (LayerKind k :
       {LayerKind::Conv, LayerKind::FC, LayerKind::DepthwiseConv,
        LayerKind::LocalRegion, LayerKind::ConvBackData,
        LayerKind::ConvBackWeight})
    if (kind_name(k) == name) return k;
  return std::nullopt;
}

std::string_view role_name(TensorRole r) {
  switch (r) {
    case TensorRole::Input: return "input";
    case TensorRole::Weight: return "weight";
    case TensorRole::Output: return "output";
  }
  return "?";
}

std::optional<TensorRole> role_from_name(std::string_view name) {
  for (TensorRole r :
       {TensorRole::Input, TensorRole::Weight, TensorRole::Output})
    if (role_name(r) == name) return r;
  return std::nullopt;
}

bool is_differentiable(LayerKind k) {
  return k == LayerKind::Conv || k == LayerKind::FC ||
         k == LayerKind::DepthwiseConv;
}

bool is_back_kind(LayerKind k) {
  return k == LayerKind::ConvBackData || k == LayerKind::ConvBackWeight;
}

namespace {

bool has_spatial(const LayerSpec& l) { return l.kind != LayerKind::FC; }

bool has_k(const LayerSpec& l) { return l.dims.has(Dim::K); }

DimMap pick(const LayerSpec& l, std::initializer_list<Dim> ds) {
  DimMap m;
  for (Dim d : ds) m.set(d, l.dims.get_or1(d));
  return m;
}

}  // namespace

std::vector<TensorShape> layer_tensors(const LayerSpec& layer) {
  std::vector<TensorShape> out;
  DimMap in = has_spatial(layer) ? pick(layer, {Dim::N, Dim::C, Dim::Xi, Dim::Yi})
                                 : pick(layer, {Dim::N, Dim::C});
  size_t n_inputs = std::max<size_t>(1, layer.inputs.size());
  for (size_t i = 0; i < n_inputs; ++i) out.push_back({TensorRole::Input, in});

  switch (layer.kind) {
    case LayerKind::Conv:
    case LayerKind::ConvBackData:
    case LayerKind::ConvBackWeight:
      if (has_k(layer))
        out.push_back({TensorRole::Weight, pick(layer, {Dim::K, Dim::C, Dim::R, Dim::S})});
      else
        out.push_back({TensorRole::Weight, pick(layer, {Dim::C, Dim::R, Dim::S})});
      break;
    case LayerKind::DepthwiseConv:
      out.push_back({TensorRole::Weight, pick(layer, {Dim::C, Dim::R, Dim::S})});
      break;
    case LayerKind::FC:
      out.push_back({TensorRole::Weight, pick(layer, {Dim::K, Dim::C})});
      break;
    case LayerKind::LocalRegion:
      break;
  }

  DimMap o;
  if (has_spatial(layer))
    o = has_k(layer) ? pick(layer, {Dim::N, Dim::K, Dim::Xo, Dim::Yo})
                     : pick(layer, {Dim::N, Dim::C, Dim::Xo, Dim::Yo});
  else
    o = pick(layer, {Dim::N, Dim::K});
  out.push_back({TensorRole::Output, o});
  return out;
}

std::vector<Dim> loop_dims(const LayerSpec& layer) {
  std::vector<Dim> ds = {Dim::N, Dim::C};
  if (has_k(layer)) ds.push_back(Dim::K);
  if (has_spatial(layer)) {
    ds.push_back(Dim::Xo);
    ds.push_back(Dim::Yo);
  }
  return ds;
}

int64_t out_channels(const LayerSpec& layer) {
  return has_k(layer) ? layer.dims.get(Dim::K) : layer.dims.get_or1(Dim::C);
}

int64_t mac_count(const LayerSpec& layer) {
  // One multiply-accumulate (or window op for LocalRegion) per point of the
  // full loop nest.
  int64_t m = 1;
  for (Dim d : {Dim::N, Dim::C, Dim::K, Dim::Xo, Dim::Yo, Dim::R, Dim::S})
    m *= layer.dims.get_or1(d);
  return m;
}

const LayerSpec* NetworkDAG::find(const std::string& layer_name) const {
  for (auto& l : layers)
    if (l.name == layer_name) return &l;
  return nullptr;
}

int NetworkDAG::index_of(const std::string& layer_name) const {
  for (size_t i = 0; i < layers.size(); ++i)
    if (layers[i].name == layer_name) return static_cast<int>(i);
  return -1;
}

std::vector<std::vector<int>> NetworkDAG::consumers() const {
  std::vector<std::vector<int>> out(layers.size());
  for (size_t i = 0; i < layers.size(); ++i)
    for (auto& in : layers[i].inputs) {
      int p = index_of(in);
      if (p >= 0) out[p].push_back(static_cast<int>(i));
    }
  return out;
}

namespace {

void check_shape_chain(const NetworkDAG& net, const LayerSpec& l) {
  if (is_back_kind(l.kind) || l.backward) return;
  for (auto& in : l.inputs) {
    const LayerSpec* p = net.find(in);
    if (!p || is_back_kind(p->kind) || p->backward) continue;
    int64_t prod_ch = out_channels(*p);
    bool p_spatial = p->kind != LayerKind::FC;
    bool l_spatial = l.kind != LayerKind::FC;
    if (l_spatial && p_spatial) {
      if (l.dims.get(Dim::C) != prod_ch)
        throw invalid("layer " + l.name + ": input channels " +
                      std::to_string(l.dims.get(Dim::C)) + " != " + in +
                      " output channels " + std::to_string(prod_ch));
      if (l.dims.get(Dim::Xi) != p->dims.get(Dim::Xo) ||
          l.dims.get(Dim::Yi) != p->dims.get(Dim::Yo))
        throw invalid("layer " + l.name + ": input fmap " +
                      std::to_string(l.dims.get(Dim::Xi)) + "x" +
                      std::to_string(l.dims.get(Dim::Yi)) + " != " + in +
                      " output fmap");
    } else if (!l_spatial) {
      int64_t flat = prod_ch;
      if (p_spatial) flat *= p->dims.get(Dim::Xo) * p->dims.get(Dim::Yo);
      if (l.dims.get(Dim::C) != flat)
        throw invalid("layer " + l.name + ": FC input size " +
                      std::to_string(l.dims.get(Dim::C)) +
                      " != flattened output of " + in + " (" +
                      std::to_string(flat) + ")");
    }
  }
}

}  // namespace

void validate_network(const NetworkDAG& net) {
  if (net.layers.empty()) throw invalid("network has no layers");
  for (size_t i = 0; i < net.layers.size(); ++i) {
    const LayerSpec& l = net.layers[i];
    for (size_t j = 0; j < i; ++j)
      if (net.layers[j].name == l.name)
        throw invalid("duplicate layer name " + l.name);
    for (auto& in : l.inputs) {
      int p = net.index_of(in);
      if (p < 0) throw invalid("layer " + l.name + ": unknown input " + in);
      if (p >= static_cast<int>(i))
        throw invalid("layer " + l.name + ": input " + in +
                      " declared later (layers must be topologically ordered)");
    }
    for (Dim d : kAllDims)
      if (l.dims.has(d) && l.dims.get(d) <= 0)
        throw invalid("layer " + l.name + ": nonpositive dim " +
                      std::string(dim_name(d)));
    if (l.kind != LayerKind::FC) {
      int64_t want_xi = (l.dims.get_or1(Dim::Xo) - 1) * l.sx + l.dims.get_or1(Dim::R);
      int64_t want_yi = (l.dims.get_or1(Dim::Yo) - 1) * l.sy + l.dims.get_or1(Dim::S);
      if (!is_back_kind(l.kind) &&
          (l.dims.get(Dim::Xi) != want_xi || l.dims.get(Dim::Yi) != want_yi))
        throw invalid("layer " + l.name + ": input size " +
                      std::to_string(l.dims.get(Dim::Xi)) + "x" +
                      std::to_string(l.dims.get(Dim::Yi)) +
                      " does not match (Xo-1)*stride+R = " +
                      std::to_string(want_xi) + "x" + std::to_string(want_yi));
    }
    if (l.kind == LayerKind::DepthwiseConv && l.dims.has(Dim::K))
      throw invalid("layer " + l.name + ": DepthwiseConv must not declare K");
    check_shape_chain(net, l);
  }
}

namespace {

int64_t get_int(const json& j, const char* key, const std::string& ctx,
                std::optional<int64_t> dflt = std::nullopt) {
  if (!j.contains(key)) {
    if (dflt) return *dflt;
    throw invalid(ctx + ": missing field '" + key + "'");
  }
  if (!j[key].is_number_integer())
    throw invalid(ctx + ": field '" + key + "' must be an integer");
  return j[key].get<int64_t>();
}

}  // namespace

NetworkDAG parse_network(const std::string& json_text, const std::string& origin) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw invalid(origin + ": " + e.what());
  }
  NetworkDAG net;
  net.name = j.value("name", origin);
  net.batch = get_int(j, "batch", origin);
  if (net.batch <= 0) throw invalid(origin + ": batch must be positive");
  if (!j.contains("layers") || !j["layers"].is_array())
    throw invalid(origin + ": missing 'layers' array");
  for (const json& lj : j["layers"]) {
    LayerSpec l;
    if (!lj.contains("name") || !lj["name"].is_string())
      throw invalid(origin + ": layer without a name");
    l.name = lj["name"].get<std::string>();
    std::string ctx = origin + ", layer " + l.name;
    std::string kind = lj.value("kind", "Conv");
    auto k = kind_from_name(kind);
    if (!k) throw invalid(ctx + ": unknown kind '" + kind + "'");
    l.kind = *k;
    if (lj.contains("stride")) {
      const json& s = lj["stride"];
      if (!s.is_array() || s.size() != 2)
        throw invalid(ctx + ": stride must be [sx, sy]");
      l.sx = s[0].get<int64_t>();
      l.sy = s[1].get<int64_t>();
      if (l.sx <= 0 || l.sy <= 0) throw invalid(ctx + ": nonpositive stride");
    }
    const json& dims = lj.contains("dims") ? lj["dims"] : json::object();
    for (auto& [key, val] : dims.items()) {
      auto d = dim_from_name(key);
      if (!d) throw invalid(ctx + ": unknown dimension '" + key + "'");
      if (!val.is_number_integer() || val.get<int64_t>() <= 0)
        throw invalid(ctx + ": dimension " + key + " must be a positive integer");
      l.dims.set(*d, val.get<int64_t>());
    }
    l.dims.set(Dim::N, net.batch);
    if (l.kind != LayerKind::FC) {
      for (Dim d : {Dim::C, Dim::Xo, Dim::Yo})
        if (!l.dims.has(d)) throw invalid(ctx + ": missing dimension " + std::string(dim_name(d)));
      if (!l.dims.has(Dim::R)) l.dims.set(Dim::R, 1);
      if (!l.dims.has(Dim::S)) l.dims.set(Dim::S, 1);
      if (l.kind != LayerKind::DepthwiseConv && l.kind != LayerKind::LocalRegion &&
          !l.dims.has(Dim::K))
        throw invalid(ctx + ": missing dimension K");
      // Xi/Yi are derived unless the file pins them, in which case the
      // shape relation is checked by validate_network below.
      if (!l.dims.has(Dim::Xi))
        l.dims.set(Dim::Xi, (l.dims.get(Dim::Xo) - 1) * l.sx + l.dims.get(Dim::R));
      if (!l.dims.has(Dim::Yi))
        l.dims.set(Dim::Yi, (l.dims.get(Dim::Yo) - 1) * l.sy + l.dims.get(Dim::S));
    } else {
      for (Dim d : {Dim::C, Dim::K})
        if (!l.dims.has(d)) throw invalid(ctx + ": missing dimension " + std::string(dim_name(d)));
    }
    if (lj.contains("inputs"))
      for (const json& in : lj["inputs"]) l.inputs.push_back(in.get<std::string>());
    net.layers.push_back(std::move(l));
  }
  validate_network(net);
  return net;
}

NetworkDAG load_network(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw invalid("cannot open network file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_network(ss.str(), path);
}

namespace {

LayerSpec make_back_data(const LayerSpec& f) {
  LayerSpec b;
  b.name = f.name + "_bd";
  b.kind = LayerKind::ConvBackData;  // K stays absent for depthwise parents
  b.backward = true;
  b.sx = b.sy = 1;
  b.dims.set(Dim::N, f.dims.get_or1(Dim::N));
  if (f.kind == LayerKind::DepthwiseConv) {
    b.dims.set(Dim::C, f.dims.get_or1(Dim::C));
  } else {
    b.dims.set(Dim::C, f.dims.get_or1(Dim::K));
    b.dims.set(Dim::K, f.dims.get_or1(Dim::C));
  }
  if (f.kind != LayerKind::FC) {
    b.dims.set(Dim::Xo, f.dims.get(Dim::Xi));
    b.dims.set(Dim::Yo, f.dims.get(Dim::Yi));
    b.dims.set(Dim::R, f.dims.get(Dim::R));
    b.dims.set(Dim::S, f.dims.get(Dim::S));
    b.dims.set(Dim::Xi, b.dims.get(Dim::Xo) - 1 + b.dims.get(Dim::R));
    b.dims.set(Dim::Yi, b.dims.get(Dim::Yo) - 1 + b.dims.get(Dim::S));
  }
  return b;
}

LayerSpec make_back_weight(const LayerSpec& f) {
  LayerSpec b;
  b.name = f.name + "_bw";
  b.kind = LayerKind::ConvBackWeight;
  b.backward = true;
  b.sx = f.sx;
  b.sy = f.sy;
  if (f.kind == LayerKind::DepthwiseConv) {
    // Per-channel weight gradients keep the depthwise structure (no K); the
    // output holds per-batch partial gradients, summed off the critical path.
    b.dims.set(Dim::N, f.dims.get_or1(Dim::N));
    b.dims.set(Dim::C, f.dims.get_or1(Dim::C));
    b.dims.set(Dim::Xo, f.dims.get(Dim::R));
    b.dims.set(Dim::Yo, f.dims.get(Dim::S));
    b.dims.set(Dim::R, f.dims.get(Dim::Xo));
    b.dims.set(Dim::S, f.dims.get(Dim::Yo));
  } else {
    // dW(K,C,R,S) becomes the output tensor by treating the forward input
    // channels as the batch axis and the fmap as the reduction window; the
    // MAC count is preserved exactly.
    b.dims.set(Dim::N, f.dims.get_or1(Dim::C));
    b.dims.set(Dim::C, f.dims.get_or1(Dim::N));
    b.dims.set(Dim::K, f.dims.get_or1(Dim::K));
    if (f.kind != LayerKind::FC) {
      b.dims.set(Dim::Xo, f.dims.get(Dim::R));
      b.dims.set(Dim::Yo, f.dims.get(Dim::S));
      b.dims.set(Dim::R, f.dims.get(Dim::Xo));
      b.dims.set(Dim::S, f.dims.get(Dim::Yo));
    }
  }
  if (b.kind != LayerKind::FC && !b.dims.has(Dim::Xi)) {
    b.dims.set(Dim::Xi, (b.dims.get_or1(Dim::Xo) - 1) * b.sx + b.dims.get_or1(Dim::R));
    b.dims.set(Dim::Yi, (b.dims.get_or1(Dim::Yo) - 1) * b.sy + b.dims.get_or1(Dim::S));
  }
  return b;
}

LayerSpec make_back_pass(const LayerSpec& f) {
  LayerSpec b = f;  // identity-shaped gradient pass-through
  b.name = f.name + "_bg";
  b.backward = true;
  b.inputs.clear();
  return b;
}

}  // namespace

NetworkDAG build_training_graph(const NetworkDAG& net) {
  for (auto& l : net.layers)
    if (is_back_kind(l.kind))
      throw invalid("build_training_graph: input already contains backward layer " +
                    l.name);
  NetworkDAG out = net;
  out.name = net.name + "_training";
  auto cons = net.consumers();

  // Gradient source for layer i: the back-data (or pass-through) layers of
  // its consumers, or the forward terminal itself where the loss attaches.
  auto grad_sources = [&](size_t i) {
    std::vector<std::string> src;
    for (int c : cons[i]) {
      const LayerSpec& m = net.layers[c];
      src.push_back(is_differentiable(m.kind) ? m.name + "_bd" : m.name + "_bg");
    }
    if (src.empty()) src.push_back(net.layers[i].name);
    return src;
  };

  for (size_t r = net.layers.size(); r-- > 0;) {
    const LayerSpec& f = net.layers[r];
    auto src = grad_sources(r);
    if (is_differentiable(f.kind)) {
      LayerSpec bd = make_back_data(f);
      bd.inputs = src;
      LayerSpec bw = make_back_weight(f);
      bw.inputs = src;
      out.layers.push_back(std::move(bd));
      out.layers.push_back(std::move(bw));
    } else {
      LayerSpec bg = make_back_pass(f);
      bg.inputs = src;
      out.layers.push_back(std::move(bg));
    }
  }
  validate_network(out);
  return out;
}

int64_t total_macs(const NetworkDAG& net) {
  int64_t t = 0;
  for (auto& l : net.layers) t += mac_count(l);
  return t;
}

}  // namespace kapla
