#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "kapla/dims.hpp"

namespace kapla {

enum class LayerKind : uint8_t {
  Conv,
  FC,
  DepthwiseConv,
  LocalRegion,
  ConvBackData,
  ConvBackWeight,
};

std::string_view kind_name(LayerKind k);
std::optional<LayerKind> kind_from_name(std::string_view name);

/// True for kinds that carry a weight tensor and therefore get back-data and
/// back-weight twins in a training graph. LocalRegion (pooling, eltwise,
/// normalization windows) only passes gradients through.
bool is_differentiable(LayerKind k);
bool is_back_kind(LayerKind k);

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::Conv;
  /// Full loop dimension sizes, including batch N. Spatial kinds carry the
  /// derived input sizes Xi = (Xo-1)*sx + R and Yi = (Yo-1)*sy + S.
  DimMap dims;
  int64_t sx = 1, sy = 1;
  /// Producer layer names; empty means the layer reads the external input.
  std::vector<std::string> inputs;
  /// Set on layers synthesized by build_training_graph. Gradient geometry
  /// does not follow the forward fmap chain, so shape chaining skips them.
  bool backward = false;
};

enum class TensorRole : uint8_t { Input, Weight, Output };

std::string_view role_name(TensorRole r);
std::optional<TensorRole> role_from_name(std::string_view name);

struct TensorShape {
  TensorRole role;
  DimMap dims;
};

/// The tensors a layer touches, in declaration order input(s), weight,
/// output. Multi-input layers (eltwise joins) get one input shape per edge.
std::vector<TensorShape> layer_tensors(const LayerSpec& layer);

/// Dims the schedule search may block temporally: N plus channels and output
/// spatial dims. R and S are placed spatially or kept resident whole, never
/// stepped by update directives.
std::vector<Dim> loop_dims(const LayerSpec& layer);

/// Output channel count as seen by a consumer (K, or C for kinds without K).
int64_t out_channels(const LayerSpec& layer);

int64_t mac_count(const LayerSpec& layer);

struct NetworkDAG {
  std::string name;
  int64_t batch = 1;
  std::vector<LayerSpec> layers;

  const LayerSpec* find(const std::string& layer_name) const;
  int index_of(const std::string& layer_name) const;
  /// Consumer indices of each layer, in declaration order.
  std::vector<std::vector<int>> consumers() const;
};

/// Checks name uniqueness, dangling producer references, acyclicity and the
/// producer/consumer shape chain. Throws Error{InvalidInput} on violation.
void validate_network(const NetworkDAG& net);

/// Loads the JSON network description (see README for the schema) and
/// derives Xi/Yi. Throws Error{InvalidInput} on malformed input.
NetworkDAG load_network(const std::string& path);
NetworkDAG parse_network(const std::string& json_text, const std::string& origin);

/// Expands a forward net into the training graph: every differentiable layer
/// gains a back-data twin (C/K swapped, fmaps swapped) and a back-weight twin
/// (fmaps become the reduction dims, R/S the outputs); LocalRegion layers get
/// an identity-shaped gradient pass-through. Gradient edges run opposite to
/// the forward edges, rooted at the terminal forward layers.
NetworkDAG build_training_graph(const NetworkDAG& net);

int64_t total_macs(const NetworkDAG& net);

}  // namespace kapla
