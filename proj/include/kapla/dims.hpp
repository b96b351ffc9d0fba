#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace kapla {

/// Loop dimensions of a convolutional layer. N: batch; C/K: input/output
/// channels; Xi/Yi: input fmap width/height; Xo/Yo: output fmap width/height;
/// R/S: filter width/height. FC layers use N, C, K only.
enum class Dim : uint8_t { N, C, K, Xi, Yi, Xo, Yo, R, S };

inline constexpr int kNumDims = 9;

inline constexpr std::array<Dim, kNumDims> kAllDims = {
    Dim::N, Dim::C, Dim::K, Dim::Xi, Dim::Yi, Dim::Xo, Dim::Yo, Dim::R, Dim::S};

std::string_view dim_name(Dim d);

/// Case-sensitive lookup ("Xi", "K", ...). Unknown names return nullopt.
std::optional<Dim> dim_from_name(std::string_view name);

struct Error : std::runtime_error {
  enum class Code { InvalidInput, NoValidSchedule, GuardTripped };
  Code code;
  Error(Code c, const std::string& what) : std::runtime_error(what), code(c) {}
};

inline Error invalid(const std::string& what) {
  return Error(Error::Code::InvalidInput, what);
}

/// Sparse map from Dim to a positive integer (a size, step or shift).
/// Iteration order is the canonical dim order above, independent of
/// insertion order, so schedules render and compare deterministically.
class DimMap {
 public:
  DimMap() = default;
  DimMap(std::initializer_list<std::pair<Dim, int64_t>> init) {
    for (auto& [d, v] : init) set(d, v);
  }

  bool has(Dim d) const { return (mask_ >> idx(d)) & 1u; }
  bool empty() const { return mask_ == 0; }
  int size() const { return __builtin_popcount(mask_); }

  int64_t get(Dim d) const { return has(d) ? vals_[idx(d)] : 0; }
  /// Value for dims outside the map defaults to 1 (a size that is not
  /// declared is a singleton, a step that is not declared does not move).
  int64_t get_or1(Dim d) const { return has(d) ? vals_[idx(d)] : 1; }

  void set(Dim d, int64_t v) {
    vals_[idx(d)] = v;
    mask_ |= 1u << idx(d);
  }
  void erase(Dim d) { mask_ &= ~(1u << idx(d)); }

  bool operator==(const DimMap& o) const {
    if (mask_ != o.mask_) return false;
    for (Dim d : kAllDims)
      if (has(d) && vals_[idx(d)] != o.vals_[idx(d)]) return false;
    return true;
  }

  /// Visits (dim, value) pairs in canonical order.
  template <typename F>
  void for_each(F&& f) const {
    for (Dim d : kAllDims)
      if (has(d)) f(d, vals_[idx(d)]);
  }

  int64_t product() const {
    int64_t p = 1;
    for_each([&](Dim, int64_t v) { p *= v; });
    return p;
  }

  bool intersects(const DimMap& o) const { return (mask_ & o.mask_) != 0; }

 private:
  static constexpr unsigned idx(Dim d) { return static_cast<unsigned>(d); }
  std::array<int64_t, kNumDims> vals_{};
  uint16_t mask_ = 0;
};

inline int64_t ceil_div(int64_t a, int64_t b) { return (a + b - 1) / b; }

}  // namespace kapla
