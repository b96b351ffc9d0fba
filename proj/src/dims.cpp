#include "kapla/dims.hpp"

namespace kapla {

std::string_view dim_name(Dim d) {
  switch (d) {
    case Dim::N: return "N";
    case Dim::C: return "C";
    case Dim::K: return "K";
    case Dim::Xi: return "Xi";
    case Dim::Yi: return "Yi";
    case Dim::Xo: return "Xo";
    case Dim::Yo: return "Yo";
    case Dim::R: return "R";
    case Dim::S: return "S";
  }
  return "?";
}

std::optional<Dim> dim_from_name(std::string_view name) {
  for (Dim d : kAllDims)
    if (dim_name(d) == name) return d;
  return std::nullopt;
}

}  // namespace kapla
