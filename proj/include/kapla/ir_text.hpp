#pragma once

#include <string>

#include "kapla/ir.hpp"

namespace kapla {

/// Renders a schedule in the directive language:
///
///   segment(conv1, conv2)
///   region(conv1, 0, 0, 16, 8)
///   forward(conv1, conv2, fmap)
///   conv1:
///    REGF:
///     tensor{0}(N=1, C=2, Xi=5, Yi=1)
///     stack(Yi+=1, Yo+=1, 8)
///     update(Xi+=1, Xo+=1)
///    GBUF:
///     ...
///
/// Segment annotations come first, then one block per layer, levels
/// innermost first, directives in tensor/stack/update order. Dims always
/// print in canonical order, shr and repl last, so rendering is canonical:
/// parsing a rendered schedule and rendering again reproduces it byte for
/// byte.
std::string render_schedule(const ScheduleIR& ir);
std::string render_layer_schedule(const LayerSchedule& sched);

/// Inverse of render_schedule, tolerant of extra spaces and blank lines.
/// Tensor roles are not part of the syntax; each layer's outermost level
/// assigns them by position (last is the output, before it the weights,
/// the rest inputs; two tensors mean input and output) and inner levels
/// inherit by name. Throws Error{InvalidInput} with line numbers.
ScheduleIR parse_schedule(const std::string& text, const std::string& origin);

ScheduleIR load_schedule(const std::string& path);

}  // namespace kapla
