#pragma once

#include <string>

#include "kapla/ir.hpp"

namespace kapla {

/// JSON form of a schedule. Unlike the directive text it carries tensor
/// roles explicitly, so it is the lossless interchange format.
std::string schedule_to_json(const ScheduleIR& ir, int indent = 2);
ScheduleIR schedule_from_json(const std::string& text, const std::string& origin);
ScheduleIR load_schedule_json(const std::string& path);

}  // namespace kapla
