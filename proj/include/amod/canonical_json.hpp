#pragma once

#include <string>

#include <json.hpp>

namespace amod {

using Json = nlohmann::json;

// Sorted keys, two-space indent, floats at 12 significant digits, non-finite
// numbers as null. Integral values stored as integers print without a point.
std::string canonical_dump(const Json& value);

// A finite double, or null.
Json number_or_null(double value);

}  // namespace amod
