#pragma once

#include <string>
#include <string_view>

namespace sera {

// Shortest decimal form that parses back to the identical double.
std::string format_double(double value);

// Strict parse of a whole token; throws IoError on trailing garbage.
double parse_double(std::string_view text);

}  // namespace sera
