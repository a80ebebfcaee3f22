#include "sera/format.hpp"

#include <charconv>
#include <cmath>

#include "sera/errors.hpp"

namespace sera {

std::string format_double(double value) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc{}) throw IoError("cannot format double");
  return std::string(buf, end);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw IoError("not a number: '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace sera
