#include "boxfuse/format.hpp"

#include <charconv>
#include <cmath>

namespace boxfuse {

double round6(double value) {
  return static_cast<double>(std::llround(value * 1e6)) / 1e6;
}

std::string format_number(double value) {
  char buf[64];
  const auto result = std::to_chars(buf, buf + sizeof(buf), round6(value));
  return std::string(buf, result.ptr);
}

}  // namespace boxfuse
