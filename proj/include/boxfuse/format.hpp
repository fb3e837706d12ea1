#pragma once

#include <string>

namespace boxfuse {

// Serialized reals are fixed at 6 decimal places so golden files stay stable.
double round6(double value);

// Shortest decimal form of round6(value).
std::string format_number(double value);

}  // namespace boxfuse
