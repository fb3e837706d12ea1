#pragma once

namespace boxfuse {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace boxfuse
