#pragma once

namespace turbforward {

inline constexpr const char* kProgramName = "turbforward";
inline constexpr const char* kVersion = "0.1.0";

}  // namespace turbforward
