#pragma once

namespace walker3 {

inline constexpr const char* kToolName = "walker3";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace walker3
