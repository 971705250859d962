#pragma once

namespace waydcm {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace waydcm
