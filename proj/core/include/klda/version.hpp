#pragma once

namespace klda {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace klda
