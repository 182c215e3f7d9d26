#pragma once

namespace boundedcp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace boundedcp
