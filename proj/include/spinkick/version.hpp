#pragma once

namespace spinkick {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace spinkick
