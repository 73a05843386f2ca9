#pragma once

namespace svi2 {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace svi2
