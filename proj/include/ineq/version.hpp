#pragma once

namespace ineq {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ineq
