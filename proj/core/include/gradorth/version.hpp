#pragma once

namespace gradorth {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace gradorth
