#pragma once

namespace harvnet {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace harvnet
