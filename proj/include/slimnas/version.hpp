#pragma once

namespace slimnas {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace slimnas
