#pragma once

namespace sepnp {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sepnp
