#pragma once

namespace rednet {
inline constexpr const char* kVersion = "0.1.0";
}
