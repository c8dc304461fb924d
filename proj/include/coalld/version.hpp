#pragma once

namespace coalld {
inline constexpr const char* kVersion = "0.1.0";
}
