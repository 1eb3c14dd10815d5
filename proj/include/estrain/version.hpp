#pragma once

namespace estrain {
inline constexpr const char* version_string = "1.0.0";
}
