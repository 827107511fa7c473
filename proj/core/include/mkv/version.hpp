#pragma once

namespace mkv {

inline constexpr const char* version = "1.0.0";

}
