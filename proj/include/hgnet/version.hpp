#pragma once

namespace hgnet {

inline constexpr const char* kVersion = "0.1.0";

}
