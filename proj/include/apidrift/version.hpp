#pragma once

namespace apidrift {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace apidrift
