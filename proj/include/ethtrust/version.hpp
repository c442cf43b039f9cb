#pragma once

namespace ethtrust {

inline constexpr const char* kToolkitVersion = "0.1.0";

}  // namespace ethtrust
