#pragma once

namespace fawn {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace fawn
