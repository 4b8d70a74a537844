#pragma once

#include <cstdint>
#include <string_view>

namespace dpot {

/// Rough token count used whenever a backend does not report usage: ceil(bytes / 4).
inline std::int64_t estimate_tokens(std::string_view text) {
    return static_cast<std::int64_t>((text.size() + 3) / 4);
}

}  // namespace dpot
