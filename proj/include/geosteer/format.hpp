#pragma once

#include <charconv>
#include <string>

namespace geosteer {

/// Locale-independent shortest round-trip decimal form; used by every CSV
/// and trace writer so reruns are byte-identical.
inline std::string format_double(double value) {
    char buffer[32];
    const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, result.ptr);
}

} // namespace geosteer
