#pragma once

#include <array>
#include <charconv>
#include <string>

#include "spde/errors.hpp"

namespace spde {

/// Shortest decimal string that parses back to exactly `x`.
inline std::string format_double(double x)
{
    std::array<char, 32> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
    if (res.ec != std::errc())
        throw NumericalError("could not format a double");
    return std::string(buf.data(), res.ptr);
}

} // namespace spde
