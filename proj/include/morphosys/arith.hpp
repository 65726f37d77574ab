#pragma once

#include <morphosys/errors.hpp>

#include <cstdint>
#include <limits>
#include <numeric>

namespace morphosys {

/// lcm(a, b); throws HorizonOverflow when the result exceeds `cap`.
inline std::int64_t checked_lcm(std::int64_t a, std::int64_t b,
                                std::int64_t cap = std::numeric_limits<std::int64_t>::max()) {
    const std::int64_t g = std::gcd(a, b);
    const __int128 l = static_cast<__int128>(a / g) * b;
    if (l > cap) {
        throw HorizonOverflow(l > std::numeric_limits<long long>::max()
                                  ? std::numeric_limits<long long>::max()
                                  : static_cast<long long>(l),
                              cap);
    }
    return static_cast<std::int64_t>(l);
}

inline std::int64_t ceil_div(std::int64_t num, std::int64_t den) {
    return num / den + ((num % den != 0 && ((num > 0) == (den > 0))) ? 1 : 0);
}

} // namespace morphosys
