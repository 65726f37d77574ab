#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>

namespace morphosys {

/// Exact rational used for every utilization comparison that decides packing.
using Rational = boost::multiprecision::cpp_rational;

inline Rational make_ratio(std::int64_t num, std::int64_t den) {
    return Rational(boost::multiprecision::cpp_int(num), boost::multiprecision::cpp_int(den));
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

} // namespace morphosys
