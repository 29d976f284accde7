#pragma once

#include <cstdint>

namespace sci {

// IEEE-754 binary16, round-to-nearest-even, directly from double (no
// intermediate float rounding).
std::uint16_t to_half(double x);
double half_to_double(std::uint16_t h);
float half_to_float(std::uint16_t h);

inline double round_to_half(double x) { return half_to_double(to_half(x)); }

}  // namespace sci
