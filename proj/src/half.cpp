#include "sci/half.hpp"

#include <bit>
#include <cmath>

namespace sci {

std::uint16_t to_half(double x) {
  const auto bits = std::bit_cast<std::uint64_t>(x);
  const auto sign = static_cast<std::uint16_t>((bits >> 48) & 0x8000u);
  const int exp = static_cast<int>((bits >> 52) & 0x7ff);
  const std::uint64_t mant = bits & ((std::uint64_t{1} << 52) - 1);
  if (exp == 0x7ff) return sign | (mant ? 0x7e00u : 0x7c00u);
  if (exp == 0) return sign;  // double subnormals are far below half range
  const int e = exp - 1023;
  if (e > 15) return sign | 0x7c00u;
  const std::uint64_t sig = (std::uint64_t{1} << 52) | mant;
  const int he = e < -14 ? -14 : e;
  const int shift = 42 + (he - e);
  if (shift > 63) return sign;
  std::uint64_t q = sig >> shift;
  const std::uint64_t rem = sig & ((std::uint64_t{1} << shift) - 1);
  const std::uint64_t halfway = std::uint64_t{1} << (shift - 1);
  if (rem > halfway || (rem == halfway && (q & 1u))) ++q;
  if (he == -14 && q < 2048) return sign | static_cast<std::uint16_t>(q);  // subnormal or min normal
  int field = he + 15;
  if (q == 2048) {
    q = 1024;
    ++field;
  }
  if (field >= 31) return sign | 0x7c00u;
  return sign | static_cast<std::uint16_t>((field << 10) | static_cast<int>(q - 1024));
}

double half_to_double(std::uint16_t h) {
  const double sign = (h & 0x8000u) ? -1.0 : 1.0;
  const int field = (h >> 10) & 0x1f;
  const int m = h & 0x3ff;
  if (field == 0) return sign * std::ldexp(static_cast<double>(m), -24);
  if (field == 31) return m ? std::nan("") : sign * INFINITY;
  return sign * std::ldexp(static_cast<double>(1024 + m), field - 25);
}

float half_to_float(std::uint16_t h) { return static_cast<float>(half_to_double(h)); }

}  // namespace sci
