#include <cmath>
#include <cstdint>
#include <vector>

#include "sci/codec.hpp"
#include "sci/error.hpp"

namespace sci {

Volume deblock(const Volume& v, std::span<const BlockRegion> regions, double tau) {
  const Dims& dims = v.dims();
  const std::size_t n = dims.size(), ch = v.channels(), voxels = v.voxels();
  if (tau <= 0.0 || regions.size() < 2) return v;

  std::vector<std::uint32_t> label(voxels, 0);
  for (std::size_t k = 0; k < regions.size(); ++k) {
    check_region(dims, regions[k]);
    for_each_row(dims, 1, regions[k], [&](std::size_t, std::size_t vo, std::size_t len) {
      std::fill_n(label.begin() + static_cast<std::ptrdiff_t>(vo), len, static_cast<std::uint32_t>(k));
    });
  }

  std::vector<std::size_t> stride(n);
  for (std::size_t a = n, s = 1; a-- > 0;) {
    stride[a] = s;
    s *= dims[a];
  }

  const auto& src = v.grid.storage();
  std::vector<double> sum(src.size(), 0.0);
  std::vector<std::uint16_t> count(src.size(), 0);
  const double half = tau / 2.0;

  for (std::size_t a = 0; a < n; ++a) {
    const std::size_t s = stride[a];
    for (std::size_t p0 = 0; p0 < voxels; ++p0) {
      const std::size_t i = (p0 / s) % dims[a];
      if (i == 0 || i + 2 >= dims[a]) continue;
      const std::size_t q0 = p0 + s;
      if (label[p0] == label[q0]) continue;
      const std::size_t p1 = p0 - s, q1 = q0 + s;
      for (std::size_t c = 0; c < ch; ++c) {
        const double P1 = src[p1 * ch + c], P0 = src[p0 * ch + c];
        const double Q0 = src[q0 * ch + c], Q1 = src[q1 * ch + c];
        if (!(std::abs(P0 - Q0) < tau && std::abs(P1 - P0) < half && std::abs(Q1 - Q0) < half)) continue;
        sum[p0 * ch + c] += (P1 + P0 + Q0) / 3.0;
        sum[q0 * ch + c] += (P0 + Q0 + Q1) / 3.0;
        ++count[p0 * ch + c];
        ++count[q0 * ch + c];
      }
    }
  }

  Volume out = v;
  auto& dst = out.grid.storage();
  for (std::size_t i = 0; i < dst.size(); ++i)
    if (count[i]) dst[i] = static_cast<std::uint16_t>(std::nearbyint(sum[i] / count[i]));
  return out;
}

}  // namespace sci
