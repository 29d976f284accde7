#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "sci/error.hpp"
#include "sci/rng.hpp"
#include "sci/volume.hpp"

namespace sci::fixtures {

inline std::uint16_t clamp_round(double x, DType t) {
  return static_cast<std::uint16_t>(std::clamp(std::nearbyint(x), 0.0, dtype_max(t)));
}

// n^3 volume of `count` plane waves with distinct integer wave vectors
// (cycles per volume) drawn from 1..max_freq per axis, equal amplitudes, peak scaled to
// 80% of the half range.
inline Volume plane_waves(std::size_t n, DType t, std::size_t count, std::uint64_t seed, int max_freq = 3) {
  Rng rng(seed);
  struct Wave {
    double k[3], phase;
  };
  if (count > static_cast<std::size_t>(max_freq * max_freq * max_freq)) throw InvalidArgument("too many waves");
  std::vector<Wave> waves;
  while (waves.size() < count) {
    Wave w;
    for (double& k : w.k) k = static_cast<double>(1 + rng.below(static_cast<std::uint64_t>(max_freq)));
    w.phase = rng.uniform(0.0, 2 * std::numbers::pi);
    bool fresh = true;
    for (const auto& o : waves) fresh = fresh && !(o.k[0] == w.k[0] && o.k[1] == w.k[1] && o.k[2] == w.k[2]);
    if (fresh) waves.push_back(w);
  }
  std::vector<double> f(n * n * n);
  double peak = 0;
  for (std::size_t z = 0; z < n; ++z)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        double s = 0;
        for (const auto& w : waves)
          s += std::sin(2 * std::numbers::pi * (w.k[0] * z + w.k[1] * y + w.k[2] * x) / n + w.phase);
        f[(z * n + y) * n + x] = s;
        peak = std::max(peak, std::abs(s));
      }
  const double half = dtype_max(t) / 2;
  std::vector<std::uint16_t> d(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) d[i] = clamp_round(half + 0.8 * half * f[i] / peak, t);
  return make_volume({n, n, n}, t, 1, std::move(d));
}

inline Volume constant_volume(std::size_t n, DType t, std::uint16_t value) {
  return make_volume({n, n, n}, t, 1, std::vector<std::uint16_t>(n * n * n, value));
}

// 64^3 u8 volume: octant 0 holds a smooth one-cycle wave, octant 7 a
// texture whose eight 16^3 sub-octants each sum 1 to 8 distinct plane waves
// (1 or 2 cycles per 16 voxels on each axis, rescaled to a common peak), the remaining
// octants are flat at distinct levels.
inline Volume two_octant(std::uint64_t seed) {
  constexpr std::size_t n = 64, h = 32, q = 16;
  Rng rng(seed);
  struct Wave {
    double k[3], phase;
  };
  std::vector<Wave> tex[8];
  for (auto& waves : tex) {
    const std::size_t count = 1 + rng.below(8);
    while (waves.size() < count) {
      Wave w;
      for (double& k : w.k) k = static_cast<double>(1 + rng.below(2));
      w.phase = rng.uniform(0.0, 2 * std::numbers::pi);
      bool fresh = true;
      for (const auto& o : waves) fresh = fresh && !(o.k[0] == w.k[0] && o.k[1] == w.k[1] && o.k[2] == w.k[2]);
      if (fresh) waves.push_back(w);
    }
  }
  const double smooth_phase = rng.uniform(0.0, 2 * std::numbers::pi);
  std::vector<double> f(n * n * n);
  double peak[8] = {};
  for (std::size_t z = 0; z < n; ++z)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        const std::size_t oct = (z / h) * 4 + (y / h) * 2 + x / h;
        double v;
        if (oct == 0) {
          v = 90 * std::sin(2 * std::numbers::pi * static_cast<double>(x + y + z) / h + smooth_phase);
        } else if (oct == 7) {
          const std::size_t s = ((z % h) / q) * 4 + ((y % h) / q) * 2 + (x % h) / q;
          v = 0;
          for (const auto& w : tex[s])
            v += std::sin(2 * std::numbers::pi * (w.k[0] * z + w.k[1] * y + w.k[2] * x) / q + w.phase);
          peak[s] = std::max(peak[s], std::abs(v));
        } else {
          v = 40.0 + 25.0 * static_cast<double>(oct);
        }
        f[(z * n + y) * n + x] = v;
      }
  std::vector<std::uint16_t> d(f.size());
  for (std::size_t z = 0; z < n; ++z)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        const std::size_t i = (z * n + y) * n + x, oct = (z / h) * 4 + (y / h) * 2 + x / h;
        double v = f[i];
        if (oct == 0) v += 128;
        if (oct == 7) v = 128 + 90 * v / peak[((z % h) / q) * 4 + ((y % h) / q) * 2 + (x % h) / q];
        d[i] = clamp_round(v, DType::U8);
      }
  return make_volume({n, n, n}, DType::U8, 1, std::move(d));
}

}  // namespace sci::fixtures
