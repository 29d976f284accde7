#include "sci/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace sci {

namespace {

bool is_pow2(std::size_t n) { return n && !(n & (n - 1)); }

std::vector<std::complex<double>> twiddles(std::size_t n) {
  std::vector<std::complex<double>> w(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    w[k] = {std::cos(ang), std::sin(ang)};
  }
  return w;
}

void fft_radix2(std::vector<std::complex<double>>& a, const std::vector<std::complex<double>>& w) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t step = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w[k * step];
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

void dft_direct(std::vector<std::complex<double>>& a, const std::vector<std::complex<double>>& w,
                std::vector<std::complex<double>>& tmp) {
  const std::size_t n = a.size();
  tmp.assign(n, {});
  for (std::size_t k = 0; k < n; ++k) {
    std::complex<double> s{};
    for (std::size_t j = 0; j < n; ++j) s += a[j] * w[(j * k) % n];
    tmp[k] = s;
  }
  a.swap(tmp);
}

}  // namespace

void dft_inplace(std::vector<std::complex<double>>& data, const Dims& dims, std::size_t channels) {
  const std::size_t rank = dims.size();
  std::vector<std::complex<double>> line, tmp;
  for (std::size_t axis = 0; axis < rank; ++axis) {
    const std::size_t len = dims[axis];
    if (len == 1) continue;
    std::size_t inner = channels;
    for (std::size_t a = axis + 1; a < rank; ++a) inner *= dims[a];
    std::size_t outer = 1;
    for (std::size_t a = 0; a < axis; ++a) outer *= dims[a];
    const auto w = twiddles(len);
    line.resize(len);
    for (std::size_t o = 0; o < outer; ++o) {
      for (std::size_t i = 0; i < inner; ++i) {
        const std::size_t base = o * len * inner + i;
        for (std::size_t k = 0; k < len; ++k) line[k] = data[base + k * inner];
        if (is_pow2(len))
          fft_radix2(line, w);
        else
          dft_direct(line, w, tmp);
        for (std::size_t k = 0; k < len; ++k) data[base + k * inner] = line[k];
      }
    }
  }
}

std::vector<std::complex<double>> dft(const Field& block) {
  for (double v : block.storage())
    if (!std::isfinite(v)) throw InvalidArgument("non-finite sample in spectrum input");
  std::vector<std::complex<double>> c(block.storage().begin(), block.storage().end());
  dft_inplace(c, block.dims(), block.channels());
  return c;
}

Spectrum dft_magnitude(const Field& block) {
  auto c = dft(block);
  Spectrum s{block.dims(), block.channels(), std::vector<double>(c.size())};
  for (std::size_t i = 0; i < c.size(); ++i) s.magnitudes[i] = std::abs(c[i]);
  return s;
}

ConcentrationScore concentration(const Spectrum& spec, std::size_t M, int power) {
  if (M == 0) throw InvalidArgument("concentration needs M >= 1");
  if (power != 1 && power != 2) throw InvalidArgument("concentration power must be 1 or 2");
  std::vector<double> v(spec.magnitudes);
  if (power == 2)
    for (auto& x : v) x *= x;
  const std::size_t m = std::min(M, v.size());
  const double total = std::accumulate(v.begin(), v.end(), 0.0);
  if (!(total > 0.0)) return {1.0, M, true};
  // Ties among equal values do not change the sum, so the order of the partial
  // sort only matters for reproducibility of the summation itself.
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(m), idx.end(),
                    [&](std::size_t a, std::size_t b) { return v[a] > v[b] || (v[a] == v[b] && a < b); });
  double top = 0.0;
  for (std::size_t i = 0; i < m; ++i) top += v[idx[i]];
  double d = m == v.size() ? 1.0 : top / total;
  return {std::min(d, 1.0), M, false};
}

ConcentrationScore block_concentration(const Field& block, std::size_t M, int power) {
  return concentration(dft_magnitude(block), M, power);
}

}  // namespace sci
