#include "sci/theory.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "sci/error.hpp"
#include "sci/spectrum.hpp"

namespace sci {

double bessel_j(int t, double x) {
  if (t < 0) throw InvalidArgument("bessel_j needs a non-negative order");
  if (!(std::abs(x) <= kBesselWindow)) throw InvalidArgument("bessel_j argument outside |x| <= 20");
  if (x == 0.0) return t == 0 ? 1.0 : 0.0;
  // Terms peak near k = |x|/2 at ~1e7 for |x| = 20; quad precision keeps the
  // cancellation error far below 1e-12.
  using Q = __float128;
  const Q h = static_cast<Q>(x) / 2;
  Q term = 1;
  for (int i = 1; i <= t; ++i) term *= h / i;
  Q sum = term;
  const Q q = -h * h;
  for (int k = 1; k < 1000; ++k) {
    term *= q / (static_cast<Q>(k) * static_cast<Q>(k + t));
    sum += term;
    const Q at = term < 0 ? -term : term, as = sum < 0 ? -sum : sum;
    if (k > std::abs(x) && (at <= as * static_cast<Q>(1e-16) || at < static_cast<Q>(1e-40))) break;
  }
  return static_cast<double>(sum);
}

double bessel_j_signed(int t, double x) {
  const double j = bessel_j(std::abs(t), x);
  return t < 0 && (t & 1) ? -j : j;
}

std::vector<HarmonicPrediction> predict_harmonics(std::span<const double> w, std::span<const double> omega,
                                                  int max_order) {
  if (max_order < 1) throw InvalidArgument("max_order must be >= 1");
  if (w.size() != omega.size()) throw InvalidArgument("one frequency per weight expected");
  const std::size_t K = w.size();
  const int span = 2 * max_order + 1;
  // j[k][t + max_order] = J_t(W_k)
  std::vector<std::vector<double>> j(K, std::vector<double>(static_cast<std::size_t>(span)));
  for (std::size_t k = 0; k < K; ++k)
    for (int t = -max_order; t <= max_order; ++t)
      j[k][static_cast<std::size_t>(t + max_order)] = bessel_j_signed(t, w[k]);

  std::vector<HarmonicPrediction> out;
  std::vector<int> t(K, -max_order);
  while (true) {
    double c = 1.0, f = 0.0;
    for (std::size_t k = 0; k < K && c != 0.0; ++k) {
      c *= j[k][static_cast<std::size_t>(t[k] + max_order)];
      f += t[k] * omega[k];
    }
    if (c != 0.0) out.push_back({t, f, c});
    std::size_t k = 0;
    while (k < K && ++t[k] > max_order) t[k++] = -max_order;
    if (k == K) break;
  }
  return out;
}

SpectrumPrediction predict_spectrum(std::span<const double> w, std::span<const double> omega, int max_order) {
  SpectrumPrediction p;
  p.terms = predict_harmonics(w, omega, max_order);
  std::vector<SpectralLine> raw;
  for (const auto& h : p.terms) raw.push_back({std::abs(h.frequency), h.frequency < 0 ? -h.coefficient : h.coefficient});
  std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.frequency < b.frequency; });
  for (const auto& l : raw) {
    if (!p.lines.empty() && std::abs(p.lines.back().frequency - l.frequency) <= 1e-9 * std::max(1.0, l.frequency))
      p.lines.back().amplitude += l.amplitude;
    else
      p.lines.push_back(l);
  }
  // sin(0 v) vanishes
  if (!p.lines.empty() && p.lines.front().frequency <= 1e-9) p.lines.front().amplitude = 0.0;
  // A dropped tuple has some |t_k| > max_order; bound it by that factor times
  // the largest factor of every other input.
  const std::size_t K = w.size();
  std::vector<double> peak(K, 0.0), tail(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    for (int t = 0; t <= max_order; ++t) peak[k] = std::max(peak[k], std::abs(bessel_j(t, w[k])));
    for (int t = max_order + 1; t <= max_order + 60; ++t) tail[k] = std::max(tail[k], std::abs(bessel_j(t, w[k])));
  }
  for (std::size_t k = 0; k < K; ++k) {
    double b = tail[k];
    for (std::size_t i = 0; i < K; ++i)
      if (i != k) b *= peak[i];
    p.truncation_bound = std::max(p.truncation_bound, b);
  }
  return p;
}

std::vector<double> measured_harmonics(double beta, std::size_t S, std::size_t k, int max_order) {
  if (S == 0 || k == 0 || max_order < 0 || static_cast<std::size_t>(max_order) * k >= S / 2)
    throw InvalidArgument("harmonics must stay below the Nyquist bin");
  std::vector<std::complex<double>> x(S);
  for (std::size_t n = 0; n < S; ++n)
    x[n] = std::sin(beta * std::sin(2.0 * std::numbers::pi * static_cast<double>(k * n) / static_cast<double>(S)));
  dft_inplace(x, {S}, 1);
  std::vector<double> a;
  for (int m = 0; m <= max_order; ++m) a.push_back(-2.0 * x[static_cast<std::size_t>(m) * k].imag() / static_cast<double>(S));
  return a;
}

double measure_concentration(const FunnelNetwork& net, std::size_t S, std::size_t band, int max_order) {
  const std::size_t N = net.spec().in_dim;
  if (N != 1 && N != 2) throw InvalidArgument("concentration is measured on 1-D and 2-D networks");
  if (net.spec().out_dim() != 1) throw InvalidArgument("concentration needs a single output");
  if (S < 8) throw InvalidArgument("grid too small");
  if (max_order < 1) throw InvalidArgument("max_order must be >= 1");

  // Grid step 2/S: bin b <-> angular frequency pi b.
  const auto om = net.frequencies();
  const std::size_t K = om.size() / N;
  double reach = 0;
  for (std::size_t k = 0; k < K; ++k)
    for (std::size_t a = 0; a < N; ++a) reach = std::max(reach, std::abs(om[k * N + a]));
  const double nyquist_bin = static_cast<double>(S) / 2.0;
  if (max_order * reach / std::numbers::pi + static_cast<double>(band) >= nyquist_bin)
    throw NumericError("aliasing guard: harmonics reach the grid's Nyquist frequency");

  const std::size_t total = N == 1 ? S : S * S;
  std::vector<double> coords(total * N);
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t r = i;
    for (std::size_t a = N; a-- > 0;) {
      coords[i * N + a] = -1.0 + 2.0 * static_cast<double>(r % S) / static_cast<double>(S);
      r /= S;
    }
  }
  const auto y = forward(net, coords);
  double mean = 0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(total);
  std::vector<double> hann(S);
  for (std::size_t n = 0; n < S; ++n)
    hann[n] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / static_cast<double>(S));
  std::vector<std::complex<double>> x(total);
  for (std::size_t i = 0; i < total; ++i) {
    double win = N == 1 ? hann[i] : hann[i / S] * hann[i % S];
    x[i] = (y[i] - mean) * win;
  }
  Dims dims(N, S);
  dft_inplace(x, dims, 1);

  // Mark bins within +-band of every reachable combination.
  std::vector<char> mask(total, 0);
  auto mark = [&](const std::vector<double>& f) {
    std::vector<long> c(N);
    for (std::size_t a = 0; a < N; ++a) c[a] = std::lround(f[a] / std::numbers::pi);
    const long b = static_cast<long>(band);
    const long s = static_cast<long>(S);
    if (N == 1) {
      for (long d = -b; d <= b; ++d) mask[static_cast<std::size_t>(((c[0] + d) % s + s) % s)] = 1;
    } else {
      for (long d0 = -b; d0 <= b; ++d0)
        for (long d1 = -b; d1 <= b; ++d1)
          mask[static_cast<std::size_t>(((c[0] + d0) % s + s) % s) * S +
               static_cast<std::size_t>(((c[1] + d1) % s + s) % s)] = 1;
    }
  };
  // Depth-first enumeration of integer combinations with sum |t_k| <= max_order.
  std::vector<double> f(N, 0.0);
  auto rec = [&](auto&& self, std::size_t k, int left) -> void {
    if (k == K) {
      mark(f);
      return;
    }
    for (int t = -left; t <= left; ++t) {
      for (std::size_t a = 0; a < N; ++a) f[a] += t * om[k * N + a];
      self(self, k + 1, left - std::abs(t));
      for (std::size_t a = 0; a < N; ++a) f[a] -= t * om[k * N + a];
    }
  };
  rec(rec, 0, max_order);

  double in = 0, all = 0;
  for (std::size_t i = 1; i < total; ++i) {
    const double e = std::norm(x[i]);
    all += e;
    if (mask[i]) in += e;
  }
  if (all == 0) return 1.0;
  return in / all;
}

}  // namespace sci
