#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sci/inr.hpp"

namespace sci {

inline constexpr double kBesselWindow = 20.0;

// J_t(x) for t >= 0 and |x| <= 20 by its ascending power series.
double bessel_j(int t, double x);
// Any integer order, J_{-t}(x) = (-1)^t J_t(x).
double bessel_j_signed(int t, double x);

// One term of sin(sum_k W_k sin(Omega_k v)) =
//   sum over t of prod_k J_{t_k}(W_k) * sin(sum_k t_k Omega_k v).
struct HarmonicPrediction {
  std::vector<int> t;
  double frequency = 0.0;
  double coefficient = 0.0;
};

// Every tuple with |t_k| <= max_order and a nonzero coefficient.
std::vector<HarmonicPrediction> predict_harmonics(std::span<const double> w, std::span<const double> omega,
                                                  int max_order);

// Amplitude of sin(f v) at f >= 0 after merging tuples of equal |frequency|
// (a negative frequency contributes with flipped sign).
struct SpectralLine {
  double frequency = 0.0;
  double amplitude = 0.0;
};

struct SpectrumPrediction {
  std::vector<HarmonicPrediction> terms;
  std::vector<SpectralLine> lines;  // ascending frequency
  double truncation_bound = 0.0;    // largest coefficient a dropped tuple can have
};

SpectrumPrediction predict_spectrum(std::span<const double> w, std::span<const double> omega, int max_order);

// DFT amplitudes of x_n = sin(beta sin(2 pi k n / S)) at bins m k, m = 0..max_order.
std::vector<double> measured_harmonics(double beta, std::size_t S, std::size_t k, int max_order);

// Fraction of non-DC output energy of a 1-D or 2-D network, sampled on an
// S (x S) grid over [-1, 1), that falls within +-band bins of some
// combination sum t_k Omega_k with sum |t_k| <= max_order of its
// first-layer frequencies. Throws NumericError when such a combination
// reaches the grid's Nyquist frequency.
double measure_concentration(const FunnelNetwork& net, std::size_t grid_size, std::size_t band, int max_order);

}  // namespace sci
