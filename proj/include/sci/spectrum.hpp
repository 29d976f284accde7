#pragma once

#include <complex>
#include <cstddef>
#include <vector>

#include "sci/volume.hpp"

namespace sci {

// |DFT coefficient| per frequency bin, unnormalized forward transform over the
// spatial axes, one transform per channel (same interleaved layout as input).
struct Spectrum {
  Dims dims;
  std::size_t channels = 1;
  std::vector<double> magnitudes;
};

struct ConcentrationScore {
  double value = 1.0;
  std::size_t M = 1;
  bool degenerate = false;  // all-zero spectrum; value forced to 1
};

// In-place complex DFT along every axis of an interleaved grid. Power-of-two
// axes use an iterative radix-2 FFT, other lengths a direct DFT.
void dft_inplace(std::vector<std::complex<double>>& data, const Dims& dims, std::size_t channels);

std::vector<std::complex<double>> dft(const Field& block);

Spectrum dft_magnitude(const Field& block);

// Sum of the M largest spectrum values over the sum of all values. `power`
// selects magnitudes (1) or squared magnitudes (2).
ConcentrationScore concentration(const Spectrum& spec, std::size_t M, int power = 1);

ConcentrationScore block_concentration(const Field& block, std::size_t M, int power = 1);

}  // namespace sci
