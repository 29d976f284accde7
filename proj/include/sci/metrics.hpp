#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "sci/volume.hpp"

namespace sci {

inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

// 10 log10(R^2 / MSE) with R the dtype maximum; +inf for identical inputs.
double psnr(const Volume& a, const Volume& b);

// Mean SSIM over 2-D slices along the first axis (the whole image for 2-D
// volumes) and channels. Gaussian window of 11 taps, sigma 1.5, valid region
// only; C1 = (0.01 R)^2, C2 = (0.03 R)^2.
double ssim(const Volume& a, const Volume& b);

// Fraction of values whose binarizations (x >= tau) agree.
double accuracy(const Volume& a, const Volume& b, double tau);

double bpv(std::size_t archive_bytes, std::size_t voxels);

struct RateReport {
  double bpv = 0.0;
  double psnr_db = 0.0;
  double ssim = 0.0;
  std::vector<std::pair<double, double>> accuracy;  // (tau, accuracy)
};

RateReport evaluate(const Volume& orig, const Volume& recon, std::size_t archive_bytes,
                    std::span<const double> thresholds);

}  // namespace sci
