#include "sci/metrics.hpp"

#include <array>
#include <cmath>

#include "sci/error.hpp"

namespace sci {

namespace {

void check_pair(const Volume& a, const Volume& b) {
  if (a.dims() != b.dims() || a.channels() != b.channels())
    throw InvalidArgument("shape mismatch: " + format_dims(a.dims()) + " vs " + format_dims(b.dims()));
  if (a.dtype != b.dtype) throw InvalidArgument("dtype mismatch");
}

constexpr int kWin = 11;

std::array<double, kWin> gaussian_taps() {
  std::array<double, kWin> w{};
  double s = 0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - kWin / 2;
    w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2 * 1.5 * 1.5));
    s += w[static_cast<std::size_t>(i)];
  }
  for (auto& x : w) x /= s;
  return w;
}

// Valid-mode separable filter of an H x W image.
std::vector<double> filter2(const std::vector<double>& img, std::size_t H, std::size_t W,
                            const std::array<double, kWin>& w) {
  const std::size_t Wo = W - kWin + 1, Ho = H - kWin + 1;
  std::vector<double> tmp(H * Wo), out(Ho * Wo);
  for (std::size_t y = 0; y < H; ++y)
    for (std::size_t x = 0; x < Wo; ++x) {
      double s = 0;
      for (std::size_t k = 0; k < kWin; ++k) s += w[k] * img[y * W + x + k];
      tmp[y * Wo + x] = s;
    }
  for (std::size_t y = 0; y < Ho; ++y)
    for (std::size_t x = 0; x < Wo; ++x) {
      double s = 0;
      for (std::size_t k = 0; k < kWin; ++k) s += w[k] * tmp[(y + k) * Wo + x];
      out[y * Wo + x] = s;
    }
  return out;
}

}  // namespace

double psnr(const Volume& a, const Volume& b) {
  check_pair(a, b);
  const auto& x = a.grid.storage();
  const auto& y = b.grid.storage();
  double se = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = static_cast<double>(x[i]) - static_cast<double>(y[i]);
    se += d * d;
  }
  if (se == 0) return kInfinitePsnr;
  const double r = dtype_max(a.dtype);
  return 10.0 * std::log10(r * r / (se / static_cast<double>(x.size())));
}

double ssim(const Volume& a, const Volume& b) {
  check_pair(a, b);
  const Dims& d = a.dims();
  if (d.size() < 2) throw InvalidArgument("ssim needs at least two axes");
  const std::size_t H = d[d.size() - 2], W = d[d.size() - 1];
  if (H < kWin || W < kWin) throw InvalidArgument("ssim needs slices of at least 11x11");
  const std::size_t slices = d.size() == 3 ? d[0] : 1, ch = a.channels();
  const double r = dtype_max(a.dtype), c1 = (0.01 * r) * (0.01 * r), c2 = (0.03 * r) * (0.03 * r);
  const auto w = gaussian_taps();
  const auto& xa = a.grid.storage();
  const auto& xb = b.grid.storage();

  double total = 0;
  std::vector<double> p(H * W), q(H * W), pp(H * W), qq(H * W), pq(H * W);
  for (std::size_t s = 0; s < slices; ++s)
    for (std::size_t c = 0; c < ch; ++c) {
      for (std::size_t i = 0; i < H * W; ++i) {
        p[i] = xa[(s * H * W + i) * ch + c];
        q[i] = xb[(s * H * W + i) * ch + c];
        pp[i] = p[i] * p[i];
        qq[i] = q[i] * q[i];
        pq[i] = p[i] * q[i];
      }
      const auto mp = filter2(p, H, W, w), mq = filter2(q, H, W, w);
      const auto spp = filter2(pp, H, W, w), sqq = filter2(qq, H, W, w), spq = filter2(pq, H, W, w);
      double acc = 0;
      for (std::size_t i = 0; i < mp.size(); ++i) {
        const double vp = spp[i] - mp[i] * mp[i], vq = sqq[i] - mq[i] * mq[i], cv = spq[i] - mp[i] * mq[i];
        acc += ((2 * mp[i] * mq[i] + c1) * (2 * cv + c2)) /
               ((mp[i] * mp[i] + mq[i] * mq[i] + c1) * (vp + vq + c2));
      }
      total += acc / static_cast<double>(mp.size());
    }
  return total / static_cast<double>(slices * ch);
}

double accuracy(const Volume& a, const Volume& b, double tau) {
  check_pair(a, b);
  const auto& x = a.grid.storage();
  const auto& y = b.grid.storage();
  std::size_t agree = 0;
#pragma omp simd reduction(+ : agree)
  for (std::size_t i = 0; i < x.size(); ++i) agree += (x[i] >= tau) == (y[i] >= tau);
  return static_cast<double>(agree) / static_cast<double>(x.size());
}

double bpv(std::size_t archive_bytes, std::size_t voxels) {
  if (voxels == 0) throw InvalidArgument("bpv of an empty volume");
  return 8.0 * static_cast<double>(archive_bytes) / static_cast<double>(voxels);
}

RateReport evaluate(const Volume& orig, const Volume& recon, std::size_t archive_bytes,
                    std::span<const double> thresholds) {
  RateReport r;
  r.bpv = bpv(archive_bytes, orig.voxels());
  r.psnr_db = psnr(orig, recon);
  r.ssim = ssim(orig, recon);
  for (double t : thresholds) r.accuracy.emplace_back(t, accuracy(orig, recon, t));
  return r;
}

}  // namespace sci
