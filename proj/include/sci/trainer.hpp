#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "sci/inr.hpp"
#include "sci/volume.hpp"

namespace sci {

struct TrainConfig {
  double lr = 1e-3;
  std::size_t iterations = 5000;
  std::size_t batch_size = 4096;  // capped at the block's voxel count
  std::uint64_t seed = 0;
  // Candidate initializations; each trains for a tenth of the iterations and
  // the one with the lowest block MSE continues.
  std::size_t starts = 3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Mean squared error over the batch (and output channels) and its exact
// gradient with respect to every parameter, written into `grads`.
double backward(const FunnelNetwork& net, std::span<const double> coords,
                std::span<const double> targets, std::span<double> grads);

class AdamaxState {
 public:
  explicit AdamaxState(std::size_t n = 0) : m_(n, 0.0), u_(n, 0.0) {}

  // m <- b1 m + (1-b1) g;  u <- max(b2 u, |g|);
  // theta <- theta - lr / (1 - b1^t) * m / (u + eps)
  void step(std::span<double> params, std::span<const double> grads, const TrainConfig& cfg);

  std::span<const double> first_moment() const { return m_; }
  std::span<const double> norm() const { return u_; }
  std::uint64_t steps() const { return t_; }

 private:
  std::vector<double> m_, u_;
  std::uint64_t t_ = 0;
  double beta1_pow_ = 1.0;
};

// Where a block sits, for mapping voxel centers to network inputs.
struct CoordFrame {
  // Empty: the block's own extent maps to [-1, 1]^N. Otherwise voxel centers
  // are mapped through the full volume (global-coordinate ablation).
  Dims volume_dims;
  std::vector<std::size_t> origin;
};

// Voxel-center coordinates of a block, point-major, row-major voxel order.
std::vector<double> block_coordinates(const Dims& extent, const CoordFrame& frame = {});
std::vector<float> block_coordinates_f32(const Dims& extent, const CoordFrame& frame = {});

struct FitResult {
  FunnelNetwork net;
  double final_loss = 0.0;           // full-block MSE of the returned parameters
  std::vector<double> batch_losses;  // one entry per iteration
  int retries = 0;
};

using ProgressFn = std::function<void(std::size_t iteration, double batch_loss)>;

// Fits a network of shape `arch` to a normalized block. Mini-batches are drawn
// without replacement from a per-epoch shuffle. The output bias starts at the
// per-channel block mean. With several starts, each candidate trains for a
// tenth of the iterations and the best continues. A diverged run is retried
// once with lr/10 and a fresh seed before giving up.
FitResult fit_block(const Field& block, const ArchitectureSpec& arch, const TrainConfig& cfg,
                    const CoordFrame& frame = {}, const ProgressFn& progress = {});

double block_mse(const FunnelNetwork& net, const Field& block, const CoordFrame& frame = {});

}  // namespace sci
