#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sci {

// Layer widths of a sinusoidal MLP. widths[k] is the output width of affine
// layer k; the last entry is the output dimension. Every layer but the last
// is followed by sin(w0 * .).
struct ArchitectureSpec {
  std::size_t in_dim = 3;
  std::vector<std::size_t> widths;
  double w0 = 20.0;
  double fr = 2.2;

  std::size_t out_dim() const { return widths.empty() ? 0 : widths.back(); }
  std::size_t layer_count() const { return widths.size(); }
  std::size_t parameter_count() const;
  bool operator==(const ArchitectureSpec&) const = default;
};

std::size_t parameter_count(std::size_t in_dim, std::span<const std::size_t> widths);

class FunnelNetwork {
 public:
  struct Layer {
    std::size_t in = 0, out = 0;
    std::span<double> weights;  // out x in, row-major
    std::span<double> bias;
  };
  struct ConstLayer {
    std::size_t in = 0, out = 0;
    std::span<const double> weights;
    std::span<const double> bias;
  };

  FunnelNetwork() = default;
  // All parameters zero.
  explicit FunnelNetwork(ArchitectureSpec spec);

  const ArchitectureSpec& spec() const { return spec_; }
  std::size_t layer_count() const { return spec_.widths.size(); }
  Layer layer(std::size_t l);
  ConstLayer layer(std::size_t l) const;

  // Flat storage: for each layer, weights (row-major) then bias.
  std::span<double> parameters() { return params_; }
  std::span<const double> parameters() const { return params_; }
  std::size_t parameter_count() const { return params_.size(); }

  // Effective first-layer frequencies w0 * W0 (rows x in_dim, row-major).
  std::vector<double> frequencies() const;

  bool operator==(const FunnelNetwork& o) const { return spec_ == o.spec_ && params_ == o.params_; }

 private:
  ArchitectureSpec spec_;
  std::vector<double> params_;
  std::vector<std::size_t> offsets_;  // start of each layer in params_
};

// Sinusoidal-network initialization: first layer U(-1/in, 1/in) (so the
// effective frequencies w0*W lie in [-w0/in, w0/in]); later layers
// U(-sqrt(6/fan_in)/w0, +sqrt(6/fan_in)/w0); biases zero.
FunnelNetwork init_network(const ArchitectureSpec& spec, std::uint64_t seed);

// Batched evaluation. `coords` holds n points of in_dim values each,
// `out` receives n x out_dim values. Points are processed in fixed tiles, in
// parallel across tiles; every point gets the same bits as a one-point call.
void forward(const FunnelNetwork& net, std::span<const double> coords, std::span<double> out);
std::vector<double> forward(const FunnelNetwork& net, std::span<const double> coords);
// Single-threaded reference of the same kernel.
void forward_serial(const FunnelNetwork& net, std::span<const double> coords, std::span<double> out);
// Single-precision evaluation (decode path); parameters are rounded to float.
void forward_f32(const FunnelNetwork& net, std::span<const float> coords, std::span<float> out);

// Plain per-point evaluation with std::sin, one layer at a time. Independent
// of the batched kernels; used to check them.
std::vector<double> forward_reference(const FunnelNetwork& net, std::span<const double> point);

}  // namespace sci
