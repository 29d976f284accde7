#include "sci/inr.hpp"

#include <cmath>

#include "kernels.hpp"
#include "sci/error.hpp"
#include "sci/rng.hpp"

namespace sci {

std::size_t parameter_count(std::size_t in_dim, std::span<const std::size_t> widths) {
  std::size_t total = 0, prev = in_dim;
  for (auto w : widths) {
    total += (prev + 1) * w;
    prev = w;
  }
  return total;
}

std::size_t ArchitectureSpec::parameter_count() const { return sci::parameter_count(in_dim, widths); }

FunnelNetwork::FunnelNetwork(ArchitectureSpec spec) : spec_(std::move(spec)) {
  if (spec_.in_dim == 0 || spec_.widths.empty())
    throw InvalidArgument("network needs a positive input dimension and at least one layer");
  for (auto w : spec_.widths)
    if (w == 0) throw InvalidArgument("layer widths must be positive");
  std::size_t prev = spec_.in_dim, off = 0;
  for (auto w : spec_.widths) {
    offsets_.push_back(off);
    off += (prev + 1) * w;
    prev = w;
  }
  params_.assign(off, 0.0);
}

FunnelNetwork::Layer FunnelNetwork::layer(std::size_t l) {
  const std::size_t in = l == 0 ? spec_.in_dim : spec_.widths[l - 1], out = spec_.widths.at(l);
  double* base = params_.data() + offsets_[l];
  return {in, out, {base, in * out}, {base + in * out, out}};
}

FunnelNetwork::ConstLayer FunnelNetwork::layer(std::size_t l) const {
  const std::size_t in = l == 0 ? spec_.in_dim : spec_.widths[l - 1], out = spec_.widths.at(l);
  const double* base = params_.data() + offsets_[l];
  return {in, out, {base, in * out}, {base + in * out, out}};
}

std::vector<double> FunnelNetwork::frequencies() const {
  auto l0 = layer(0);
  std::vector<double> f(l0.weights.begin(), l0.weights.end());
  for (auto& x : f) x *= spec_.w0;
  return f;
}

FunnelNetwork init_network(const ArchitectureSpec& spec, std::uint64_t seed) {
  FunnelNetwork net(spec);
  Rng rng(seed);
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    auto L = net.layer(l);
    const double bound = l == 0 ? 1.0 / static_cast<double>(L.in)
                                : std::sqrt(6.0 / static_cast<double>(L.in)) / spec.w0;
    for (auto& w : L.weights) w = rng.uniform(-bound, bound);
  }
  return net;
}

namespace {

std::vector<kernel::LayerShape> shapes(const FunnelNetwork& net) {
  std::vector<kernel::LayerShape> s;
  std::size_t off = 0;
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    auto L = net.layer(l);
    s.push_back({L.in, L.out, off, off + L.in * L.out});
    off += (L.in + 1) * L.out;
  }
  return s;
}

template <typename T>
void run_tiles(const std::vector<kernel::LayerShape>& sh, const T* params, T w0, const T* coords,
               std::size_t n, T* out, bool parallel) {
  const std::size_t in = sh.front().in, od = sh.back().out;
  const auto tiles = static_cast<std::ptrdiff_t>((n + kernel::kTile - 1) / kernel::kTile);
  auto tile = [&](std::ptrdiff_t t, std::vector<std::vector<T>>& acts) {
    const std::size_t start = static_cast<std::size_t>(t) * kernel::kTile;
    const std::size_t len = std::min(kernel::kTile, n - start);
    kernel::forward_tile<T>(sh, params, w0, coords + start * in, len, out + start * od, acts, nullptr);
  };
  if (parallel) {
#pragma omp parallel
    {
      std::vector<std::vector<T>> acts;
#pragma omp for schedule(static)
      for (std::ptrdiff_t t = 0; t < tiles; ++t) tile(t, acts);
    }
  } else {
    std::vector<std::vector<T>> acts;
    for (std::ptrdiff_t t = 0; t < tiles; ++t) tile(t, acts);
  }
}

void check_io(const FunnelNetwork& net, std::size_t ncoords, std::size_t nout) {
  const std::size_t in = net.spec().in_dim, od = net.spec().out_dim();
  if (ncoords % in != 0)
    throw InvalidArgument("coordinate buffer length " + std::to_string(ncoords) +
                          " is not a multiple of in_dim " + std::to_string(in));
  if (nout != ncoords / in * od) throw InvalidArgument("output buffer has the wrong length");
}

}  // namespace

void forward(const FunnelNetwork& net, std::span<const double> coords, std::span<double> out) {
  check_io(net, coords.size(), out.size());
  run_tiles<double>(shapes(net), net.parameters().data(), net.spec().w0, coords.data(),
                    coords.size() / net.spec().in_dim, out.data(), true);
}

std::vector<double> forward(const FunnelNetwork& net, std::span<const double> coords) {
  std::vector<double> out(coords.size() / net.spec().in_dim * net.spec().out_dim());
  forward(net, coords, out);
  return out;
}

void forward_serial(const FunnelNetwork& net, std::span<const double> coords, std::span<double> out) {
  check_io(net, coords.size(), out.size());
  run_tiles<double>(shapes(net), net.parameters().data(), net.spec().w0, coords.data(),
                    coords.size() / net.spec().in_dim, out.data(), false);
}

void forward_f32(const FunnelNetwork& net, std::span<const float> coords, std::span<float> out) {
  check_io(net, coords.size(), out.size());
  std::vector<float> p(net.parameters().begin(), net.parameters().end());
  run_tiles<float>(shapes(net), p.data(), static_cast<float>(net.spec().w0), coords.data(),
                   coords.size() / net.spec().in_dim, out.data(), true);
}

std::vector<double> forward_reference(const FunnelNetwork& net, std::span<const double> point) {
  if (point.size() != net.spec().in_dim) throw InvalidArgument("point dimension mismatch");
  std::vector<double> a(point.begin(), point.end());
  for (std::size_t l = 0; l < net.layer_count(); ++l) {
    auto L = net.layer(l);
    std::vector<double> z(L.out);
    for (std::size_t o = 0; o < L.out; ++o) {
      double s = L.bias[o];
      for (std::size_t i = 0; i < L.in; ++i) s += L.weights[o * L.in + i] * a[i];
      z[o] = l + 1 < net.layer_count() ? std::sin(net.spec().w0 * s) : s;
    }
    a = std::move(z);
  }
  return a;
}

}  // namespace sci
