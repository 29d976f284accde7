#include "sci/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>

#include "kernels.hpp"
#include "sci/error.hpp"
#include "sci/rng.hpp"

namespace sci {

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

struct Workspace {
  std::vector<std::vector<double>> acts, cosv;
  std::vector<double> out, g, ga;
};

// Accumulates the gradient of sum((y - t)^2) * scale over one tile.
double backward_tile(const std::vector<kernel::LayerShape>& sh, const double* params, double w0,
                     const double* coords, const double* targets, std::size_t n, double scale,
                     double* grads, Workspace& ws) {
  const std::size_t depth = sh.size(), od = sh.back().out;
  ws.out.resize(n * od);
  kernel::forward_tile<double>(sh, params, w0, coords, n, ws.out.data(), ws.acts, &ws.cosv);

  double sse = 0.0;
  ws.g.resize(od * n);
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t o = 0; o < od; ++o) {
      const double e = ws.out[j * od + o] - targets[j * od + o];
      sse += e * e;
      ws.g[o * n + j] = 2.0 * scale * e;
    }

  for (std::size_t l = depth; l-- > 0;) {
    const auto& L = sh[l];
    const double* a_prev = ws.acts[l].data();
    const double* W = params + L.w_off;
    double* gW = grads + L.w_off;
    double* gb = grads + L.b_off;
    for (std::size_t o = 0; o < L.out; ++o) {
      const double* go = ws.g.data() + o * n;
      double sb = 0.0;
#pragma omp simd reduction(+ : sb)
      for (std::size_t j = 0; j < n; ++j) sb += go[j];
      gb[o] += sb;
      for (std::size_t i = 0; i < L.in; ++i) {
        const double* ai = a_prev + i * n;
        double s = 0.0;
#pragma omp simd reduction(+ : s)
        for (std::size_t j = 0; j < n; ++j) s += go[j] * ai[j];
        gW[o * L.in + i] += s;
      }
    }
    if (l == 0) break;
    // dA_prev = W^T g, then through sin(w0 z): dz = dA * w0 * cos(w0 z).
    ws.ga.assign(L.in * n, 0.0);
    for (std::size_t o = 0; o < L.out; ++o) {
      const double* go = ws.g.data() + o * n;
      for (std::size_t i = 0; i < L.in; ++i) {
        const double w = W[o * L.in + i];
        double* gi = ws.ga.data() + i * n;
#pragma omp simd
        for (std::size_t j = 0; j < n; ++j) gi[j] += w * go[j];
      }
    }
    const double* c = ws.cosv[l - 1].data();
    const std::size_t cnt = L.in * n;
#pragma omp simd
    for (std::size_t j = 0; j < cnt; ++j) ws.ga[j] *= w0 * c[j];
    ws.g.swap(ws.ga);
  }
  return sse;
}

double backward_impl(const FunnelNetwork& net, const std::vector<kernel::LayerShape>& sh,
                     const double* coords, const double* targets, std::size_t n, double* grads,
                     std::size_t nparams, Workspace& ws) {
  std::fill(grads, grads + nparams, 0.0);
  const std::size_t in = net.spec().in_dim, od = net.spec().out_dim();
  const double scale = 1.0 / static_cast<double>(n * od);
  double sse = 0.0;
  for (std::size_t start = 0; start < n; start += kernel::kTile) {
    const std::size_t len = std::min(kernel::kTile, n - start);
    sse += backward_tile(sh, net.parameters().data(), net.spec().w0, coords + start * in,
                         targets + start * od, len, scale, grads, ws);
  }
  return sse * scale;
}

}  // namespace

double backward(const FunnelNetwork& net, std::span<const double> coords,
                std::span<const double> targets, std::span<double> grads) {
  const std::size_t in = net.spec().in_dim, od = net.spec().out_dim();
  if (coords.empty() || coords.size() % in != 0) throw InvalidArgument("bad coordinate batch shape");
  const std::size_t n = coords.size() / in;
  if (targets.size() != n * od) throw InvalidArgument("target batch does not match coordinates");
  if (grads.size() != net.parameter_count()) throw InvalidArgument("gradient buffer has wrong size");
  Workspace ws;
  const double loss =
      backward_impl(net, shapes(net), coords.data(), targets.data(), n, grads.data(), grads.size(), ws);
  if (!std::isfinite(loss)) throw NumericError("non-finite loss; learning rate too high or bad init");
  return loss;
}

void AdamaxState::step(std::span<double> params, std::span<const double> grads, const TrainConfig& cfg) {
  if (params.size() != m_.size() || grads.size() != m_.size())
    throw InvalidArgument("optimizer state does not match parameter count");
  ++t_;
  beta1_pow_ *= cfg.beta1;
  const double step = cfg.lr / (1.0 - beta1_pow_);
  const double b1 = cfg.beta1, b2 = cfg.beta2, eps = cfg.eps;
  double* m = m_.data();
  double* u = u_.data();
  double* p = params.data();
  const double* g = grads.data();
  const std::size_t n = m_.size();
#pragma omp simd
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = b1 * m[i] + (1.0 - b1) * g[i];
    u[i] = std::max(b2 * u[i], std::fabs(g[i]));
    p[i] -= step * m[i] / (u[i] + eps);
  }
}

namespace {
template <typename T>
std::vector<T> coords_impl(const Dims& extent, const CoordFrame& frame) {
  const std::size_t n = extent.size();
  const bool global = !frame.volume_dims.empty();
  if (global && (frame.volume_dims.size() != n || frame.origin.size() != n))
    throw InvalidArgument("coordinate frame rank mismatch");
  std::vector<std::vector<T>> axis(n);
  for (std::size_t a = 0; a < n; ++a) {
    const double off = global ? static_cast<double>(frame.origin[a]) : 0.0;
    const double size = global ? static_cast<double>(frame.volume_dims[a]) : static_cast<double>(extent[a]);
    for (std::size_t i = 0; i < extent[a]; ++i)
      axis[a].push_back(static_cast<T>((off + static_cast<double>(i) + 0.5) / size * 2.0 - 1.0));
  }
  const std::size_t total = voxel_count(extent);
  std::vector<T> out(total * n);
  std::vector<std::size_t> idx(n, 0);
  for (std::size_t v = 0; v < total; ++v) {
    for (std::size_t a = 0; a < n; ++a) out[v * n + a] = axis[a][idx[a]];
    for (std::size_t a = n; a-- > 0;) {
      if (++idx[a] < extent[a]) break;
      idx[a] = 0;
    }
  }
  return out;
}
}  // namespace

std::vector<double> block_coordinates(const Dims& extent, const CoordFrame& frame) {
  return coords_impl<double>(extent, frame);
}

std::vector<float> block_coordinates_f32(const Dims& extent, const CoordFrame& frame) {
  return coords_impl<float>(extent, frame);
}

double block_mse(const FunnelNetwork& net, const Field& block, const CoordFrame& frame) {
  const auto coords = block_coordinates(block.dims(), frame);
  const auto y = forward(net, coords);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - block[i];
    s += e * e;
  }
  return s / static_cast<double>(y.size());
}

namespace {

// One training run that can be advanced in segments.
class Run {
 public:
  Run(const Field& block, const ArchitectureSpec& arch, const TrainConfig& cfg, std::uint64_t seed,
      const std::vector<double>& coords)
      : block_(block), cfg_(cfg), coords_(coords), net_(init_network(arch, seed)),
        n_(block.voxels()), in_(arch.in_dim), od_(arch.out_dim()),
        batch_(std::max<std::size_t>(1, std::min(cfg.batch_size, n_))), perm_(n_),
        rng_(hash_combine(seed, 0x5eed)), cursor_(n_), bc_(batch_ * in_), bt_(batch_ * od_),
        grads_(net_.parameter_count()), opt_(net_.parameter_count()) {
    auto last = net_.layer(net_.layer_count() - 1);
    bool flat = true;
    for (std::size_t o = 0; o < od_; ++o) {
      double s = 0.0;
      for (std::size_t v = 0; v < n_; ++v) {
        s += block[v * od_ + o];
        flat = flat && block[v * od_ + o] == block[o];
      }
      last.bias[o] = s / static_cast<double>(n_);
    }
    // a flat block is already fitted by its bias
    if (flat)
      for (auto& w : last.weights) w = 0.0;
    sh_ = shapes(net_);
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    losses_.reserve(cfg.iterations);
  }

  // Runs `count` more iterations; false once the loss turns non-finite.
  bool advance(std::size_t count, const ProgressFn& progress) {
    const bool full = batch_ == n_;
    for (std::size_t step = 0; step < count; ++step) {
      const double* cp = coords_.data();
      const double* tp = block_.storage().data();
      std::size_t len = n_;
      if (!full) {
        if (cursor_ >= n_) {
          for (std::size_t i = n_ - 1; i > 0; --i) std::swap(perm_[i], perm_[rng_.below(i + 1)]);
          cursor_ = 0;
        }
        len = std::min(batch_, n_ - cursor_);
        for (std::size_t k = 0; k < len; ++k) {
          const std::size_t v = perm_[cursor_ + k];
          for (std::size_t a = 0; a < in_; ++a) bc_[k * in_ + a] = coords_[v * in_ + a];
          for (std::size_t o = 0; o < od_; ++o) bt_[k * od_ + o] = block_[v * od_ + o];
        }
        cursor_ += len;
        cp = bc_.data();
        tp = bt_.data();
      }
      const double loss = backward_impl(net_, sh_, cp, tp, len, grads_.data(), grads_.size(), ws_);
      if (!std::isfinite(loss)) return false;
      if (progress) progress(losses_.size(), loss);
      losses_.push_back(loss);
      opt_.step(net_.parameters(), grads_, cfg_);
    }
    return true;
  }

  FunnelNetwork& net() { return net_; }
  std::vector<double>& losses() { return losses_; }

 private:
  const Field& block_;
  const TrainConfig& cfg_;
  const std::vector<double>& coords_;
  FunnelNetwork net_;
  std::size_t n_, in_, od_, batch_;
  std::vector<kernel::LayerShape> sh_;
  std::vector<std::size_t> perm_;
  Rng rng_;
  std::size_t cursor_;
  std::vector<double> bc_, bt_, grads_, losses_;
  AdamaxState opt_;
  Workspace ws_;
};

bool fit_attempt(const Field& block, const ArchitectureSpec& arch, const TrainConfig& cfg,
                 const std::vector<double>& coords, const CoordFrame& frame, const ProgressFn& progress,
                 FitResult& res) {
  std::size_t probe = 0;
  std::vector<std::unique_ptr<Run>> runs;
  if (cfg.starts > 1) {
    probe = std::min(cfg.iterations, std::max<std::size_t>(1, (cfg.iterations + 9) / 10));
    double best = std::numeric_limits<double>::infinity();
    std::unique_ptr<Run> pick;
    for (std::size_t k = 0; k < cfg.starts; ++k) {
      auto r = std::make_unique<Run>(block, arch, cfg, k ? hash_combine(cfg.seed, k) : cfg.seed, coords);
      if (!r->advance(probe, {})) continue;
      const double mse = block_mse(r->net(), block, frame);
      if (mse < best) {
        best = mse;
        pick = std::move(r);
      }
    }
    if (!pick) return false;
    if (progress)
      for (std::size_t it = 0; it < probe; ++it) progress(it, pick->losses()[it]);
    runs.push_back(std::move(pick));
  } else {
    runs.push_back(std::make_unique<Run>(block, arch, cfg, cfg.seed, coords));
  }
  if (!runs[0]->advance(cfg.iterations - probe, progress)) return false;
  res.batch_losses = std::move(runs[0]->losses());
  res.net = std::move(runs[0]->net());
  return true;
}

}  // namespace

FitResult fit_block(const Field& block, const ArchitectureSpec& arch, const TrainConfig& cfg,
                    const CoordFrame& frame, const ProgressFn& progress) {
  if (!(cfg.lr > 0.0) || cfg.iterations < 1 || cfg.batch_size < 1)
    throw InvalidArgument("training config needs lr > 0, iterations >= 1, batch_size >= 1");
  if (cfg.starts < 1) throw InvalidArgument("training needs at least one start");
  if (arch.in_dim != block.rank() || arch.out_dim() != block.channels())
    throw InvalidArgument("architecture does not match block rank/channels");
  const auto coords = block_coordinates(block.dims(), frame);
  FitResult res;
  TrainConfig c = cfg;
  if (!fit_attempt(block, arch, c, coords, frame, progress, res)) {
    c.lr /= 10.0;
    c.seed = mix64(c.seed ^ 0xa5a5a5a5a5a5a5a5ull);
    res.retries = 1;
    if (!fit_attempt(block, arch, c, coords, frame, progress, res))
      throw NumericError("training diverged twice (non-finite loss)");
  }
  res.final_loss = block_mse(res.net, block, frame);
  if (!std::isfinite(res.final_loss)) throw NumericError("fitted network produces non-finite output");
  return res;
}

}  // namespace sci
