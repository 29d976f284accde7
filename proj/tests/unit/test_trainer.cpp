#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sci/error.hpp"
#include "sci/rng.hpp"
#include "sci/trainer.hpp"

using namespace sci;

namespace {

ArchitectureSpec small(std::size_t in, std::size_t out) { return {in, {5, 4, 3, out}, 20.0, 2.2}; }

double fd_max_rel_error(std::uint64_t seed, std::size_t batch) {
  Rng rng(seed);
  const std::size_t in = 1 + rng.below(3), out = 1 + rng.below(2);
  ArchitectureSpec spec{in, {2 + rng.below(5), 2 + rng.below(4), out}, 1.0 + 29.0 * rng.uniform(), 2.2};
  FunnelNetwork net = init_network(spec, seed);
  for (auto& p : net.parameters()) p += 0.1 * rng.uniform(-1, 1);
  std::vector<double> c(batch * in), t(batch * out);
  for (auto& x : c) x = rng.uniform(-1, 1);
  for (auto& x : t) x = rng.uniform(-1, 1);
  std::vector<double> g(net.parameter_count()), dummy(net.parameter_count());
  backward(net, c, t, g);
  double worst = 0;
  const double h = 1e-5;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double keep = net.parameters()[i];
    net.parameters()[i] = keep + h;
    const double lp = backward(net, c, t, dummy);
    net.parameters()[i] = keep - h;
    const double lm = backward(net, c, t, dummy);
    net.parameters()[i] = keep;
    const double fd = (lp - lm) / (2 * h);
    const double err = std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-6});
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace

TEST_CASE("backward matches central differences") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) CHECK(fd_max_rel_error(seed, 16) < 1e-4);
  CHECK(fd_max_rel_error(99, 600) < 1e-4);  // spans several tiles
}

TEST_CASE("perfect targets give zero loss and gradient") {
  const auto net = init_network(small(3, 2), 4);
  Rng rng(5);
  std::vector<double> c(3 * 40);
  for (auto& x : c) x = rng.uniform(-1, 1);
  const auto t = forward(net, c);
  std::vector<double> g(net.parameter_count());
  CHECK(backward(net, c, t, g) == 0.0);
  for (double x : g) CHECK(x == 0.0);
}

TEST_CASE("negated targets flip the output-layer gradient") {
  FunnelNetwork net = init_network(small(2, 1), 6);
  auto last = net.layer(net.layer_count() - 1);
  for (auto& w : last.weights) w = 0;
  last.bias[0] = 0;
  Rng rng(7);
  std::vector<double> c(2 * 30), t(30);
  for (auto& x : c) x = rng.uniform(-1, 1);
  for (auto& x : t) x = rng.uniform(-1, 1);
  std::vector<double> ga(net.parameter_count()), gb(net.parameter_count());
  backward(net, c, t, ga);
  for (auto& x : t) x = -x;
  backward(net, c, t, gb);
  const std::size_t off = net.parameter_count() - last.weights.size() - 1;
  for (std::size_t i = off; i < ga.size(); ++i) CHECK(gb[i] == doctest::Approx(-ga[i]));
}

TEST_CASE("backward rejects bad shapes and non-finite loss") {
  FunnelNetwork net = init_network(small(2, 1), 1);
  std::vector<double> g(net.parameter_count());
  CHECK_THROWS_AS(backward(net, std::vector<double>(3), std::vector<double>(1), g), InvalidArgument);
  CHECK_THROWS_AS(backward(net, std::vector<double>(4), std::vector<double>(3), g), InvalidArgument);
  net.layer(net.layer_count() - 1).bias[0] = INFINITY;
  CHECK_THROWS_AS(backward(net, std::vector<double>(4), std::vector<double>(2), g), NumericError);
}

TEST_CASE("adamax single step from zero state") {
  AdamaxState st(1);
  TrainConfig cfg;
  cfg.lr = 0.01;
  std::vector<double> p{0.0}, g{1.0};
  st.step(p, g, cfg);
  CHECK(st.first_moment()[0] == doctest::Approx(0.1));
  CHECK(st.norm()[0] == 1.0);
  CHECK(st.steps() == 1);
  CHECK(p[0] == doctest::Approx(-0.01 / (1 + 1e-8)).epsilon(1e-12));
}

TEST_CASE("adamax keeps parameters under zero gradient") {
  AdamaxState st(3);
  TrainConfig cfg;
  std::vector<double> p{1.0, -2.0, 3.0}, g(3, 0.0);
  for (int i = 0; i < 100; ++i) st.step(p, g, cfg);
  CHECK(p == std::vector<double>{1.0, -2.0, 3.0});
}

TEST_CASE("adamax infinity norm never shrinks below decayed value") {
  AdamaxState st(1);
  TrainConfig cfg;
  std::vector<double> p{0.0}, g{0.5};
  double prev = 0;
  for (int i = 0; i < 50; ++i) {
    st.step(p, g, cfg);
    CHECK(st.norm()[0] >= prev);
    CHECK(st.norm()[0] >= 0);
    prev = st.norm()[0];
  }
}

TEST_CASE("adamax minimizes a scalar quadratic") {
  AdamaxState st(1);
  TrainConfig cfg;
  cfg.lr = 0.01;
  std::vector<double> p{0.0}, g(1);
  for (int i = 0; i < 5000; ++i) {
    g[0] = 2 * (p[0] - 3);
    st.step(p, g, cfg);
  }
  CHECK(std::abs(p[0] - 3) < 1e-3);
}

TEST_CASE("voxel-center coordinates") {
  const auto c = block_coordinates({2, 4});
  CHECK(c.size() == 16);
  CHECK(c[0] == -0.5);
  CHECK(c[1] == -0.75);
  CHECK(c[3] == -0.25);
  CHECK(c[15] == 0.75);
  const auto g = block_coordinates({2, 2}, CoordFrame{{4, 4}, {2, 0}});
  CHECK(g[0] == 0.25);
  CHECK(g[1] == -0.75);
  const auto f = block_coordinates_f32({3, 5, 2});
  const auto d = block_coordinates({3, 5, 2});
  for (std::size_t i = 0; i < d.size(); ++i) CHECK(f[i] == static_cast<float>(d[i]));
}

TEST_CASE("constant block fits quickly") {
  Field block({8, 8, 8}, 1);
  std::fill(block.storage().begin(), block.storage().end(), 0.37);
  TrainConfig cfg;
  cfg.iterations = 500;
  const auto r = fit_block(block, {3, {4, 2, 1}, 20.0, 2.2}, cfg);
  CHECK(r.net.parameter_count() >= 20);
  // peak-to-peak range 2 in normalized units
  CHECK(10 * std::log10(4.0 / std::max(r.final_loss, 1e-300)) >= 80.0);
}

TEST_CASE("fit is deterministic, reports per-iteration losses and converges") {
  Field block({8, 8, 8}, 1);
  for (std::size_t i = 0; i < 512; ++i) {
    const double x = static_cast<double>(i % 8) / 8.0;
    block[i] = 0.6 * std::sin(2 * std::numbers::pi * x);
  }
  TrainConfig cfg;
  cfg.iterations = 600;
  cfg.batch_size = 100;
  cfg.seed = 3;
  std::size_t calls = 0;
  const ArchitectureSpec arch{3, {9, 4, 4, 1}, 20.0, 2.2};
  const auto a = fit_block(block, arch, cfg, {}, [&](std::size_t, double) { ++calls; });
  const auto b = fit_block(block, arch, cfg);
  CHECK(a.net == b.net);
  CHECK(calls == 600);
  CHECK(a.batch_losses.size() == 600);
  CHECK(a.final_loss == doctest::Approx(block_mse(a.net, block)));
  double head = 0, tail = 0;
  for (std::size_t i = 0; i < 100; ++i) {
    head += a.batch_losses[i];
    tail += a.batch_losses[500 + i];
  }
  CHECK(tail < head);
}

TEST_CASE("diverging run is retried and then reported") {
  Field block({4, 4}, 1);
  for (std::size_t i = 0; i < 16; ++i) block[i] = (i % 3) * 0.4 - 0.4;
  TrainConfig cfg;
  cfg.lr = 1e300;
  cfg.iterations = 50;
  CHECK_THROWS_AS(fit_block(block, {2, {4, 1}, 20.0, 2.2}, cfg), NumericError);
}

TEST_CASE("multi-start keeps one candidate's full run") {
  Field block({8, 8, 8}, 1);
  for (std::size_t i = 0; i < 512; ++i) {
    const double x = static_cast<double>(i % 8) / 8.0, y = static_cast<double>((i / 8) % 8) / 8.0;
    block[i] = 0.5 * std::sin(2 * std::numbers::pi * (x + 2 * y));
  }
  const ArchitectureSpec arch{3, {9, 4, 4, 1}, 20.0, 2.2};
  TrainConfig cfg;
  cfg.iterations = 300;
  cfg.batch_size = 128;
  cfg.seed = 9;
  cfg.starts = 3;
  const auto multi = fit_block(block, arch, cfg);
  CHECK(multi.batch_losses.size() == 300);
  TrainConfig one = cfg;
  one.starts = 1;
  int matches = 0;
  for (std::uint64_t s : {cfg.seed, hash_combine(cfg.seed, 1), hash_combine(cfg.seed, 2)}) {
    one.seed = s;
    const auto single = fit_block(block, arch, one);
    if (single.net == multi.net) {
      ++matches;
      CHECK(single.batch_losses == multi.batch_losses);
    }
  }
  CHECK(matches == 1);
  cfg.starts = 0;
  CHECK_THROWS_AS(fit_block(block, arch, cfg), InvalidArgument);
}
