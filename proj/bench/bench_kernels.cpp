// Serial reference kernels against their OpenMP counterparts.
#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "sci/allocation.hpp"
#include "sci/inr.hpp"
#include "sci/partition.hpp"
#include "sci/rng.hpp"

using namespace sci;

namespace {

std::vector<double> coords(std::size_t n) {
  Rng rng(1);
  std::vector<double> c(3 * n);
  for (auto& x : c) x = rng.uniform(-1, 1);
  return c;
}

FunnelNetwork net(std::size_t h) { return init_network(architecture_for_hidden(h, ArchOptions{}), 7); }

Field field(std::size_t n) {
  Rng rng(2);
  Field f(Dims{n, n, n}, 1);
  for (auto& x : f.storage()) x = rng.uniform(-1, 1);
  return f;
}

void BM_forward(benchmark::State& st) {
  const auto f = net(static_cast<std::size_t>(st.range(0)));
  const auto c = coords(32768);
  std::vector<double> out(32768);
  for (auto _ : st) {
    forward(f, c, out);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * 32768);
}

void BM_forward_serial(benchmark::State& st) {
  const auto f = net(static_cast<std::size_t>(st.range(0)));
  const auto c = coords(32768);
  std::vector<double> out(32768);
  for (auto _ : st) {
    forward_serial(f, c, out);
    benchmark::DoNotOptimize(out.data());
  }
  st.SetItemsProcessed(st.iterations() * 32768);
}

void BM_build_tree(benchmark::State& st) {
  const auto v = field(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(build_tree(v, 3, 64));
}

void BM_build_tree_serial(benchmark::State& st) {
  const auto v = field(static_cast<std::size_t>(st.range(0)));
  for (auto _ : st) benchmark::DoNotOptimize(build_tree_serial(v, 3, 64));
}

}  // namespace

BENCHMARK(BM_forward)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_forward_serial)->Arg(8)->Arg(32)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_build_tree)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_build_tree_serial)->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
