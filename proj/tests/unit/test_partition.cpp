#include <doctest.h>

#include <set>

#include "sci/error.hpp"
#include "sci/partition.hpp"
#include "sci/rng.hpp"

using namespace sci;

namespace {

PartitionTree random_tree(const Dims& dims, int levels, std::uint64_t seed) {
  PartitionTree t(dims, levels);
  Rng rng(seed);
  for (int l = 1; l <= levels; ++l)
    for (std::size_t i = 0; i < t.level_size(l); ++i) t.node({l, i}).score = 0.01 + 0.99 * rng.uniform();
  return t;
}

void check_tiling(const PartitionTree& t, const PartitionSolution& s) {
  std::vector<int> cover(voxel_count(t.dims()), 0);
  for (const auto& r : solution_regions(t, s))
    for_each_row(t.dims(), 1, r, [&](std::size_t, std::size_t vo, std::size_t len) {
      for (std::size_t i = 0; i < len; ++i) ++cover[vo + i];
    });
  for (int c : cover) REQUIRE(c == 1);
}

Field random_field(const Dims& d, std::uint64_t seed) {
  Rng rng(seed);
  Field f(d, 1);
  for (auto& x : f.storage()) x = rng.uniform(-1, 1);
  return f;
}

}  // namespace

TEST_CASE("tree geometry") {
  PartitionTree t({64, 64, 64}, 3);
  CHECK(t.level_size(1) == 1);
  CHECK(t.level_size(2) == 8);
  CHECK(t.level_size(3) == 64);
  CHECK(t.node({2, 0}).region.extent == Dims{32, 32, 32});
  CHECK(t.node({3, 63}).region.extent == Dims{16, 16, 16});
  CHECK(t.node({3, 63}).region.origin == std::vector<std::size_t>{48, 48, 48});
  // children of node i are 8i .. 8i+7 and cover it
  for (std::size_t i = 0; i < 8; ++i) {
    const auto& p = t.node({2, i}).region;
    for (std::size_t c = 0; c < 8; ++c) {
      const auto& r = t.node({3, 8 * i + c}).region;
      for (std::size_t a = 0; a < 3; ++a) {
        CHECK(r.origin[a] >= p.origin[a]);
        CHECK(r.origin[a] + r.extent[a] <= p.origin[a] + p.extent[a]);
      }
    }
  }
  CHECK(PartitionTree({16, 16}, 1).level_size(1) == 1);
  CHECK_THROWS_AS(PartitionTree({60, 64}, 4), InvalidArgument);
}

TEST_CASE("build_tree rejects small or indivisible blocks") {
  const Field f = random_field({16, 16}, 1);
  CHECK_NOTHROW(build_tree(f, 3, 1));
  CHECK_THROWS_AS(build_tree(f, 4, 1), InvalidArgument);
  CHECK_THROWS_AS(build_tree(random_field({12, 16}, 1), 3, 1), InvalidArgument);
}

TEST_CASE("constant volume scores 1 everywhere") {
  Field f({32, 32, 32}, 1);
  std::fill(f.storage().begin(), f.storage().end(), 0.3);
  const auto t = build_tree(f, 3, 1);
  for (int l = 1; l <= 3; ++l)
    for (const auto& n : t.level_nodes(l)) CHECK(n.score == doctest::Approx(1.0));
  const auto s = solve_partition(t, 8);
  CHECK(s.selected == std::vector<NodeRef>{{1, 0}});
  CHECK(s.objective == solve_partition_bruteforce(t, 8).objective);
}

TEST_CASE("parallel scoring equals serial scoring") {
  const Field f = random_field({32, 32, 16}, 4);
  const auto a = build_tree(f, 3, 2);
  const auto b = build_tree_serial(f, 3, 2);
  for (int l = 1; l <= 3; ++l)
    for (std::size_t i = 0; i < a.level_size(l); ++i) CHECK(a.node({l, i}).score == b.node({l, i}).score);
}

TEST_CASE("default levels") {
  CHECK(default_levels({64, 64, 64}) == 3);
  CHECK(default_levels({256, 256, 256}) == 4);
  CHECK(default_levels({32, 32, 32}) == 2);
  CHECK(default_levels({48, 64, 64}) == 2);
  CHECK(default_levels({8, 8}) == 1);
}

TEST_CASE("single-level tree selects the root") {
  auto t = random_tree({16, 16, 16}, 1, 2);
  const auto s = solve_partition(t, 50);
  CHECK(s.selected.size() == 1);
  CHECK(s.objective == t.node({1, 0}).score / 8.0);
}

TEST_CASE("tiling counts") {
  CHECK(count_tilings(PartitionTree({16, 16}, 2)) == 2);
  CHECK(count_tilings(PartitionTree({16, 16}, 3)) == 1 + 2 * 2 * 2 * 2);
  CHECK(count_tilings(PartitionTree({16, 16, 16}, 3)) == 1 + 256);
  auto t = random_tree({16, 16}, 2, 1);
  CHECK(solve_partition_bruteforce(t, 1).selected.size() == 1);
  CHECK_THROWS_AS(solve_partition_bruteforce(PartitionTree({64, 64, 64}, 4), 50), InvalidArgument);
}

TEST_CASE("DP equals brute force on random trees") {
  std::uint64_t seed = 0;
  for (std::size_t N : {2u, 3u})
    for (int L : {1, 2, 3})
      for (std::size_t a_max : {1u, 2u, 4u, 7u, 8u, 9u, 16u, 30u}) {
        const Dims d(N, 16);
        const auto t = random_tree(d, L, ++seed);
        const auto dp = solve_partition(t, a_max);
        const auto bf = solve_partition_bruteforce(t, a_max);
        CHECK(dp.objective == bf.objective);
        CHECK(dp.selected == bf.selected);
        CHECK(dp.selected.size() <= a_max);
        check_tiling(t, dp);
      }
}

TEST_CASE("objective monotone in a_max and dominates equidistant") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto t = random_tree({32, 32}, 3, 500 + seed);
    double prev = 0;
    for (std::size_t a = 1; a <= 20; ++a) {
      const double o = solve_partition(t, a).objective;
      CHECK(o >= prev);
      prev = o;
    }
    for (int l = 1; l <= 3; ++l) {
      const auto ep = equidistant_partition(t, l);
      CHECK(ep.objective <= solve_partition(t, ep.selected.size()).objective);
      check_tiling(t, ep);
    }
  }
}

TEST_CASE("ties prefer fewer blocks") {
  PartitionTree t({16, 16}, 2);
  // root weight 0.5/4; four children 0.5 each at weight 1/16 sum to the same
  t.node({1, 0}).score = 0.5;
  for (std::size_t i = 0; i < 4; ++i) t.node({2, i}).score = 0.5;
  CHECK(solve_partition(t, 4).selected.size() == 1);
}

TEST_CASE("equidistant partition") {
  const PartitionTree t({32, 32, 32}, 3);
  CHECK(equidistant_partition(t, 1).selected.size() == 1);
  CHECK(equidistant_partition(t, 2).selected.size() == 8);
  CHECK_THROWS_AS(equidistant_partition(t, 4), InvalidArgument);
}
