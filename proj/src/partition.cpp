#include "sci/partition.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "sci/spectrum.hpp"

namespace sci {

PartitionTree::PartitionTree(Dims dims, int levels) : dims_(std::move(dims)) {
  if (levels < 1) throw InvalidArgument("tree needs at least one level");
  if (dims_.empty() || dims_.size() > 3) throw InvalidArgument("tree rank must be 1..3");
  const std::size_t div = std::size_t{1} << (levels - 1);
  for (auto d : dims_)
    if (d % div != 0)
      throw InvalidArgument("dims " + format_dims(dims_) + " not divisible by 2^(L-1) = " +
                            std::to_string(div) + "; pad or crop the volume");
  const std::size_t n = dims_.size();
  nodes_.resize(static_cast<std::size_t>(levels));
  BlockRegion root{std::vector<std::size_t>(n, 0), dims_, 1};
  nodes_[0].push_back({root, 1.0, false});
  for (int l = 2; l <= levels; ++l) {
    auto& prev = nodes_[static_cast<std::size_t>(l - 2)];
    auto& cur = nodes_[static_cast<std::size_t>(l - 1)];
    cur.reserve(prev.size() << n);
    for (const auto& p : prev) {
      for (std::size_t o = 0; o < (std::size_t{1} << n); ++o) {
        BlockRegion r = p.region;
        r.level = l;
        for (std::size_t a = 0; a < n; ++a) {
          r.extent[a] = p.region.extent[a] / 2;
          const std::size_t bit = (o >> (n - 1 - a)) & 1u;
          r.origin[a] = p.region.origin[a] + bit * r.extent[a];
        }
        cur.push_back({std::move(r), 1.0, false});
      }
    }
  }
}

double PartitionTree::weight(NodeRef r) const {
  return std::ldexp(node(r).score, -static_cast<int>(rank()) * r.level);
}

int default_levels(const Dims& dims, std::size_t min_side, int cap) {
  int best = 1;
  for (int l = 2; l <= cap; ++l) {
    const std::size_t div = std::size_t{1} << (l - 1);
    bool ok = true;
    for (auto d : dims) ok = ok && d % div == 0 && d / div >= min_side;
    if (!ok) break;
    best = l;
  }
  return best;
}

namespace {

PartitionTree build_tree_impl(const Field& v, int levels, std::size_t M, int power, bool parallel) {
  PartitionTree tree(v.dims(), levels);
  const std::size_t div = std::size_t{1} << (levels - 1);
  for (auto d : v.dims())
    if (d / div < 4)
      throw InvalidArgument("smallest block side " + std::to_string(d / div) + " < 4 at L=" +
                            std::to_string(levels));
  std::vector<NodeRef> refs;
  for (int l = 1; l <= levels; ++l)
    for (std::size_t i = 0; i < tree.level_size(l); ++i) refs.push_back({l, i});
  const auto count = static_cast<std::ptrdiff_t>(refs.size());
  auto score = [&](std::ptrdiff_t k) {
    auto& nd = tree.node(refs[static_cast<std::size_t>(k)]);
    auto c = block_concentration(extract_block(v, nd.region), M, power);
    nd.score = c.value;
    nd.degenerate = c.degenerate;
  };
  if (parallel) {
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t k = 0; k < count; ++k) score(k);
  } else {
    for (std::ptrdiff_t k = 0; k < count; ++k) score(k);
  }
  return tree;
}

std::vector<NodeRef> children(const PartitionTree& t, NodeRef r) {
  std::vector<NodeRef> out;
  if (r.level >= t.levels()) return out;
  for (std::size_t o = 0; o < t.fanout(); ++o) out.push_back({r.level + 1, r.index * t.fanout() + o});
  return out;
}

struct State {
  bool valid = false;
  double value = 0.0;
  std::vector<NodeRef> set;  // sorted
};

bool better(const State& a, const State& b) {
  if (!b.valid) return a.valid;
  if (!a.valid) return false;
  if (a.value != b.value) return a.value > b.value;
  return std::lexicographical_compare(a.set.begin(), a.set.end(), b.set.begin(), b.set.end());
}

std::vector<NodeRef> merge_sorted(const std::vector<NodeRef>& a, const std::vector<NodeRef>& b) {
  std::vector<NodeRef> out(a.size() + b.size());
  std::merge(a.begin(), a.end(), b.begin(), b.end(), out.begin());
  return out;
}

// best[k] = optimal tiling of the subtree of r using exactly k blocks.
std::vector<State> solve_node(const PartitionTree& t, NodeRef r, std::size_t cap) {
  std::size_t leaves = 1;
  for (int l = r.level; l < t.levels() && leaves <= cap; ++l) leaves *= t.fanout();
  cap = std::min(cap, leaves);
  std::vector<State> best(cap + 1);
  best[1] = {true, t.weight(r), {r}};
  const auto kids = children(t, r);
  if (kids.empty() || cap < kids.size()) return best;
  std::vector<State> acc(cap + 1);
  acc[0] = {true, 0.0, {}};
  for (const auto& c : kids) {
    const auto sub = solve_node(t, c, cap);
    std::vector<State> next(cap + 1);
    for (std::size_t k1 = 0; k1 <= cap; ++k1) {
      if (!acc[k1].valid) continue;
      for (std::size_t k2 = 1; k2 < sub.size() && k1 + k2 <= cap; ++k2) {
        if (!sub[k2].valid) continue;
        State cand{true, acc[k1].value + sub[k2].value, merge_sorted(acc[k1].set, sub[k2].set)};
        if (better(cand, next[k1 + k2])) next[k1 + k2] = std::move(cand);
      }
    }
    acc = std::move(next);
  }
  for (std::size_t k = 2; k <= cap; ++k)
    if (better(acc[k], best[k])) best[k] = std::move(acc[k]);
  return best;
}

}  // namespace

PartitionTree build_tree(const Field& v, int levels, std::size_t M, int power) {
  return build_tree_impl(v, levels, M, power, true);
}

PartitionTree build_tree_serial(const Field& v, int levels, std::size_t M, int power) {
  return build_tree_impl(v, levels, M, power, false);
}

double partition_objective(const PartitionTree& tree, std::vector<NodeRef> selected) {
  std::sort(selected.begin(), selected.end());
  double s = 0.0;
  for (auto r : selected) s += tree.weight(r);
  return s;
}

PartitionSolution solve_partition(const PartitionTree& tree, std::size_t a_max) {
  if (a_max < 1) throw InvalidArgument("a_max must be >= 1");
  const auto best = solve_node(tree, {1, 0}, a_max);
  const State* pick = nullptr;
  for (std::size_t k = 1; k < best.size(); ++k) {
    const auto& s = best[k];
    if (!s.valid) continue;
    // Strictly better only: equal value keeps the smaller k.
    if (!pick || s.value > pick->value) pick = &s;
  }
  PartitionSolution out{pick->set, 0.0};
  out.objective = partition_objective(tree, out.selected);
  return out;
}

std::size_t count_tilings(const PartitionTree& tree) {
  constexpr std::size_t kMax = std::numeric_limits<std::size_t>::max();
  std::size_t per_node = 1;  // deepest level
  for (int l = tree.levels() - 1; l >= 1; --l) {
    std::size_t prod = 1;
    for (std::size_t c = 0; c < tree.fanout(); ++c) {
      if (per_node != 0 && prod > kMax / per_node) return kMax;
      prod *= per_node;
    }
    if (prod == kMax) return kMax;
    per_node = prod + 1;
  }
  return per_node;
}

PartitionSolution solve_partition_bruteforce(const PartitionTree& tree, std::size_t a_max) {
  if (a_max < 1) throw InvalidArgument("a_max must be >= 1");
  if (count_tilings(tree) > 10'000'000)
    throw InvalidArgument("partition tree too large for exhaustive enumeration");
  std::function<std::vector<std::vector<NodeRef>>(NodeRef)> tilings = [&](NodeRef r) {
    std::vector<std::vector<NodeRef>> out{{r}};
    const auto kids = children(tree, r);
    if (kids.empty()) return out;
    std::vector<std::vector<NodeRef>> combos{{}};
    for (auto c : kids) {
      auto sub = tilings(c);
      std::vector<std::vector<NodeRef>> next;
      for (const auto& a : combos)
        for (const auto& b : sub) {
          if (a.size() + b.size() > a_max) continue;
          auto m = a;
          m.insert(m.end(), b.begin(), b.end());
          next.push_back(std::move(m));
        }
      combos = std::move(next);
    }
    for (auto& c : combos) out.push_back(std::move(c));
    return out;
  };
  PartitionSolution best;
  bool have = false;
  for (auto& t : tilings({1, 0})) {
    if (t.size() > a_max) continue;
    std::sort(t.begin(), t.end());
    const double v = partition_objective(tree, t);
    bool take = !have || v > best.objective ||
                (v == best.objective &&
                 (t.size() < best.selected.size() ||
                  (t.size() == best.selected.size() && t < best.selected)));
    if (take) {
      best = {t, v};
      have = true;
    }
  }
  return best;
}

PartitionSolution equidistant_partition(const PartitionTree& tree, int level) {
  if (level < 1 || level > tree.levels())
    throw InvalidArgument("equidistant level " + std::to_string(level) + " outside 1.." +
                          std::to_string(tree.levels()));
  PartitionSolution s;
  for (std::size_t i = 0; i < tree.level_size(level); ++i) s.selected.push_back({level, i});
  s.objective = partition_objective(tree, s.selected);
  return s;
}

std::vector<BlockRegion> solution_regions(const PartitionTree& tree, const PartitionSolution& s) {
  std::vector<BlockRegion> out;
  for (auto r : s.selected) out.push_back(tree.node(r).region);
  return out;
}

}  // namespace sci
