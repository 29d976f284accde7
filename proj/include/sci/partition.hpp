#pragma once

#include <compare>
#include <cstddef>
#include <vector>

#include "sci/volume.hpp"

namespace sci {

// (level, index) address of a tree node. Levels start at 1 (the root).
// Children of node i at level l are 2^N*i + octant at level l+1, octants in
// row-major order (first axis most significant bit).
struct NodeRef {
  int level = 1;
  std::size_t index = 0;
  auto operator<=>(const NodeRef&) const = default;
};

struct TreeNode {
  BlockRegion region;
  double score = 1.0;       // spectrum concentration D in (0, 1]
  bool degenerate = false;  // all-zero spectrum
};

class PartitionTree {
 public:
  PartitionTree() = default;
  // Builds the geometry of an L-level tree over `dims` with every score 1.
  PartitionTree(Dims dims, int levels);

  const Dims& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  int levels() const { return static_cast<int>(nodes_.size()); }
  std::size_t fanout() const { return std::size_t{1} << rank(); }
  std::size_t level_size(int level) const { return nodes_.at(static_cast<std::size_t>(level - 1)).size(); }

  const TreeNode& node(NodeRef r) const { return nodes_.at(static_cast<std::size_t>(r.level - 1)).at(r.index); }
  TreeNode& node(NodeRef r) { return nodes_.at(static_cast<std::size_t>(r.level - 1)).at(r.index); }
  const std::vector<TreeNode>& level_nodes(int level) const { return nodes_.at(static_cast<std::size_t>(level - 1)); }

  // Objective weight of a selected node: D / 2^(N*l).
  double weight(NodeRef r) const;

 private:
  Dims dims_;
  std::vector<std::vector<TreeNode>> nodes_;
};

struct PartitionSolution {
  std::vector<NodeRef> selected;  // sorted
  double objective = 0.0;         // sum of weights in sorted order
};

// Largest level count whose smallest block side is >= min_side and that
// divides every axis evenly, capped at `cap`.
int default_levels(const Dims& dims, std::size_t min_side = 16, int cap = 4);

// Scores every node of an L-level tree. `power` is forwarded to concentration.
PartitionTree build_tree(const Field& v, int levels, std::size_t M, int power = 1);
// Single-threaded reference; produces bit-identical scores.
PartitionTree build_tree_serial(const Field& v, int levels, std::size_t M, int power = 1);

// Canonical objective of a node set (weights summed in sorted order).
double partition_objective(const PartitionTree& tree, std::vector<NodeRef> selected);

// Exact maximizer of the weighted concentration over tilings with at most
// a_max blocks, by tree dynamic programming over (node, leaf count) states.
// Ties prefer fewer blocks, then the lexicographically smallest node list.
PartitionSolution solve_partition(const PartitionTree& tree, std::size_t a_max);

// Exhaustive enumeration of all tilings; refuses trees with more than 1e7.
PartitionSolution solve_partition_bruteforce(const PartitionTree& tree, std::size_t a_max);

// Number of distinct tilings of the tree (saturates at max()).
std::size_t count_tilings(const PartitionTree& tree);

// All nodes of one level (level 1 = no partitioning).
PartitionSolution equidistant_partition(const PartitionTree& tree, int level);

std::vector<BlockRegion> solution_regions(const PartitionTree& tree, const PartitionSolution& s);

}  // namespace sci
