#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "sci/inr.hpp"
#include "sci/volume.hpp"

namespace sci {

enum class AllocMode { Spectrum, Size, InverseD, Equal };

AllocMode parse_alloc_mode(std::string_view s);  // spectrum | size | inverse_d | equal
std::string_view alloc_mode_name(AllocMode m);

// Rate target expressed in bits.
struct BitBudget {
  std::size_t voxels = 0;        // spatial voxels
  int source_bits = 8;           // bits per source voxel (bit depth x channels)
  double target_bpv = 1.0;       // bits per voxel allowed for the archive
  std::size_t overhead_bits = 0; // container bytes that are not parameters, times 8
  int param_bits = 16;

  static BitBudget from_ratio(std::size_t voxels, int source_bits, double ratio, int param_bits = 16);
  static BitBudget from_bpv(std::size_t voxels, int source_bits, double bpv, int param_bits = 16);

  double target_bits() const { return target_bpv * static_cast<double>(voxels); }
  double target_ratio() const { return source_bits / target_bpv; }
  // floor((target_bits - overhead_bits) / param_bits); 0 when infeasible.
  std::size_t param_budget() const;
};

struct ArchOptions {
  std::size_t in_dim = 3;
  std::size_t out_dim = 1;
  std::size_t layers = 7;  // affine layers, the last one linear
  double fr = 2.2;
  double w0 = 20.0;
  bool taper = false;      // hidden widths h, h-1, h-2, ... instead of constant h
};

// Widths for body width h: [max(1, round(fr*h)), h, ..., h, out].
ArchitectureSpec architecture_for_hidden(std::size_t h, const ArchOptions& o);

// Largest body width h >= 2 whose network fits in param_count parameters.
std::size_t solve_hidden(std::size_t param_count, const ArchOptions& o);
ArchitectureSpec solve_architecture(std::size_t param_count, const ArchOptions& o);
std::size_t hidden_width(const ArchitectureSpec& a);

// Parameters of the narrowest network allowed (h = min_hidden).
std::size_t min_parameters(const ArchOptions& o, std::size_t min_hidden = 2);

struct BlockInput {
  BlockRegion region;
  double score = 1.0;  // D
  bool flat = false;   // every voxel equal: coded without training, gets the minimum network
};

struct BlockPlan {
  BlockRegion region;
  double score = 1.0;
  std::size_t param_count = 0;  // allocated share
  ArchitectureSpec arch;        // realized network
};

// Splits the parameter budget across blocks with weights |x|/D (spectrum),
// |x| (size), 1/D (inverse_d) or 1 (equal), where |x| counts voxels x
// channels. Shares are floored, then the remainder goes one parameter at a
// time to the largest fractional parts. Blocks whose share falls below the
// minimum network are raised to it and the rest re-split. Flat blocks are
// held at the minimum network in every mode. Each share is then
// turned into the widest architecture that fits, and the parameters left over
// by that rounding widen the blocks furthest below their share while they fit.
std::vector<BlockPlan> allocate(std::span<const BlockInput> blocks, const BitBudget& budget,
                                AllocMode mode, const ArchOptions& opts);

std::size_t realized_parameters(std::span<const BlockPlan> plans);

}  // namespace sci
