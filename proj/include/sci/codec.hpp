#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sci/allocation.hpp"
#include "sci/inr.hpp"
#include "sci/partition.hpp"
#include "sci/trainer.hpp"
#include "sci/volume.hpp"

namespace sci {

// ---- block names -----------------------------------------------------------
// Inclusive voxel ranges per axis: "d_0_15-h_256_383-w_0_127" (3-D) or
// "h_0_63-w_64_127" (2-D).
std::string render_block_name(const BlockRegion& r);
// With `volume_dims`, the level is inferred from the extent (1 when the
// extent is not a power-of-two fraction of the volume).
BlockRegion parse_block_name(std::string_view name, const Dims* volume_dims = nullptr);

// ---- container -------------------------------------------------------------

enum class NormKind : std::uint8_t { DtypeRange = 0, Explicit = 1 };

struct ArchiveMetadata {
  Dims dims;
  DType dtype = DType::U8;
  std::size_t channels = 1;
  NormKind norm_kind = NormKind::DtypeRange;
  IntensityNorm norm;
  double w0 = 20.0;
  double fr = 2.2;
  std::size_t layers = 7;
  int param_bits = 16;
  bool global_coords = false;
  double deblock_tau = 0.0;  // raw intensity units; 0 disables
  Dims source_dims;          // non-empty when the input was padded before coding

  bool operator==(const ArchiveMetadata&) const = default;
};

struct BlockRecord {
  std::string name;
  std::vector<std::uint16_t> widths;
  std::vector<std::uint8_t> payload;  // little-endian parameters, layer order, W then b

  bool operator==(const BlockRecord&) const = default;
};

struct Archive {
  ArchiveMetadata meta;
  std::vector<BlockRecord> blocks;

  bool operator==(const Archive&) const = default;
};

inline constexpr std::string_view kMagic = "SCI1";

std::string render_metadata(const ArchiveMetadata& m);
ArchiveMetadata parse_metadata(std::string_view text, std::size_t base_offset = 0);

// magic | u32 metadata length | metadata | u32 block count |
// { u16 name length | name | u8 width count | u16 widths[] | u32 payload length | payload }*
std::vector<std::uint8_t> serialize(const Archive& a);
Archive parse_archive(std::span<const std::uint8_t> bytes);

// Bytes taken by everything except the parameter payloads.
std::size_t container_overhead(const ArchiveMetadata& meta, std::span<const std::string> names,
                               std::size_t widths_per_block);
std::size_t block_header_bytes(std::size_t name_length, std::size_t widths_per_block);

// Quantized parameter payload and its inverse.
std::vector<std::uint8_t> pack_parameters(std::span<const double> params, int param_bits);
std::vector<double> unpack_parameters(std::span<const std::uint8_t> payload, int param_bits);
// Rounds every parameter to its stored precision.
void quantize_network(FunnelNetwork& net, int param_bits);

// One directory per archive: "metadata.txt" plus one file per block named by
// its block name (u8 width count | u16 widths | payload).
void write_directory(const Archive& a, const std::filesystem::path& dir);
Archive read_directory(const std::filesystem::path& dir);

// Network that outputs `values` (per channel) everywhere. The output bias
// carries the stored-precision value and one hidden unit carries the
// rounding residual.
FunnelNetwork constant_network(const ArchitectureSpec& arch, std::span<const double> values, int param_bits);

// ---- pipeline --------------------------------------------------------------

enum class PartitionMode { Adaptive, Equidistant, None };
PartitionMode parse_partition_mode(std::string_view s);
std::string_view partition_mode_name(PartitionMode m);

enum class NormMode { Dtype, Data };

struct EncodeConfig {
  std::optional<double> ratio;  // exactly one of ratio / bpv
  std::optional<double> bpv;
  std::size_t layers = 7;
  double fr = 2.2;
  double w0 = 20.0;
  bool taper = false;
  std::size_t M = 1;
  std::size_t a_max = 50;
  int levels = 0;  // 0: default_levels(dims)
  PartitionMode partition = PartitionMode::Adaptive;
  int ep_level = 2;
  AllocMode alloc = AllocMode::Spectrum;
  int param_bits = 16;
  int concentration_power = 1;
  NormMode norm = NormMode::Dtype;
  bool global_coords = false;
  bool deblock = true;
  double deblock_tau = -1.0;    // < 0: 2% of the dtype range
  std::size_t min_hidden = 4;   // smallest body width a block may get when capping a_max
  TrainConfig train;            // train.seed is the global seed
  double iters_per_voxel = 0.0;  // > 0: iterations = ceil(iters_per_voxel * block voxels)
  int workers = 0;              // 0: OpenMP default
  // Called from worker threads (serialized by the encoder).
  std::function<void(const std::string& block, std::size_t iteration, double loss)> log;
  std::size_t log_every = 100;
  Dims source_dims;  // set when `v` was padded from a smaller volume
};

struct EncodeReport {
  int levels = 1;
  std::size_t a_max_effective = 1;
  PartitionSolution solution;
  std::vector<BlockPlan> plans;
  std::vector<double> block_mse;  // normalized-domain MSE of each fitted block (pre-quantization)
  std::size_t archive_bytes = 0;
  double target_bpv = 0.0;
  double bpv = 0.0;
};

struct EncodeResult {
  Archive archive;
  std::vector<std::uint8_t> bytes;
  EncodeReport report;
};

EncodeResult encode(const Volume& v, const EncodeConfig& cfg);

struct DecodeOptions {
  int workers = 0;
  std::optional<bool> deblock;  // override the archive's setting; forcing it on a tau-0 archive uses the default tau
};

Volume decode(const Archive& a, const DecodeOptions& opts = {});
Volume decode(std::span<const std::uint8_t> bytes, const DecodeOptions& opts = {});

// Regions of an archive's blocks, validated to tile the volume exactly.
std::vector<BlockRegion> archive_regions(const Archive& a);

// ---- deblocking ------------------------------------------------------------

// For every 4-sample line [p1 p0 | q0 q1] across a block boundary with
// |p0-q0| < tau, |p1-p0| < tau/2 and |q1-q0| < tau/2, p0 and q0 are replaced
// by 3-tap averages (p1+p0+q0)/3 and (p0+q0+q1)/3. All decisions read the
// unfiltered volume; a voxel on several boundaries takes the mean of its
// proposals.
Volume deblock(const Volume& v, std::span<const BlockRegion> regions, double tau);
double default_deblock_tau(DType t);

}  // namespace sci
