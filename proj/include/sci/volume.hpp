#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sci/error.hpp"

namespace sci {

enum class DType : std::uint8_t { U8 = 0, U16 = 1 };

int bit_depth(DType t);
double dtype_max(DType t);
std::string_view dtype_name(DType t);
DType parse_dtype(std::string_view s);

// Voxels per axis, slowest axis first. Layout is row-major with the channel
// index fastest.
using Dims = std::vector<std::size_t>;

Dims parse_dims(std::string_view s);  // "64x64x64"
std::string format_dims(const Dims& d);
std::size_t voxel_count(const Dims& d);

// Raw intensity interval mapped onto [-1, 1].
struct IntensityNorm {
  double lo = 0.0;
  double hi = 1.0;

  static IntensityNorm for_dtype(DType t) { return {0.0, dtype_max(t)}; }
  bool operator==(const IntensityNorm&) const = default;
};

// Axis-aligned box inside a volume. `level` is the tree depth the box came
// from (1 = whole volume).
struct BlockRegion {
  std::vector<std::size_t> origin;
  std::vector<std::size_t> extent;
  int level = 1;

  std::size_t voxels() const { return voxel_count(extent); }
  bool operator==(const BlockRegion&) const = default;
};

void check_region(const Dims& dims, const BlockRegion& r);

// Dense N-dimensional grid with interleaved channels.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(Dims dims, std::size_t channels, T fill = T{})
      : dims_(std::move(dims)), channels_(channels), data_(voxel_count(dims_) * channels, fill) {
    validate();
  }
  Grid(Dims dims, std::size_t channels, std::vector<T> data)
      : dims_(std::move(dims)), channels_(channels), data_(std::move(data)) {
    validate();
    if (data_.size() != voxel_count(dims_) * channels_)
      throw InvalidArgument("grid data length " + std::to_string(data_.size()) +
                            " does not match dims " + format_dims(dims_) + " x " +
                            std::to_string(channels_) + " channels");
  }

  const Dims& dims() const { return dims_; }
  std::size_t rank() const { return dims_.size(); }
  std::size_t channels() const { return channels_; }
  std::size_t voxels() const { return voxel_count(dims_); }
  std::size_t size() const { return data_.size(); }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  std::vector<T>& storage() { return data_; }
  const std::vector<T>& storage() const { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  bool operator==(const Grid&) const = default;

 private:
  void validate() const {
    if (dims_.size() < 1 || dims_.size() > 3)
      throw InvalidArgument("volumes must have 1 to 3 axes, got " + std::to_string(dims_.size()));
    for (auto d : dims_)
      if (d == 0) throw InvalidArgument("zero-length axis in dims " + format_dims(dims_));
    if (channels_ == 0) throw InvalidArgument("channel count must be positive");
  }

  Dims dims_;
  std::size_t channels_ = 1;
  std::vector<T> data_;
};

// Calls fn(block_offset, volume_offset, run_length) for each contiguous run
// (one row of the last axis, all channels) of `r` inside a grid of `dims`.
template <typename Fn>
void for_each_row(const Dims& dims, std::size_t channels, const BlockRegion& r, Fn&& fn) {
  const std::size_t n = dims.size();
  std::vector<std::size_t> stride(n);
  std::size_t s = channels;
  for (std::size_t a = n; a-- > 0;) {
    stride[a] = s;
    s *= dims[a];
  }
  const std::size_t run = r.extent[n - 1] * channels;
  std::size_t rows = 1;
  for (std::size_t a = 0; a + 1 < n; ++a) rows *= r.extent[a];
  std::vector<std::size_t> idx(n, 0);
  for (std::size_t row = 0; row < rows; ++row) {
    std::size_t off = r.origin[n - 1] * channels;
    for (std::size_t a = 0; a + 1 < n; ++a) off += (r.origin[a] + idx[a]) * stride[a];
    fn(row * run, off, run);
    for (std::size_t a = n - 1; a-- > 0;) {
      if (++idx[a] < r.extent[a]) break;
      idx[a] = 0;
    }
  }
}

template <typename T>
Grid<T> extract_block(const Grid<T>& g, const BlockRegion& r) {
  check_region(g.dims(), r);
  Grid<T> out(r.extent, g.channels());
  for_each_row(g.dims(), g.channels(), r, [&](std::size_t bo, std::size_t vo, std::size_t len) {
    std::copy_n(g.data().begin() + vo, len, out.data().begin() + bo);
  });
  return out;
}

// Every voxel carries the same value in each channel.
template <typename T>
bool is_flat(const Grid<T>& g) {
  const std::size_t c = g.channels();
  for (std::size_t i = c; i < g.size(); ++i)
    if (g[i] != g[i % c]) return false;
  return true;
}

template <typename T>
void insert_block(Grid<T>& g, const BlockRegion& r, const Grid<T>& block) {
  check_region(g.dims(), r);
  if (block.dims() != r.extent || block.channels() != g.channels())
    throw InvalidArgument("block shape does not match region extent");
  for_each_row(g.dims(), g.channels(), r, [&](std::size_t bo, std::size_t vo, std::size_t len) {
    std::copy_n(block.data().begin() + bo, len, g.data().begin() + vo);
  });
}

// Real-valued grid, normalized intensities during coding.
using Field = Grid<double>;

// Source volume of integer intensities (u8 or u16, stored widened).
struct Volume {
  Grid<std::uint16_t> grid;
  DType dtype = DType::U8;
  IntensityNorm norm{0.0, 255.0};

  const Dims& dims() const { return grid.dims(); }
  std::size_t channels() const { return grid.channels(); }
  std::size_t voxels() const { return grid.voxels(); }
  bool operator==(const Volume& o) const { return dtype == o.dtype && grid == o.grid; }
};

Volume make_volume(Dims dims, DType dtype, std::size_t channels, std::vector<std::uint16_t> data);

Volume volume_from_bytes(std::span<const std::uint8_t> bytes, const Dims& dims, DType dtype,
                         std::size_t channels = 1);
std::vector<std::uint8_t> volume_to_bytes(const Volume& v);

Volume load_raw(const std::filesystem::path& path, const Dims& dims, DType dtype,
                std::size_t channels = 1);
void save_raw(const std::filesystem::path& path, const Volume& v);

// Data min/max of the volume; a constant volume gets hi = lo + 1.
IntensityNorm data_norm(const Volume& v);

double normalize_value(double x, const IntensityNorm& n);
double denormalize_value(double y, const IntensityNorm& n);

// x -> 2 (x - lo) / (hi - lo) - 1, clamped to [-1, 1].
Field normalize(const Volume& v, const IntensityNorm& n);
// Inverse mapping followed by round-to-nearest and clamping to the dtype.
Volume denormalize(const Field& f, const IntensityNorm& n, DType dtype);

// Edge-replicating pad or crop to `dims` (both anchored at the origin).
Volume pad_to(const Volume& v, const Dims& dims);
Volume crop_to(const Volume& v, const Dims& dims);

}  // namespace sci
