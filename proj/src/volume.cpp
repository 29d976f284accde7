#include "sci/volume.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>

namespace sci {

int bit_depth(DType t) { return t == DType::U8 ? 8 : 16; }

double dtype_max(DType t) { return t == DType::U8 ? 255.0 : 65535.0; }

std::string_view dtype_name(DType t) { return t == DType::U8 ? "u8" : "u16"; }

DType parse_dtype(std::string_view s) {
  if (s == "u8") return DType::U8;
  if (s == "u16") return DType::U16;
  throw InvalidArgument("unknown dtype '" + std::string(s) + "' (expected u8 or u16)");
}

Dims parse_dims(std::string_view s) {
  Dims out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t end = s.find('x', pos);
    if (end == std::string_view::npos) end = s.size();
    std::size_t v = 0;
    auto tok = s.substr(pos, end - pos);
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (tok.empty() || ec != std::errc() || p != tok.data() + tok.size() || v == 0)
      throw InvalidArgument("bad dims '" + std::string(s) + "' (expected e.g. 64x64x64)");
    out.push_back(v);
    pos = end + 1;
  }
  return out;
}

std::string format_dims(const Dims& d) {
  std::string s;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (i) s += 'x';
    s += std::to_string(d[i]);
  }
  return s;
}

std::size_t voxel_count(const Dims& d) {
  std::size_t n = 1;
  for (auto v : d) n *= v;
  return n;
}

void check_region(const Dims& dims, const BlockRegion& r) {
  if (r.origin.size() != dims.size() || r.extent.size() != dims.size())
    throw InvalidArgument("region rank does not match volume rank");
  for (std::size_t a = 0; a < dims.size(); ++a) {
    if (r.extent[a] == 0 || r.origin[a] + r.extent[a] > dims[a])
      throw InvalidArgument("region out of bounds on axis " + std::to_string(a) + ": origin " +
                            std::to_string(r.origin[a]) + " extent " + std::to_string(r.extent[a]) +
                            " dim " + std::to_string(dims[a]));
  }
}

Volume make_volume(Dims dims, DType dtype, std::size_t channels, std::vector<std::uint16_t> data) {
  if (dims.size() != 2 && dims.size() != 3)
    throw InvalidArgument("volumes must be 2-D or 3-D, got dims " + format_dims(dims));
  const auto top = static_cast<std::uint16_t>(dtype_max(dtype));
  for (auto v : data)
    if (v > top) throw InvalidArgument("intensity " + std::to_string(v) + " exceeds u8 range");
  Volume v{Grid<std::uint16_t>(std::move(dims), channels, std::move(data)), dtype,
           IntensityNorm::for_dtype(dtype)};
  return v;
}

Volume volume_from_bytes(std::span<const std::uint8_t> bytes, const Dims& dims, DType dtype,
                         std::size_t channels) {
  const std::size_t bpv = static_cast<std::size_t>(bit_depth(dtype) / 8);
  const std::size_t expected = voxel_count(dims) * channels * bpv;
  if (bytes.size() != expected)
    throw InvalidArgument("size mismatch: expected " + std::to_string(expected) + " bytes for " +
                          format_dims(dims) + " " + std::string(dtype_name(dtype)) + ", got " +
                          std::to_string(bytes.size()));
  std::vector<std::uint16_t> data(voxel_count(dims) * channels);
  if (dtype == DType::U8) {
    std::copy(bytes.begin(), bytes.end(), data.begin());
  } else {
    for (std::size_t i = 0; i < data.size(); ++i)
      data[i] = static_cast<std::uint16_t>(bytes[2 * i] | (bytes[2 * i + 1] << 8));
  }
  return make_volume(dims, dtype, channels, std::move(data));
}

std::vector<std::uint8_t> volume_to_bytes(const Volume& v) {
  const auto& d = v.grid.storage();
  std::vector<std::uint8_t> out;
  if (v.dtype == DType::U8) {
    out.assign(d.begin(), d.end());
  } else {
    out.resize(d.size() * 2);
    for (std::size_t i = 0; i < d.size(); ++i) {
      out[2 * i] = static_cast<std::uint8_t>(d[i] & 0xff);
      out[2 * i + 1] = static_cast<std::uint8_t>(d[i] >> 8);
    }
  }
  return out;
}

Volume load_raw(const std::filesystem::path& path, const Dims& dims, DType dtype,
                std::size_t channels) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed: " + path.string());
  return volume_from_bytes(bytes, dims, dtype, channels);
}

void save_raw(const std::filesystem::path& path, const Volume& v) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot create " + path.string());
  auto bytes = volume_to_bytes(v);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

IntensityNorm data_norm(const Volume& v) {
  auto [mn, mx] = std::minmax_element(v.grid.storage().begin(), v.grid.storage().end());
  double lo = *mn, hi = *mx;
  if (hi == lo) hi = lo + 1.0;
  return {lo, hi};
}

namespace {
void check_norm(const IntensityNorm& n) {
  if (!(n.hi > n.lo))
    throw InvalidArgument("degenerate intensity range: lo=" + std::to_string(n.lo) +
                          " hi=" + std::to_string(n.hi));
}
}  // namespace

double normalize_value(double x, const IntensityNorm& n) {
  double y = 2.0 * (x - n.lo) / (n.hi - n.lo) - 1.0;
  return std::clamp(y, -1.0, 1.0);
}

double denormalize_value(double y, const IntensityNorm& n) {
  return (y + 1.0) * 0.5 * (n.hi - n.lo) + n.lo;
}

Field normalize(const Volume& v, const IntensityNorm& n) {
  check_norm(n);
  std::vector<double> out(v.grid.size());
  const auto& src = v.grid.storage();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = normalize_value(src[i], n);
  return Field(v.dims(), v.channels(), std::move(out));
}

Volume denormalize(const Field& f, const IntensityNorm& n, DType dtype) {
  check_norm(n);
  const double top = dtype_max(dtype);
  std::vector<std::uint16_t> out(f.size());
  const auto& src = f.storage();
  for (std::size_t i = 0; i < out.size(); ++i) {
    double x = std::nearbyint(denormalize_value(src[i], n));
    if (!(x >= 0.0)) x = 0.0;  // also catches NaN
    out[i] = static_cast<std::uint16_t>(std::min(x, top));
  }
  Volume v = make_volume(f.dims(), dtype, f.channels(), std::move(out));
  v.norm = n;
  return v;
}

namespace {
Volume resample_origin(const Volume& v, const Dims& dims) {
  if (dims.size() != v.dims().size()) throw InvalidArgument("rank mismatch in resize");
  const std::size_t n = dims.size(), c = v.channels();
  std::vector<std::uint16_t> out(voxel_count(dims) * c);
  std::vector<std::size_t> idx(n, 0);
  for (std::size_t lin = 0; lin < voxel_count(dims); ++lin) {
    std::size_t src = 0;
    for (std::size_t a = 0; a < n; ++a) src = src * v.dims()[a] + std::min(idx[a], v.dims()[a] - 1);
    for (std::size_t k = 0; k < c; ++k) out[lin * c + k] = v.grid[src * c + k];
    for (std::size_t a = n; a-- > 0;) {
      if (++idx[a] < dims[a]) break;
      idx[a] = 0;
    }
  }
  Volume r = make_volume(dims, v.dtype, c, std::move(out));
  r.norm = v.norm;
  return r;
}
}  // namespace

Volume pad_to(const Volume& v, const Dims& dims) {
  for (std::size_t a = 0; a < dims.size() && a < v.dims().size(); ++a)
    if (dims[a] < v.dims()[a]) throw InvalidArgument("pad target smaller than volume");
  return resample_origin(v, dims);
}

Volume crop_to(const Volume& v, const Dims& dims) {
  for (std::size_t a = 0; a < dims.size() && a < v.dims().size(); ++a)
    if (dims[a] > v.dims()[a]) throw InvalidArgument("crop target larger than volume");
  return resample_origin(v, dims);
}

}  // namespace sci
