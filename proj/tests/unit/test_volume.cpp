#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <numeric>

#include "sci/error.hpp"
#include "sci/rng.hpp"
#include "sci/volume.hpp"

using namespace sci;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("sci_test_" + name);
}

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream o(p, std::ios::binary);
  o.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

Volume random_volume(const Dims& dims, DType t, std::uint64_t seed, std::size_t channels = 1) {
  Rng rng(seed);
  std::vector<std::uint16_t> d(voxel_count(dims) * channels);
  for (auto& x : d) x = static_cast<std::uint16_t>(rng.below(static_cast<std::uint64_t>(dtype_max(t)) + 1));
  return make_volume(dims, t, channels, std::move(d));
}

}  // namespace

TEST_CASE("dims parse and format") {
  CHECK(parse_dims("64x32x16") == Dims{64, 32, 16});
  CHECK(parse_dims("7x9") == Dims{7, 9});
  CHECK(format_dims({3, 4, 5}) == "3x4x5");
  CHECK_THROWS_AS(parse_dims("64x0x2"), InvalidArgument);
  CHECK_THROWS_AS(parse_dims("64xx2"), InvalidArgument);
  CHECK_THROWS_AS(parse_dims(""), InvalidArgument);
  CHECK_THROWS_AS(parse_dims("a"), InvalidArgument);
}

TEST_CASE("dtype helpers") {
  CHECK(bit_depth(DType::U8) == 8);
  CHECK(bit_depth(DType::U16) == 16);
  CHECK(dtype_max(DType::U16) == 65535.0);
  CHECK(parse_dtype("u16") == DType::U16);
  CHECK_THROWS_AS(parse_dtype("f32"), InvalidArgument);
}

TEST_CASE("make_volume validates rank and range") {
  CHECK_NOTHROW(make_volume({2, 2}, DType::U8, 1, std::vector<std::uint16_t>(4, 255)));
  CHECK_THROWS_AS(make_volume({8}, DType::U8, 1, std::vector<std::uint16_t>(8)), InvalidArgument);
  CHECK_THROWS_AS(make_volume({2, 2}, DType::U8, 1, std::vector<std::uint16_t>(4, 256)), InvalidArgument);
  CHECK_THROWS_AS(make_volume({2, 2}, DType::U8, 1, std::vector<std::uint16_t>(5)), InvalidArgument);
}

TEST_CASE("load_raw u8 identity layout") {
  const auto p = temp_file("u8.raw");
  std::vector<std::uint8_t> b(8);
  std::iota(b.begin(), b.end(), 0);
  write_bytes(p, b);
  const Volume v = load_raw(p, {2, 2, 2}, DType::U8);
  CHECK(v.grid[0] == 0);
  CHECK(v.grid[7] == 7);
  std::filesystem::remove(p);
}

TEST_CASE("load_raw u16 is little-endian") {
  const std::vector<std::uint8_t> b{0x01, 0x00, 0x00, 0x01, 0xff, 0xff, 0x34, 0x12};
  const Volume v = volume_from_bytes(b, {2, 2}, DType::U16);
  CHECK(v.grid[0] == 1);
  CHECK(v.grid[1] == 256);
  CHECK(v.grid[2] == 65535);
  CHECK(v.grid[3] == 0x1234);
}

TEST_CASE("load_raw size mismatch names both sizes") {
  const auto p = temp_file("short.raw");
  write_bytes(p, std::vector<std::uint8_t>(524288));
  try {
    (void)load_raw(p, {32, 128, 128}, DType::U16);
    FAIL("no error");
  } catch (const InvalidArgument& e) {
    const std::string m = e.what();
    CHECK(m.find("size mismatch") != std::string::npos);
    CHECK(m.find("1048576") != std::string::npos);
    CHECK(m.find("524288") != std::string::npos);
  }
  std::filesystem::remove(p);
  CHECK_THROWS_AS(load_raw(temp_file("missing.raw"), {2, 2}, DType::U8), IoError);
}

TEST_CASE("save then load is bit-exact for both dtypes") {
  for (DType t : {DType::U8, DType::U16}) {
    const Volume v = random_volume({5, 6, 7}, t, 11, 2);
    const auto p = temp_file("rt.raw");
    save_raw(p, v);
    CHECK(std::filesystem::file_size(p) == 5 * 6 * 7 * 2 * static_cast<std::size_t>(bit_depth(t) / 8));
    CHECK(load_raw(p, {5, 6, 7}, t, 2) == v);
    std::filesystem::remove(p);
  }
}

TEST_CASE("normalize endpoints and midpoint") {
  const IntensityNorm n{0.0, 255.0};
  CHECK(normalize_value(0.0, n) == -1.0);
  CHECK(normalize_value(255.0, n) == 1.0);
  CHECK(normalize_value(127.5, n) == 0.0);
  CHECK(normalize_value(400.0, n) == 1.0);
  const IntensityNorm m{10.0, 20.0};
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.uniform(10.0, 20.0);
    CHECK(denormalize_value(normalize_value(x, m), m) == doctest::Approx(x).epsilon(1e-6));
  }
  const Volume v = make_volume({2, 2}, DType::U8, 1, {5, 5, 5, 5});
  CHECK_THROWS_AS(normalize(v, IntensityNorm{5.0, 5.0}), InvalidArgument);
}

TEST_CASE("normalize then denormalize restores every integer value") {
  for (DType t : {DType::U8, DType::U16}) {
    const std::size_t n = static_cast<std::size_t>(dtype_max(t)) + 1;
    std::vector<std::uint16_t> d(n);
    std::iota(d.begin(), d.end(), 0);
    const Volume v = make_volume({1, n}, t, 1, d);
    const auto norm = IntensityNorm::for_dtype(t);
    CHECK(denormalize(normalize(v, norm), norm, t) == v);
  }
}

TEST_CASE("data_norm spans the data; constant data gets a unit range") {
  const Volume v = make_volume({2, 2}, DType::U16, 1, {7, 300, 9, 12});
  CHECK(data_norm(v) == IntensityNorm{7.0, 300.0});
  const Volume c = make_volume({2, 2}, DType::U16, 1, {4, 4, 4, 4});
  CHECK(data_norm(c) == IntensityNorm{4.0, 5.0});
}

TEST_CASE("extract_block indexing and reassembly") {
  std::vector<std::uint16_t> d(16);
  std::iota(d.begin(), d.end(), 0);
  const Volume v = make_volume({4, 4}, DType::U8, 1, d);
  const auto q = extract_block(v.grid, BlockRegion{{2, 2}, {2, 2}, 2});
  CHECK(q.storage() == std::vector<std::uint16_t>{10, 11, 14, 15});
  CHECK(extract_block(v.grid, BlockRegion{{0, 0}, {4, 4}, 1}) == v.grid);
  CHECK_THROWS_AS(extract_block(v.grid, BlockRegion{{3, 0}, {2, 2}, 2}), InvalidArgument);

  const Volume r = random_volume({8, 6, 4}, DType::U16, 5, 3);
  Grid<std::uint16_t> out(r.dims(), r.channels());
  for (std::size_t z = 0; z < 2; ++z)
    for (std::size_t y = 0; y < 2; ++y)
      for (std::size_t x = 0; x < 2; ++x) {
        const BlockRegion b{{z * 4, y * 3, x * 2}, {4, 3, 2}, 2};
        insert_block(out, b, extract_block(r.grid, b));
      }
  CHECK(out == r.grid);
}

TEST_CASE("pad replicates edges and crop undoes it") {
  const Volume v = random_volume({3, 5}, DType::U8, 9);
  const Volume p = pad_to(v, {4, 8});
  CHECK(p.dims() == Dims{4, 8});
  CHECK(p.grid[3 * 8 + 7] == v.grid[2 * 5 + 4]);
  CHECK(p.grid[0 * 8 + 6] == v.grid[0 * 5 + 4]);
  CHECK(crop_to(p, {3, 5}) == v);
  CHECK_THROWS_AS(pad_to(v, {2, 5}), InvalidArgument);
}
