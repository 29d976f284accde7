#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "sci/cli.hpp"
#include "sci/volume.hpp"

using namespace sci;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string value(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    if (line.rfind(key + "=", 0) == 0) return line.substr(key.size() + 1);
  return {};
}

fs::path scratch() {
  auto d = fs::temp_directory_path() / "sci_cli_test";
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(call({}).code == 2);
  CHECK(call({"frobnicate"}).code == 2);
  CHECK(call({"compress", "--input", "x", "--dims", "8x8x8", "-o", "y", "--bogus"}).code == 2);
  // exactly one of --ratio and --bpv
  CHECK(call({"compress", "--input", "x", "--dims", "8x8x8", "-o", "y"}).code == 2);
  CHECK(call({"compress", "--input", "x", "--dims", "8x8x8", "-o", "y", "--ratio", "8", "--bpv", "1"}).code == 2);
  CHECK(call({"compress", "--input", "x", "--dims", "8x8x8", "-o", "y", "--ratio", "8", "--dtype", "f32"}).code == 2);
}

TEST_CASE("pipeline failures exit with 1") {
  const auto d = scratch();
  const auto r = call({"compress", "--input", (d / "missing.raw").string(), "--dims", "8x8x8", "-o",
                       (d / "a.sci").string(), "--ratio", "8"});
  CHECK(r.code == 1);
  CHECK_FALSE(r.err.empty());
  std::ofstream(d / "junk.sci") << "not an archive";
  CHECK(call({"decompress", (d / "junk.sci").string(), "-o", (d / "j.raw").string()}).code == 1);
}

TEST_CASE("compress, decompress and eval end to end") {
  const auto d = scratch();
  const Volume v = fixtures::plane_waves(32, DType::U16, 1, 4);
  save_raw(d / "v.raw", v);
  const auto c = call({"compress", "--input", (d / "v.raw").string(), "--dims", "32x32x32", "--dtype", "u16",
                       "--ratio", "32", "--iters", "200", "--seed", "3", "-o", (d / "v.sci").string(), "--log",
                       (d / "log.csv").string(), "--log-every", "50"});
  REQUIRE(c.code == 0);
  CHECK(std::stoul(value(c.out, "bytes")) == fs::file_size(d / "v.sci"));
  CHECK(std::stod(value(c.out, "bpv")) <= 0.5);
  std::ifstream log(d / "log.csv");
  std::string header;
  std::getline(log, header);
  CHECK(header == "block,iteration,loss");

  REQUIRE(call({"decompress", (d / "v.sci").string(), "-o", (d / "r.raw").string()}).code == 0);
  CHECK(fs::file_size(d / "r.raw") == 32 * 32 * 32 * 2);
  const auto e = call({"eval", "--orig", (d / "v.raw").string(), "--dims", "32x32x32", "--dtype", "u16", "--recon",
                       (d / "r.raw").string(), "--archive", (d / "v.sci").string()});
  REQUIRE(e.code == 0);
  CHECK(e.out.rfind("bpv,psnr,ssim,acc@200,acc@500\n", 0) == 0);

  // same flags, same bytes
  call({"compress", "--input", (d / "v.raw").string(), "--dims", "32x32x32", "--dtype", "u16", "--ratio", "32",
        "--iters", "200", "--seed", "3", "-o", (d / "w.sci").string(), "--workers", "1"});
  std::ifstream a(d / "v.sci", std::ios::binary), b(d / "w.sci", std::ios::binary);
  CHECK(std::string(std::istreambuf_iterator<char>(a), {}) == std::string(std::istreambuf_iterator<char>(b), {}));
  fs::remove_all(d);
}

TEST_CASE("analyze and theory") {
  const auto d = scratch();
  save_raw(d / "v.raw", fixtures::plane_waves(32, DType::U8, 2, 4));
  const auto a = call({"analyze", "--input", (d / "v.raw").string(), "--dims", "32x32x32", "--levels", "2",
                       "--emit-partition"});
  REQUIRE(a.code == 0);
  CHECK(a.out.rfind("level,origin,extent,D\n", 0) == 0);
  const auto t = call({"theory", "--beta", "1.5", "--max-order", "5"});
  REQUIRE(t.code == 0);
  CHECK(t.out.rfind("m,predicted,measured,abs_error\n", 0) == 0);
  CHECK(t.out.find("truncation_bound") != std::string::npos);
  fs::remove_all(d);
}
