#include "sci/codec.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <exception>
#include <fstream>
#include <iterator>
#include <map>
#include <mutex>
#include <numbers>

#include <omp.h>

#include "sci/error.hpp"
#include "sci/half.hpp"
#include "sci/rng.hpp"
#include "sci/spectrum.hpp"

namespace sci {

// ---- block names -----------------------------------------------------------

namespace {

constexpr std::string_view kAxes3[] = {"d", "h", "w"};
constexpr std::string_view kAxes2[] = {"h", "w"};

std::span<const std::string_view> axis_tags(std::size_t rank) {
  if (rank == 3) return kAxes3;
  if (rank == 2) return kAxes2;
  throw InvalidArgument("block names exist for 2-D and 3-D regions only");
}

bool parse_uint(std::string_view s, std::size_t& out) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

}  // namespace

std::string render_block_name(const BlockRegion& r) {
  const auto tags = axis_tags(r.origin.size());
  std::string s;
  for (std::size_t a = 0; a < tags.size(); ++a) {
    if (a) s += '-';
    s += tags[a];
    s += '_' + std::to_string(r.origin[a]) + '_' + std::to_string(r.origin[a] + r.extent[a] - 1);
  }
  return s;
}

BlockRegion parse_block_name(std::string_view name, const Dims* volume_dims) {
  std::vector<std::string_view> parts;
  for (std::size_t pos = 0;;) {
    const std::size_t dash = name.find('-', pos);
    parts.push_back(name.substr(pos, dash == std::string_view::npos ? std::string_view::npos : dash - pos));
    if (dash == std::string_view::npos) break;
    pos = dash + 1;
  }
  const auto bad = [&] { return InvalidArgument("malformed block name '" + std::string(name) + "'"); };
  if (parts.size() != 2 && parts.size() != 3) throw bad();
  const auto tags = axis_tags(parts.size());
  BlockRegion r;
  for (std::size_t a = 0; a < parts.size(); ++a) {
    auto p = parts[a];
    if (p.size() < tags[a].size() + 4 || p.substr(0, tags[a].size()) != tags[a] || p[tags[a].size()] != '_')
      throw bad();
    p.remove_prefix(tags[a].size() + 1);
    const std::size_t us = p.find('_');
    std::size_t lo = 0, hi = 0;
    if (us == std::string_view::npos || !parse_uint(p.substr(0, us), lo) || !parse_uint(p.substr(us + 1), hi) ||
        hi < lo)
      throw bad();
    r.origin.push_back(lo);
    r.extent.push_back(hi - lo + 1);
  }
  r.level = 1;
  if (volume_dims && volume_dims->size() == r.extent.size()) {
    int level = 0;
    for (int l = 1; l <= 32; ++l) {
      const std::size_t div = std::size_t{1} << (l - 1);
      bool match = true;
      for (std::size_t a = 0; a < r.extent.size(); ++a)
        match = match && (*volume_dims)[a] % div == 0 && (*volume_dims)[a] / div == r.extent[a];
      if (match) {
        level = l;
        break;
      }
    }
    r.level = level ? level : 1;
  }
  return r;
}

// ---- metadata --------------------------------------------------------------

namespace {

std::string num(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

}  // namespace

std::string render_metadata(const ArchiveMetadata& m) {
  std::string s;
  s += "dims=" + format_dims(m.dims) + '\n';
  s += "dtype=" + std::to_string(static_cast<int>(m.dtype)) + '\n';
  s += "channels=" + std::to_string(m.channels) + '\n';
  s += "norm=" + std::to_string(static_cast<int>(m.norm_kind)) + '\n';
  if (m.norm_kind == NormKind::Explicit) {
    s += "lo=" + num(m.norm.lo) + '\n';
    s += "hi=" + num(m.norm.hi) + '\n';
  }
  s += "w0=" + num(m.w0) + '\n';
  s += "fr=" + num(m.fr) + '\n';
  s += "layers=" + std::to_string(m.layers) + '\n';
  s += "param_bits=" + std::to_string(m.param_bits) + '\n';
  s += "coords=" + std::string(m.global_coords ? "1" : "0") + '\n';
  s += "deblock=" + num(m.deblock_tau) + '\n';
  if (!m.source_dims.empty()) s += "source=" + format_dims(m.source_dims) + '\n';
  return s;
}

ArchiveMetadata parse_metadata(std::string_view text, std::size_t base) {
  std::map<std::string, std::string, std::less<>> kv;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) throw FormatError("metadata line not terminated", base + pos);
    auto line = text.substr(pos, nl - pos);
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos || eq == 0) throw FormatError("malformed metadata line", base + pos);
    if (!kv.emplace(std::string(line.substr(0, eq)), std::string(line.substr(eq + 1))).second)
      throw FormatError("duplicate metadata key '" + std::string(line.substr(0, eq)) + "'", base + pos);
    pos = nl + 1;
  }
  auto take = [&](std::string_view key) -> std::string {
    auto it = kv.find(key);
    if (it == kv.end()) throw FormatError("metadata key '" + std::string(key) + "' missing", base);
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  auto as_double = [&](std::string_view key) {
    const std::string v = take(key);
    double d = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
    if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(d))
      throw FormatError("bad number for metadata key '" + std::string(key) + "'", base);
    return d;
  };
  auto as_uint = [&](std::string_view key) {
    const std::string v = take(key);
    std::size_t u = 0;
    if (!parse_uint(v, u)) throw FormatError("bad integer for metadata key '" + std::string(key) + "'", base);
    return u;
  };
  ArchiveMetadata m;
  try {
    m.dims = parse_dims(take("dims"));
    if (m.dims.size() != 2 && m.dims.size() != 3) throw InvalidArgument("rank");
  } catch (const InvalidArgument&) {
    throw FormatError("bad dims in metadata", base);
  }
  const auto dt = as_uint("dtype");
  if (dt > 1) throw FormatError("unknown dtype index", base);
  m.dtype = static_cast<DType>(dt);
  m.channels = as_uint("channels");
  if (m.channels == 0 || m.channels > 255) throw FormatError("bad channel count", base);
  const auto nk = as_uint("norm");
  if (nk > 1) throw FormatError("unknown norm index", base);
  m.norm_kind = static_cast<NormKind>(nk);
  if (m.norm_kind == NormKind::Explicit) {
    m.norm.lo = as_double("lo");
    m.norm.hi = as_double("hi");
    if (!(m.norm.hi > m.norm.lo)) throw FormatError("degenerate intensity range", base);
  } else {
    m.norm = IntensityNorm::for_dtype(m.dtype);
  }
  m.w0 = as_double("w0");
  m.fr = as_double("fr");
  m.layers = as_uint("layers");
  const auto pb = as_uint("param_bits");
  if (pb != 16 && pb != 32) throw FormatError("param_bits must be 16 or 32", base);
  m.param_bits = static_cast<int>(pb);
  const auto cm = as_uint("coords");
  if (cm > 1) throw FormatError("unknown coordinate mode", base);
  m.global_coords = cm == 1;
  m.deblock_tau = as_double("deblock");
  if (m.deblock_tau < 0) throw FormatError("negative deblock threshold", base);
  if (kv.count("source")) {
    try {
      m.source_dims = parse_dims(take("source"));
    } catch (const InvalidArgument&) {
      throw FormatError("bad source dims in metadata", base);
    }
    if (m.source_dims.size() != m.dims.size()) throw FormatError("source dims rank mismatch", base);
    for (std::size_t a = 0; a < m.dims.size(); ++a)
      if (m.source_dims[a] > m.dims[a]) throw FormatError("source dims exceed coded dims", base);
  }
  if (!kv.empty()) throw FormatError("unknown metadata key '" + kv.begin()->first + "'", base);
  return m;
}

// ---- container -------------------------------------------------------------

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v & 0xff));
    u8(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
  }
  void bytes(std::span<const std::uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  void text(std::string_view s) { buf_.insert(buf_.end(), s.begin(), s.end()); }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}
  std::size_t offset() const { return pos_; }
  bool done() const { return pos_ == b_.size(); }

  void need(std::size_t n, const char* what, const std::string& block = {}) const {
    if (b_.size() - pos_ < n)
      throw FormatError(std::string("truncated ") + what + ": need " + std::to_string(n) + " bytes, " +
                            std::to_string(b_.size() - pos_) + " left",
                        pos_, block);
  }
  std::uint8_t u8(const char* what, const std::string& block = {}) {
    need(1, what, block);
    return b_[pos_++];
  }
  std::uint16_t u16(const char* what, const std::string& block = {}) {
    need(2, what, block);
    const auto v = static_cast<std::uint16_t>(b_[pos_] | (b_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32(const char* what, const std::string& block = {}) {
    need(4, what, block);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::span<const std::uint8_t> bytes(std::size_t n, const char* what, const std::string& block = {}) {
    need(n, what, block);
    auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize(const Archive& a) {
  Writer w;
  w.text(kMagic);
  const std::string meta = render_metadata(a.meta);
  w.u32(static_cast<std::uint32_t>(meta.size()));
  w.text(meta);
  w.u32(static_cast<std::uint32_t>(a.blocks.size()));
  for (const auto& b : a.blocks) {
    if (b.name.size() > 0xffff || b.widths.size() > 0xff)
      throw InvalidArgument("block record too large to serialize");
    w.u16(static_cast<std::uint16_t>(b.name.size()));
    w.text(b.name);
    w.u8(static_cast<std::uint8_t>(b.widths.size()));
    for (auto x : b.widths) w.u16(x);
    w.u32(static_cast<std::uint32_t>(b.payload.size()));
    w.bytes(b.payload);
  }
  return w.take();
}

Archive parse_archive(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  auto magic = r.bytes(kMagic.size(), "magic");
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin()))
    throw FormatError("bad magic (not an SCI1 archive)", 0);
  const std::uint32_t mlen = r.u32("metadata length");
  const std::size_t moff = r.offset();
  auto mbytes = r.bytes(mlen, "metadata");
  Archive a;
  a.meta = parse_metadata(std::string_view(reinterpret_cast<const char*>(mbytes.data()), mbytes.size()), moff);
  const std::uint32_t count = r.u32("block count");
  const std::size_t pbytes = static_cast<std::size_t>(a.meta.param_bits / 8);
  for (std::uint32_t k = 0; k < count; ++k) {
    BlockRecord b;
    const std::string where = "#" + std::to_string(k);
    const std::uint16_t nlen = r.u16("block name length", where);
    auto nb = r.bytes(nlen, "block name", where);
    b.name.assign(nb.begin(), nb.end());
    const std::uint8_t wc = r.u8("width count", b.name);
    if (wc == 0) throw FormatError("block has no layers", r.offset(), b.name);
    for (std::uint8_t i = 0; i < wc; ++i) {
      b.widths.push_back(r.u16("layer widths", b.name));
      if (b.widths.back() == 0) throw FormatError("zero layer width", r.offset(), b.name);
    }
    const std::uint32_t plen = r.u32("payload length", b.name);
    const std::size_t in_dim = a.meta.dims.size();
    const std::size_t expect =
        parameter_count(in_dim, std::vector<std::size_t>(b.widths.begin(), b.widths.end())) * pbytes;
    if (plen != expect)
      throw FormatError("payload length " + std::to_string(plen) + " does not match widths (" +
                            std::to_string(expect) + ")",
                        r.offset(), b.name);
    auto pl = r.bytes(plen, "payload", b.name);
    b.payload.assign(pl.begin(), pl.end());
    a.blocks.push_back(std::move(b));
  }
  if (!r.done()) throw FormatError("trailing bytes after last block", r.offset());
  return a;
}

std::size_t block_header_bytes(std::size_t name_length, std::size_t widths_per_block) {
  return 2 + name_length + 1 + 2 * widths_per_block + 4;
}

std::size_t container_overhead(const ArchiveMetadata& meta, std::span<const std::string> names,
                               std::size_t widths_per_block) {
  std::size_t s = kMagic.size() + 4 + render_metadata(meta).size() + 4;
  for (const auto& n : names) s += block_header_bytes(n.size(), widths_per_block);
  return s;
}

std::vector<std::uint8_t> pack_parameters(std::span<const double> params, int param_bits) {
  std::vector<std::uint8_t> out;
  if (param_bits == 16) {
    out.reserve(params.size() * 2);
    for (double p : params) {
      const std::uint16_t h = to_half(p);
      out.push_back(static_cast<std::uint8_t>(h & 0xff));
      out.push_back(static_cast<std::uint8_t>(h >> 8));
    }
  } else if (param_bits == 32) {
    out.reserve(params.size() * 4);
    for (double p : params) {
      const auto u = std::bit_cast<std::uint32_t>(static_cast<float>(p));
      for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((u >> (8 * i)) & 0xff));
    }
  } else {
    throw InvalidArgument("param_bits must be 16 or 32");
  }
  return out;
}

std::vector<double> unpack_parameters(std::span<const std::uint8_t> payload, int param_bits) {
  const std::size_t width = static_cast<std::size_t>(param_bits / 8);
  if ((param_bits != 16 && param_bits != 32) || payload.size() % width)
    throw InvalidArgument("payload size does not match parameter width");
  std::vector<double> out(payload.size() / width);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const std::uint8_t* p = payload.data() + i * width;
    if (param_bits == 16) {
      out[i] = half_to_double(static_cast<std::uint16_t>(p[0] | (p[1] << 8)));
    } else {
      std::uint32_t u = 0;
      for (std::size_t k = 0; k < 4; ++k) u |= static_cast<std::uint32_t>(p[k]) << (8 * k);
      out[i] = std::bit_cast<float>(u);
    }
  }
  return out;
}

void quantize_network(FunnelNetwork& net, int param_bits) {
  for (auto& p : net.parameters())
    p = param_bits == 16 ? round_to_half(p) : static_cast<double>(static_cast<float>(p));
}

// ---- directory layout ----------------------------------------------------

void write_directory(const Archive& a, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream m(dir / "metadata.txt", std::ios::binary | std::ios::trunc);
    if (!m) throw IoError("cannot create " + (dir / "metadata.txt").string());
    m << render_metadata(a.meta);
  }
  for (const auto& b : a.blocks) {
    Writer w;
    w.u8(static_cast<std::uint8_t>(b.widths.size()));
    for (auto x : b.widths) w.u16(x);
    w.bytes(b.payload);
    const auto bytes = w.take();
    std::ofstream f(dir / b.name, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot create " + (dir / b.name).string());
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("write failed: " + (dir / b.name).string());
  }
}

Archive read_directory(const std::filesystem::path& dir) {
  auto slurp = [](const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string());
    return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  };
  Archive a;
  const auto mtext = slurp(dir / "metadata.txt");
  a.meta = parse_metadata(std::string_view(reinterpret_cast<const char*>(mtext.data()), mtext.size()));
  std::vector<std::string> names;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name != "metadata.txt" && e.is_regular_file()) names.push_back(name);
  }
  std::sort(names.begin(), names.end());
  const std::size_t pbytes = static_cast<std::size_t>(a.meta.param_bits / 8);
  for (const auto& n : names) {
    const auto bytes = slurp(dir / n);
    Reader r(bytes);
    BlockRecord b;
    b.name = n;
    const std::uint8_t wc = r.u8("width count", n);
    for (std::uint8_t i = 0; i < wc; ++i) b.widths.push_back(r.u16("layer widths", n));
    const std::size_t expect =
        parameter_count(a.meta.dims.size(), std::vector<std::size_t>(b.widths.begin(), b.widths.end())) * pbytes;
    auto pl = r.bytes(expect, "payload", n);
    if (!r.done()) throw FormatError("trailing bytes in block file", r.offset(), n);
    b.payload.assign(pl.begin(), pl.end());
    a.blocks.push_back(std::move(b));
  }
  return a;
}

// ---- constant blocks ---------------------------------------------------------

FunnelNetwork constant_network(const ArchitectureSpec& arch, std::span<const double> values, int param_bits) {
  FunnelNetwork net(arch);
  if (values.size() != arch.out_dim()) throw InvalidArgument("one value per output channel expected");
  const std::size_t depth = net.layer_count();
  auto out = net.layer(depth - 1);
  auto stored = [&](double x) { return param_bits == 16 ? round_to_half(x) : static_cast<double>(static_cast<float>(x)); };
  for (std::size_t o = 0; o < values.size(); ++o) out.bias[o] = stored(values[o]);
  if (depth >= 2) {
    auto carrier = net.layer(depth - 2);
    const double b = stored(std::numbers::pi / (2.0 * arch.w0));
    carrier.bias[0] = b;
    const double a = std::sin(arch.w0 * b);
    for (std::size_t o = 0; o < values.size(); ++o) out.weights[o * out.in] = stored((values[o] - out.bias[o]) / a);
  }
  return net;
}

// ---- pipeline --------------------------------------------------------------

PartitionMode parse_partition_mode(std::string_view s) {
  if (s == "adaptive") return PartitionMode::Adaptive;
  if (s == "equidistant") return PartitionMode::Equidistant;
  if (s == "none") return PartitionMode::None;
  throw InvalidArgument("unknown partition mode '" + std::string(s) + "'");
}

std::string_view partition_mode_name(PartitionMode m) {
  switch (m) {
    case PartitionMode::Adaptive: return "adaptive";
    case PartitionMode::Equidistant: return "equidistant";
    case PartitionMode::None: return "none";
  }
  return "?";
}

double default_deblock_tau(DType t) { return 0.02 * dtype_max(t); }

namespace {

std::uint64_t block_seed(std::uint64_t seed, const BlockRegion& r) {
  std::uint64_t h = mix64(seed);
  for (auto v : r.origin) h = hash_combine(h, v);
  for (auto v : r.extent) h = hash_combine(h, v);
  return h;
}

bool constant_block(const Field& block, std::vector<double>& values) {
  const std::size_t c = block.channels();
  values.assign(block.storage().begin(), block.storage().begin() + static_cast<std::ptrdiff_t>(c));
  for (std::size_t i = 0; i < block.size(); ++i)
    if (block[i] != values[i % c]) return false;
  return true;
}

CoordFrame frame_for(const ArchiveMetadata& m, const BlockRegion& r) {
  if (!m.global_coords) return {};
  return {m.dims, r.origin};
}

}  // namespace

EncodeResult encode(const Volume& v, const EncodeConfig& cfg) {
  if (cfg.ratio.has_value() == cfg.bpv.has_value())
    throw InvalidArgument("exactly one of ratio or bpv must be given");
  if (cfg.param_bits != 16 && cfg.param_bits != 32) throw InvalidArgument("param_bits must be 16 or 32");
  if (cfg.layers < 2 || cfg.layers > 255) throw InvalidArgument("layers must be in 2..255");
  if (cfg.M < 1) throw InvalidArgument("M must be >= 1");
  if (cfg.a_max < 1) throw InvalidArgument("a_max must be >= 1");
  const std::size_t rank = v.dims().size();

  ArchiveMetadata meta;
  meta.dims = v.dims();
  meta.dtype = v.dtype;
  meta.channels = v.channels();
  if (cfg.norm == NormMode::Data) {
    meta.norm_kind = NormKind::Explicit;
    meta.norm = data_norm(v);
  } else {
    meta.norm = IntensityNorm::for_dtype(v.dtype);
  }
  meta.w0 = cfg.w0;
  meta.fr = cfg.fr;
  meta.layers = cfg.layers;
  meta.param_bits = cfg.param_bits;
  meta.global_coords = cfg.global_coords;
  meta.source_dims = cfg.source_dims;
  meta.deblock_tau = cfg.deblock ? (cfg.deblock_tau < 0 ? default_deblock_tau(v.dtype) : cfg.deblock_tau) : 0.0;

  const Field field = normalize(v, meta.norm);
  const int levels = cfg.levels > 0 ? cfg.levels : default_levels(v.dims());

  ArchOptions shape{rank, v.channels(), cfg.layers, cfg.fr, cfg.w0, cfg.taper};
  const int source_bits = bit_depth(v.dtype) * static_cast<int>(v.channels());
  BitBudget budget = cfg.ratio ? BitBudget::from_ratio(v.voxels(), source_bits, *cfg.ratio, cfg.param_bits)
                               : BitBudget::from_bpv(v.voxels(), source_bits, *cfg.bpv, cfg.param_bits);

  EncodeReport report;
  PartitionTree tree;
  switch (cfg.partition) {
    case PartitionMode::Adaptive: {
      tree = build_tree(field, levels, cfg.M, cfg.concentration_power);
      // Cap the block count by what the budget can hold at min_hidden width.
      std::size_t longest = 0;
      for (int l = 1; l <= tree.levels(); ++l)
        for (const auto& nd : tree.level_nodes(l)) longest = std::max(longest, render_block_name(nd.region).size());
      const std::size_t per_block = block_header_bytes(longest, cfg.layers) +
                                    min_parameters(shape, cfg.min_hidden) * static_cast<std::size_t>(cfg.param_bits / 8);
      const double free_bytes = budget.target_bits() / 8.0 - static_cast<double>(container_overhead(meta, {}, 0));
      const std::size_t fit = free_bytes > 0 ? static_cast<std::size_t>(free_bytes / static_cast<double>(per_block)) : 0;
      report.a_max_effective = std::max<std::size_t>(1, std::min(cfg.a_max, fit));
      report.solution = solve_partition(tree, report.a_max_effective);
      break;
    }
    case PartitionMode::Equidistant:
      tree = build_tree(field, std::max(1, cfg.ep_level), cfg.M, cfg.concentration_power);
      report.solution = equidistant_partition(tree, std::max(1, cfg.ep_level));
      report.a_max_effective = report.solution.selected.size();
      break;
    case PartitionMode::None:
      tree = build_tree(field, 1, cfg.M, cfg.concentration_power);
      report.solution = equidistant_partition(tree, 1);
      report.a_max_effective = 1;
      break;
  }
  report.levels = tree.levels();

  std::vector<BlockInput> inputs;
  std::vector<std::string> names;
  for (auto ref : report.solution.selected) {
    const auto& nd = tree.node(ref);
    inputs.push_back({nd.region, nd.score, is_flat(extract_block(field, nd.region))});
    names.push_back(render_block_name(nd.region));
  }
  budget.overhead_bits = 8 * container_overhead(meta, names, cfg.layers);
  report.plans = allocate(inputs, budget, cfg.alloc, shape);
  report.target_bpv = budget.target_bpv;

  const std::size_t nblocks = report.plans.size();
  std::vector<FunnelNetwork> nets(nblocks);
  report.block_mse.assign(nblocks, 0.0);
  std::exception_ptr failure;
  std::mutex log_mu;
  const auto nb = static_cast<std::ptrdiff_t>(nblocks);
  const int threads = cfg.workers > 0 ? cfg.workers : 0;
  auto fit_one = [&](std::ptrdiff_t k) {
    const auto& plan = report.plans[static_cast<std::size_t>(k)];
    const Field block = extract_block(field, plan.region);
    std::vector<double> values;
    if (constant_block(block, values)) {
      nets[static_cast<std::size_t>(k)] = constant_network(plan.arch, values, cfg.param_bits);
      return;
    }
    TrainConfig tc = cfg.train;
    tc.seed = block_seed(cfg.train.seed, plan.region);
    if (cfg.iters_per_voxel > 0)
      tc.iterations = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::ceil(cfg.iters_per_voxel * static_cast<double>(plan.region.voxels()))));
    ProgressFn progress;
    if (cfg.log) {
      const std::string& name = names[static_cast<std::size_t>(k)];
      progress = [&, name](std::size_t it, double loss) {
        if (cfg.log_every && (it % cfg.log_every == 0 || it + 1 == tc.iterations)) {
          std::lock_guard lk(log_mu);
          cfg.log(name, it, loss);
        }
      };
    }
    auto res = fit_block(block, plan.arch, tc, frame_for(meta, plan.region), progress);
    report.block_mse[static_cast<std::size_t>(k)] = res.final_loss;
    nets[static_cast<std::size_t>(k)] = std::move(res.net);
  };
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads > 0 ? threads : omp_get_max_threads())
  for (std::ptrdiff_t k = 0; k < nb; ++k) {
    try {
      fit_one(k);
    } catch (...) {
#pragma omp critical(sci_encode_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  EncodeResult out;
  out.archive.meta = meta;
  for (std::size_t k = 0; k < nblocks; ++k) {
    const auto& w = report.plans[k].arch.widths;
    out.archive.blocks.push_back({names[k], std::vector<std::uint16_t>(w.begin(), w.end()),
                                  pack_parameters(nets[k].parameters(), cfg.param_bits)});
  }
  out.bytes = serialize(out.archive);
  report.archive_bytes = out.bytes.size();
  report.bpv = static_cast<double>(out.bytes.size()) * 8.0 / static_cast<double>(v.voxels());
  out.report = std::move(report);
  return out;
}

std::vector<BlockRegion> archive_regions(const Archive& a) {
  const auto& dims = a.meta.dims;
  std::vector<BlockRegion> regions;
  std::vector<std::uint8_t> cover(voxel_count(dims), 0);
  for (const auto& b : a.blocks) {
    BlockRegion r;
    try {
      r = parse_block_name(b.name, &dims);
      check_region(dims, r);
    } catch (const InvalidArgument& e) {
      throw StructureError("block " + b.name + ": " + e.what());
    }
    if (b.widths.back() != a.meta.channels)
      throw StructureError("block " + b.name + ": output width does not match channel count");
    bool overlap = false;
    for_each_row(dims, 1, r, [&](std::size_t, std::size_t vo, std::size_t len) {
      for (std::size_t i = 0; i < len; ++i) overlap |= cover[vo + i]++ != 0;
    });
    if (overlap) throw StructureError("block " + b.name + " overlaps another block");
    regions.push_back(std::move(r));
  }
  if (std::find(cover.begin(), cover.end(), 0) != cover.end())
    throw StructureError("blocks do not cover the volume");
  return regions;
}

Volume decode(const Archive& a, const DecodeOptions& opts) {
  const auto regions = archive_regions(a);
  const auto& m = a.meta;
  Grid<std::uint16_t> grid(m.dims, m.channels);
  const double top = dtype_max(m.dtype);
  const auto nb = static_cast<std::ptrdiff_t>(a.blocks.size());
  std::exception_ptr failure;
  auto decode_one = [&](std::ptrdiff_t k) {
    const auto& b = a.blocks[static_cast<std::size_t>(k)];
    const auto& r = regions[static_cast<std::size_t>(k)];
    ArchitectureSpec spec{m.dims.size(), std::vector<std::size_t>(b.widths.begin(), b.widths.end()), m.w0, m.fr};
    FunnelNetwork net(spec);
    const auto params = unpack_parameters(b.payload, m.param_bits);
    std::copy(params.begin(), params.end(), net.parameters().begin());
    const auto coords = block_coordinates_f32(r.extent, frame_for(m, r));
    std::vector<float> y(r.voxels() * m.channels);
    forward_f32(net, coords, y);
    Grid<std::uint16_t> block(r.extent, m.channels);
    for (std::size_t i = 0; i < y.size(); ++i) {
      double x = std::nearbyint(denormalize_value(static_cast<double>(y[i]), m.norm));
      if (!(x >= 0.0)) x = 0.0;
      block[i] = static_cast<std::uint16_t>(std::min(x, top));
    }
    insert_block(grid, r, block);
  };
  const int threads = opts.workers > 0 ? opts.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
  for (std::ptrdiff_t k = 0; k < nb; ++k) {
    try {
      decode_one(k);
    } catch (...) {
#pragma omp critical(sci_decode_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);

  Volume out{std::move(grid), m.dtype, m.norm};
  const bool filter = opts.deblock.value_or(m.deblock_tau > 0.0);
  const double tau = m.deblock_tau > 0.0 ? m.deblock_tau : default_deblock_tau(m.dtype);
  if (filter && regions.size() > 1) out = deblock(out, regions, tau);
  if (!m.source_dims.empty() && m.source_dims != m.dims) out = crop_to(out, m.source_dims);
  return out;
}

Volume decode(std::span<const std::uint8_t> bytes, const DecodeOptions& opts) {
  return decode(parse_archive(bytes), opts);
}

}  // namespace sci
