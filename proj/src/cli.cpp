#include "sci/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <fstream>
#include <iostream>
#include <iterator>
#include <mutex>
#include <optional>
#include <sstream>

#include "sci/codec.hpp"
#include "sci/error.hpp"
#include "sci/metrics.hpp"
#include "sci/spectrum.hpp"
#include "sci/theory.hpp"

namespace sci {

namespace {

struct UsageError : Error {
  using Error::Error;
};

struct InputOpts {
  std::string path, dims, dtype = "u8";
  std::size_t channels = 1;

  void add(CLI::App* c, const char* flag = "--input") {
    c->add_option(flag, path, "raw volume file")->required();
    c->add_option("--dims", dims, "volume shape, e.g. 64x64x64")->required();
    c->add_option("--dtype", dtype, "u8 | u16")->check(CLI::IsMember({"u8", "u16"}));
    c->add_option("--channels", channels, "interleaved channels per voxel")->check(CLI::Range(1, 255));
  }
  Volume load() const { return load_raw(path, parse_dims(dims), parse_dtype(dtype), channels); }
};

std::string fmt(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s.precision(10);
  s << x;
  return s.str();
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream o(path, std::ios::binary | std::ios::trunc);
  if (!o) throw IoError("cannot create " + path);
  o.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!o) throw IoError("write failed: " + path);
}

// Shape that every axis divisible by 2^(levels-1) has, rounded up or down.
Dims resized_dims(const Dims& d, int levels, bool up) {
  const std::size_t q = std::size_t{1} << (levels - 1);
  Dims r = d;
  for (auto& x : r) {
    x = up ? (x + q - 1) / q * q : x / q * q;
    if (x == 0) throw UsageError("--resize crop: an axis is shorter than " + std::to_string(q));
  }
  return r;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"sci: adaptive-partition neural volume compressor", "sci"};
  app.require_subcommand(1);

  // compress ---------------------------------------------------------------
  auto* comp = app.add_subcommand("compress", "fit and serialize a volume");
  InputOpts cin;
  cin.add(comp);
  EncodeConfig cfg;
  std::optional<double> ratio, bpv;
  std::string alloc = "spectrum", partition = "adaptive", norm = "dtype", coords = "block", resize = "none";
  std::string output, directory, log_path;
  std::uint64_t seed = 0;
  auto* o_ratio = comp->add_option("--ratio", ratio, "target compression ratio (source bits / coded bits)");
  auto* o_bpv = comp->add_option("--bpv", bpv, "target bits per voxel");
  o_ratio->excludes(o_bpv);
  comp->add_option("--fr", cfg.fr, "first-layer width ratio")->check(CLI::PositiveNumber);
  comp->add_option("--layers", cfg.layers, "affine layers per network")->check(CLI::Range(2, 255));
  comp->add_option("--w0", cfg.w0, "sine frequency scale")->check(CLI::PositiveNumber);
  comp->add_flag("--taper", cfg.taper, "shrink body widths by one per layer");
  comp->add_option("--M", cfg.M, "spectral peaks counted by the concentration score")->check(CLI::PositiveNumber);
  comp->add_option("--a-max", cfg.a_max, "maximum block count")->check(CLI::PositiveNumber);
  comp->add_option("--levels", cfg.levels, "partition tree depth (0: automatic)")->check(CLI::Range(0, 16));
  comp->add_option("--alloc", alloc, "spectrum | size | inverse_d | equal")
      ->check(CLI::IsMember({"spectrum", "size", "inverse_d", "equal"}));
  comp->add_option("--partition", partition, "adaptive | equidistant | none")
      ->check(CLI::IsMember({"adaptive", "equidistant", "none"}));
  comp->add_option("--ep-level", cfg.ep_level, "tree level used by --partition equidistant")->check(CLI::Range(1, 16));
  comp->add_option("--seed", seed, "global seed");
  comp->add_option("--workers", cfg.workers, "training threads (0: all)")->check(CLI::NonNegativeNumber);
  comp->add_option("--iters", cfg.train.iterations, "training iterations per block")->check(CLI::PositiveNumber);
  comp->add_option("--iters-per-voxel", cfg.iters_per_voxel, "scale iterations with block size instead")
      ->check(CLI::PositiveNumber);
  comp->add_option("--batch", cfg.train.batch_size, "mini-batch size")->check(CLI::PositiveNumber);
  comp->add_option("--lr", cfg.train.lr, "Adamax learning rate")->check(CLI::PositiveNumber);
  comp->add_option("--starts", cfg.train.starts, "candidate initializations probed per block")->check(CLI::Range(1, 64));
  comp->add_flag("--deblock,!--no-deblock", cfg.deblock, "filter block boundaries on decode (default on)");
  comp->add_option("--deblock-tau", cfg.deblock_tau, "deblocking threshold in raw units (default 2% of range)");
  comp->add_option("--param-bits", cfg.param_bits, "16 | 32")->check(CLI::IsMember({16, 32}));
  comp->add_option("--norm", norm, "dtype | data")->check(CLI::IsMember({"dtype", "data"}));
  comp->add_option("--coords", coords, "block | global")->check(CLI::IsMember({"block", "global"}));
  comp->add_option("--concentration-power", cfg.concentration_power, "1: magnitude, 2: power spectrum")
      ->check(CLI::IsMember({1, 2}));
  comp->add_option("--resize", resize, "none | pad | crop, to make axes divisible by the tree")
      ->check(CLI::IsMember({"none", "pad", "crop"}));
  comp->add_option("--log", log_path, "write block,iteration,loss CSV");
  comp->add_option("--log-every", cfg.log_every, "iterations between log rows")->check(CLI::PositiveNumber);
  comp->add_option("--directory", directory, "also write the per-block directory layout");
  comp->add_option("-o,--output", output, "archive path")->required();

  // decompress -------------------------------------------------------------
  auto* dec = app.add_subcommand("decompress", "reconstruct a volume from an archive");
  std::string d_archive, d_directory, d_output;
  int d_workers = 0;
  std::optional<bool> d_deblock;
  auto* d_in = dec->add_option("archive", d_archive, "archive file");
  auto* d_dir = dec->add_option("--directory", d_directory, "read the per-block directory layout instead");
  d_in->excludes(d_dir);
  dec->add_option("-o,--output", d_output, "raw output path")->required();
  dec->add_option("--workers", d_workers, "decode threads (0: all)")->check(CLI::NonNegativeNumber);
  dec->add_flag("--deblock,!--no-deblock", d_deblock, "override the archive's deblocking setting");

  // analyze ----------------------------------------------------------------
  auto* ana = app.add_subcommand("analyze", "print concentration scores and the chosen partition");
  InputOpts ain;
  ain.add(ana);
  std::size_t a_M = 1, a_amax = 50;
  int a_levels = 0, a_power = 1;
  bool emit_partition = false;
  std::optional<double> a_ratio;
  std::string a_alloc = "spectrum";
  ana->add_option("--M", a_M)->check(CLI::PositiveNumber);
  ana->add_option("--a-max", a_amax)->check(CLI::PositiveNumber);
  ana->add_option("--levels", a_levels)->check(CLI::Range(0, 16));
  ana->add_option("--concentration-power", a_power)->check(CLI::IsMember({1, 2}));
  ana->add_flag("--emit-partition", emit_partition, "print the selected blocks");
  ana->add_option("--emit-plan", a_ratio, "print the parameter plan for this compression ratio")
      ->check(CLI::PositiveNumber);
  ana->add_option("--alloc", a_alloc)->check(CLI::IsMember({"spectrum", "size", "inverse_d", "equal"}));

  // eval -------------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "compare a reconstruction against its source");
  InputOpts eorig;
  eorig.add(ev, "--orig");
  std::string e_recon, e_archive;
  ev->add_option("--recon", e_recon, "reconstructed raw volume")->required();
  ev->add_option("--archive", e_archive, "archive, for the bit rate");

  // theory -----------------------------------------------------------------
  auto* th = app.add_subcommand("theory", "predicted vs measured harmonics of sin(beta sin(theta))");
  double beta = 1.0;
  int max_order = 8;
  std::size_t grid = 256;
  th->add_option("--beta", beta)->check(CLI::Range(-kBesselWindow, kBesselWindow));
  th->add_option("--max-order", max_order)->check(CLI::Range(1, 60));
  th->add_option("--grid", grid, "samples per period")->check(CLI::Range(16, 1 << 20));

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n" << app.help();
    return 2;
  }

  try {
    if (comp->parsed()) {
      if (ratio.has_value() == bpv.has_value()) throw UsageError("exactly one of --ratio or --bpv is required");
      cfg.ratio = ratio;
      cfg.bpv = bpv;
      cfg.alloc = parse_alloc_mode(alloc);
      cfg.partition = parse_partition_mode(partition);
      cfg.norm = norm == "data" ? NormMode::Data : NormMode::Dtype;
      cfg.global_coords = coords == "global";
      cfg.train.seed = seed;
      Volume v = cin.load();
      if (resize != "none") {
        const int levels = cfg.levels > 0 ? cfg.levels : 3;
        const Dims target = resized_dims(v.dims(), levels, resize == "pad");
        if (target != v.dims()) {
          if (resize == "pad") {
            cfg.source_dims = v.dims();
            v = pad_to(v, target);
          } else {
            v = crop_to(v, target);
          }
        }
        if (cfg.levels == 0) cfg.levels = std::min(levels, default_levels(v.dims(), 4, levels));
      }
      std::ofstream log;
      if (!log_path.empty()) {
        log.open(log_path, std::ios::trunc);
        if (!log) throw IoError("cannot create " + log_path);
        log << "block,iteration,loss\n";
        cfg.log = [&log](const std::string& b, std::size_t it, double loss) {
          log << b << ',' << it << ',' << fmt(loss) << '\n';
        };
      }
      const auto res = encode(v, cfg);
      write_file(output, res.bytes);
      if (!directory.empty()) write_directory(res.archive, directory);
      const auto& r = res.report;
      out << "bytes=" << r.archive_bytes << "\n"
          << "bpv=" << fmt(r.bpv) << "\n"
          << "target_bpv=" << fmt(r.target_bpv) << "\n"
          << "ratio=" << fmt(bit_depth(v.dtype) * static_cast<double>(v.channels()) / r.bpv) << "\n"
          << "levels=" << r.levels << "\n"
          << "a_max=" << r.a_max_effective << "\n"
          << "blocks=" << r.plans.size() << "\n"
          << "objective=" << fmt(r.solution.objective) << "\n"
          << "parameters=" << realized_parameters(r.plans) << "\n";
      return 0;
    }
    if (dec->parsed()) {
      if (d_archive.empty() == d_directory.empty()) throw UsageError("give an archive file or --directory");
      DecodeOptions opts{d_workers, d_deblock};
      const Volume v = d_directory.empty() ? decode(read_file(d_archive), opts) : decode(read_directory(d_directory), opts);
      save_raw(d_output, v);
      out << "dims=" << format_dims(v.dims()) << "\n"
          << "dtype=" << dtype_name(v.dtype) << "\n"
          << "channels=" << v.channels() << "\n";
      return 0;
    }
    if (ana->parsed()) {
      const Volume v = ain.load();
      const int levels = a_levels > 0 ? a_levels : default_levels(v.dims());
      const auto tree = build_tree(normalize(v, IntensityNorm::for_dtype(v.dtype)), levels, a_M, a_power);
      out << "level,origin,extent,D\n";
      for (int l = 1; l <= tree.levels(); ++l)
        for (const auto& nd : tree.level_nodes(l))
          out << l << ',' << format_dims(nd.region.origin) << ',' << format_dims(nd.region.extent) << ','
              << fmt(nd.score) << "\n";
      if (emit_partition || a_ratio) {
        const auto sol = solve_partition(tree, a_amax);
        out << "\nblock,level,D\n";
        for (auto ref : sol.selected)
          out << render_block_name(tree.node(ref).region) << ',' << ref.level << ',' << fmt(tree.node(ref).score)
              << "\n";
        out << "objective=" << fmt(sol.objective) << "\n";
        if (a_ratio) {
          ArchiveMetadata meta;
          meta.dims = v.dims();
          meta.dtype = v.dtype;
          meta.channels = v.channels();
          meta.deblock_tau = default_deblock_tau(v.dtype);
          std::vector<BlockInput> in;
          std::vector<std::string> names;
          for (auto ref : sol.selected) {
            const auto& r = tree.node(ref).region;
            in.push_back({r, tree.node(ref).score, is_flat(extract_block(v.grid, r))});
            names.push_back(render_block_name(tree.node(ref).region));
          }
          auto budget = BitBudget::from_ratio(v.voxels(), bit_depth(v.dtype) * static_cast<int>(v.channels()),
                                              *a_ratio, meta.param_bits);
          budget.overhead_bits = 8 * container_overhead(meta, names, meta.layers);
          const auto plans = allocate(in, budget, parse_alloc_mode(a_alloc), ArchOptions{v.dims().size(), v.channels()});
          out << "\nblock,D,params,widths\n";
          for (const auto& p : plans) {
            out << render_block_name(p.region) << ',' << fmt(p.score) << ',' << p.arch.parameter_count() << ',';
            for (std::size_t i = 0; i < p.arch.widths.size(); ++i) out << (i ? "-" : "") << p.arch.widths[i];
            out << "\n";
          }
        }
      }
      return 0;
    }
    if (ev->parsed()) {
      const Volume a = eorig.load();
      const Volume b = load_raw(e_recon, a.dims(), a.dtype, a.channels());
      const double rate = e_archive.empty() ? NAN : sci::bpv(read_file(e_archive).size(), a.voxels());
      out << "bpv,psnr,ssim,acc@200,acc@500\n"
          << fmt(rate) << ',' << fmt(psnr(a, b)) << ',' << fmt(ssim(a, b)) << ',' << fmt(accuracy(a, b, 200)) << ','
          << fmt(accuracy(a, b, 500)) << "\n";
      return 0;
    }
    if (th->parsed()) {
      const double w = beta, om = 1.0;
      const auto pred = predict_spectrum(std::span(&w, 1), std::span(&om, 1), max_order);
      const auto meas = measured_harmonics(beta, grid, 1, max_order);
      out << "m,predicted,measured,abs_error\n";
      for (int m = 1; m <= max_order; ++m) {
        double p = 0;
        for (const auto& l : pred.lines)
          if (std::abs(l.frequency - m) < 1e-9) p = l.amplitude;
        const double q = meas[static_cast<std::size_t>(m)];
        out << m << ',' << fmt(p) << ',' << fmt(q) << ',' << fmt(std::abs(p - q)) << "\n";
      }
      out << "truncation_bound=" << fmt(pred.truncation_bound) << "\n";
      return 0;
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace sci
