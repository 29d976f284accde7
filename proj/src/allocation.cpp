#include "sci/allocation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sci/error.hpp"

namespace sci {

AllocMode parse_alloc_mode(std::string_view s) {
  if (s == "spectrum") return AllocMode::Spectrum;
  if (s == "size") return AllocMode::Size;
  if (s == "inverse_d") return AllocMode::InverseD;
  if (s == "equal") return AllocMode::Equal;
  throw InvalidArgument("unknown allocation mode '" + std::string(s) + "'");
}

std::string_view alloc_mode_name(AllocMode m) {
  switch (m) {
    case AllocMode::Spectrum: return "spectrum";
    case AllocMode::Size: return "size";
    case AllocMode::InverseD: return "inverse_d";
    case AllocMode::Equal: return "equal";
  }
  return "?";
}

BitBudget BitBudget::from_ratio(std::size_t voxels, int source_bits, double ratio, int param_bits) {
  if (!(ratio > 1.0)) throw InvalidArgument("compression ratio must be > 1");
  return {voxels, source_bits, source_bits / ratio, 0, param_bits};
}

BitBudget BitBudget::from_bpv(std::size_t voxels, int source_bits, double bpv, int param_bits) {
  if (!(bpv > 0.0)) throw InvalidArgument("target bpv must be > 0");
  return {voxels, source_bits, bpv, 0, param_bits};
}

std::size_t BitBudget::param_budget() const {
  const double free_bits = target_bits() - static_cast<double>(overhead_bits);
  if (!(free_bits > 0.0)) return 0;
  return static_cast<std::size_t>(std::floor(free_bits / param_bits));
}

ArchitectureSpec architecture_for_hidden(std::size_t h, const ArchOptions& o) {
  if (o.layers < 2) throw InvalidArgument("network needs at least 2 layers");
  ArchitectureSpec a;
  a.in_dim = o.in_dim;
  a.w0 = o.w0;
  a.fr = o.fr;
  a.widths.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(o.fr * static_cast<double>(h)))));
  for (std::size_t k = 0; k + 2 < o.layers; ++k)
    a.widths.push_back(o.taper ? std::max<std::size_t>(1, h > k ? h - k : 1) : h);
  a.widths.push_back(o.out_dim);
  return a;
}

std::size_t hidden_width(const ArchitectureSpec& a) {
  return a.widths.size() > 2 ? a.widths[1] : 0;
}

std::size_t min_parameters(const ArchOptions& o, std::size_t min_hidden) {
  return architecture_for_hidden(min_hidden, o).parameter_count();
}

std::size_t solve_hidden(std::size_t param_count, const ArchOptions& o) {
  const std::size_t floor_count = min_parameters(o);
  if (param_count < floor_count)
    throw InvalidArgument("parameter count " + std::to_string(param_count) +
                          " below the minimum network (" + std::to_string(floor_count) + ")");
  std::size_t h = 2;
  while (architecture_for_hidden(h + 1, o).parameter_count() <= param_count) ++h;
  return h;
}

ArchitectureSpec solve_architecture(std::size_t param_count, const ArchOptions& o) {
  return architecture_for_hidden(solve_hidden(param_count, o), o);
}

std::size_t realized_parameters(std::span<const BlockPlan> plans) {
  std::size_t s = 0;
  for (const auto& p : plans) s += p.arch.parameter_count();
  return s;
}

namespace {

double block_weight(const BlockInput& b, AllocMode mode, std::size_t channels) {
  const double size = static_cast<double>(b.region.voxels() * channels);
  if (!(b.score > 0.0)) throw InvalidArgument("block score must be positive");
  switch (mode) {
    case AllocMode::Spectrum: return size / b.score;
    case AllocMode::Size: return size;
    case AllocMode::InverseD: return 1.0 / b.score;
    case AllocMode::Equal: return 1.0;
  }
  return 1.0;
}

bool region_less(const BlockRegion& a, const BlockRegion& b) {
  if (a.origin != b.origin) return a.origin < b.origin;
  return a.extent < b.extent;
}

}  // namespace

std::vector<BlockPlan> allocate(std::span<const BlockInput> blocks, const BitBudget& budget,
                                AllocMode mode, const ArchOptions& opts) {
  if (blocks.empty()) throw InvalidArgument("nothing to allocate");
  const std::size_t n = blocks.size();
  const std::size_t minp = min_parameters(opts);
  const std::size_t total = budget.param_budget();
  if (total < n * minp) {
    const double need_bits = static_cast<double>(budget.overhead_bits) +
                             static_cast<double>(n * minp) * budget.param_bits;
    const double min_ratio = static_cast<double>(budget.voxels) * budget.source_bits / need_bits;
    throw BudgetError("budget of " + std::to_string(total) + " parameters cannot hold " +
                          std::to_string(n) + " blocks of at least " + std::to_string(minp) +
                          "; minimum achievable ratio is " + std::to_string(min_ratio),
                      min_ratio);
  }

  // Canonical order (by region) so the result does not depend on input order.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return region_less(blocks[a].region, blocks[b].region); });
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k) w[k] = block_weight(blocks[order[k]], mode, opts.out_dim);

  std::vector<std::size_t> share(n, 0);
  std::vector<bool> pinned(n, false);
  std::size_t remaining = total;
  for (std::size_t k = 0; k < n; ++k)
    if (blocks[order[k]].flat) {
      pinned[k] = true;
      share[k] = minp;
      remaining -= minp;
    }
  for (;;) {
    double wsum = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (!pinned[k]) wsum += w[k];
    bool changed = false;
    for (std::size_t k = 0; k < n; ++k) {
      if (pinned[k]) continue;
      if (!(wsum > 0.0) || static_cast<double>(remaining) * w[k] / wsum < static_cast<double>(minp)) {
        pinned[k] = true;
        share[k] = minp;
        remaining -= minp;
        changed = true;
      }
    }
    if (!changed) {
      std::vector<std::pair<double, std::size_t>> frac;
      std::size_t used = 0;
      for (std::size_t k = 0; k < n; ++k) {
        if (pinned[k]) continue;
        const double exact = static_cast<double>(remaining) * w[k] / wsum;
        share[k] = static_cast<std::size_t>(std::floor(exact));
        used += share[k];
        frac.push_back({exact - std::floor(exact), k});
      }
      std::stable_sort(frac.begin(), frac.end(), [](auto& a, auto& b) { return a.first > b.first; });
      for (std::size_t r = 0; used < remaining && r < frac.size(); ++r, ++used) ++share[frac[r].second];
      break;
    }
  }

  std::vector<BlockPlan> canon(n);
  std::vector<std::size_t> h(n);
  std::size_t realized = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto& b = blocks[order[k]];
    h[k] = solve_hidden(share[k], opts);
    canon[k] = {b.region, b.score, share[k], architecture_for_hidden(h[k], opts)};
    realized += canon[k].arch.parameter_count();
  }

  // Spend what the width rounding left behind.
  {
    for (;;) {
      std::size_t best = n;
      double best_deficit = 0.0;
      std::size_t best_cost = 0;
      for (std::size_t k = 0; k < n; ++k) {
        if (blocks[order[k]].flat) continue;
        const std::size_t cur = canon[k].arch.parameter_count();
        const std::size_t next = architecture_for_hidden(h[k] + 1, opts).parameter_count();
        const std::size_t cost = next - cur;
        if (realized + cost > total) continue;
        const double deficit = (static_cast<double>(canon[k].param_count) - static_cast<double>(cur)) /
                               static_cast<double>(cost);
        if (best == n || deficit > best_deficit) {
          best = k;
          best_deficit = deficit;
          best_cost = cost;
        }
      }
      if (best == n) break;
      ++h[best];
      canon[best].arch = architecture_for_hidden(h[best], opts);
      realized += best_cost;
    }
  }

  std::vector<BlockPlan> out(n);
  for (std::size_t k = 0; k < n; ++k) out[order[k]] = std::move(canon[k]);
  return out;
}

}  // namespace sci
