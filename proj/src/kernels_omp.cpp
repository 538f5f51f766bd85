#include "gfe/kernels.hpp"

#include <algorithm>

#include <omp.h>

#include "kernel_rows.hpp"

namespace gfe::kernels {

namespace {

constexpr std::size_t kMaxBlocks = 64;
// Normal-equation partials are dense n_cols^2, so zeroing and summing 64 of them
// costs more than the accumulation itself at desk scale.
constexpr std::size_t kMaxNormalBlocks = 16;
// Upper bound on doubles held by per-block normal-equation partials.
constexpr std::size_t kPartialBudget = std::size_t{1} << 23;

struct BlockRange {
  std::size_t begin;
  std::size_t end;
};

BlockRange block_range(std::size_t n_units, std::size_t n_blocks, std::size_t b) {
  const std::size_t base = n_units / n_blocks;
  const std::size_t extra = n_units % n_blocks;
  const std::size_t begin = b * base + std::min(b, extra);
  return {begin, begin + base + (b < extra ? 1 : 0)};
}

std::size_t normal_equation_blocks(std::size_t n_units, int n_cols) {
  const auto per_block = static_cast<std::size_t>(n_cols) * static_cast<std::size_t>(n_cols) + 1;
  const std::size_t by_memory = std::max<std::size_t>(1, kPartialBudget / per_block);
  return std::min({block_count(n_units), kMaxNormalBlocks, by_memory});
}

}  // namespace

std::size_t block_count(std::size_t n_units) { return std::max<std::size_t>(1, std::min(n_units, kMaxBlocks)); }

namespace omp {

NormalEquations accumulate_normal_equations(const PanelDataset& data, const DesignLayout& layout,
                                            std::span<const int> group) {
  const std::size_t n_units = data.n_units();
  const std::size_t n_blocks = normal_equation_blocks(n_units, layout.n_cols);
  std::vector<NormalEquations> partial(n_blocks);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(n_blocks); ++b) {
    const auto range = block_range(n_units, n_blocks, static_cast<std::size_t>(b));
    auto ne = detail::zero_normal_equations(layout.n_cols);
    detail::DesignRow row(layout.n_theta);
    for (std::size_t i = range.begin; i < range.end; ++i) detail::accumulate_unit(data, layout, i, group[i], row, ne);
    partial[static_cast<std::size_t>(b)] = std::move(ne);
  }

  NormalEquations total = std::move(partial[0]);
  for (std::size_t b = 1; b < n_blocks; ++b) {
    total.xtx += partial[b].xtx;
    total.xty += partial[b].xty;
    total.yty += partial[b].yty;
    total.n_rows += partial[b].n_rows;
  }
  detail::symmetrize(total.xtx);
  return total;
}

CrossResidual cross_residual(const PanelDataset& data, const DesignLayout& layout, std::span<const int> group,
                             const Eigen::VectorXd& z) {
  const std::size_t n_units = data.n_units();
  const std::size_t n_blocks = normal_equation_blocks(n_units, layout.n_cols);
  std::vector<CrossResidual> partial(n_blocks);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(n_blocks); ++b) {
    const auto range = block_range(n_units, n_blocks, static_cast<std::size_t>(b));
    CrossResidual cr;
    cr.xtr = Eigen::VectorXd::Zero(layout.n_cols);
    detail::DesignRow row(layout.n_theta);
    for (std::size_t i = range.begin; i < range.end; ++i) {
      detail::accumulate_cross_residual(data, layout, i, group[i], z, row, cr);
    }
    partial[static_cast<std::size_t>(b)] = std::move(cr);
  }

  CrossResidual total = std::move(partial[0]);
  for (std::size_t b = 1; b < n_blocks; ++b) {
    total.xtr += partial[b].xtr;
    total.rtr += partial[b].rtr;
  }
  return total;
}

SseResult masked_sse(const PanelDataset& data, const ModelParams& params, std::span<const int> group) {
  const std::size_t n_units = data.n_units();
  const std::size_t n_blocks = block_count(n_units);
  std::vector<SseResult> partial(n_blocks);

#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < static_cast<std::ptrdiff_t>(n_blocks); ++b) {
    const auto range = block_range(n_units, n_blocks, static_cast<std::size_t>(b));
    SseResult r;
    for (std::size_t i = range.begin; i < range.end; ++i) detail::unit_sse(data, params, i, group[i], r);
    partial[static_cast<std::size_t>(b)] = r;
  }

  SseResult total;
  for (const auto& r : partial) {
    total.sse += r.sse;
    total.undefined_cells += r.undefined_cells;
  }
  return total;
}

std::vector<double> assignment_losses(const PanelDataset& data, const ModelParams& params) {
  const auto n_groups = static_cast<std::size_t>(params.n_groups());
  const auto n_units = static_cast<std::ptrdiff_t>(data.n_units());
  std::vector<double> losses(data.n_units() * n_groups);

  // Each unit writes its own row, so no reduction order is involved.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n_units; ++i) {
    const auto u = static_cast<std::size_t>(i);
    detail::unit_losses(data, params, u, std::span<double>(losses.data() + u * n_groups, n_groups));
  }
  return losses;
}

}  // namespace omp
}  // namespace gfe::kernels
