#include "gfe/kernels.hpp"

#include "kernel_rows.hpp"

namespace gfe::kernels::serial {

NormalEquations accumulate_normal_equations(const PanelDataset& data, const DesignLayout& layout,
                                            std::span<const int> group) {
  auto ne = detail::zero_normal_equations(layout.n_cols);
  detail::DesignRow row(layout.n_theta);
  for (std::size_t i = 0; i < data.n_units(); ++i) {
    detail::accumulate_unit(data, layout, i, group[i], row, ne);
  }
  detail::symmetrize(ne.xtx);
  return ne;
}

CrossResidual cross_residual(const PanelDataset& data, const DesignLayout& layout, std::span<const int> group,
                             const Eigen::VectorXd& z) {
  CrossResidual cr;
  cr.xtr = Eigen::VectorXd::Zero(layout.n_cols);
  detail::DesignRow row(layout.n_theta);
  for (std::size_t i = 0; i < data.n_units(); ++i) {
    detail::accumulate_cross_residual(data, layout, i, group[i], z, row, cr);
  }
  return cr;
}

SseResult masked_sse(const PanelDataset& data, const ModelParams& params, std::span<const int> group) {
  SseResult out;
  for (std::size_t i = 0; i < data.n_units(); ++i) detail::unit_sse(data, params, i, group[i], out);
  return out;
}

std::vector<double> assignment_losses(const PanelDataset& data, const ModelParams& params) {
  const auto n_groups = static_cast<std::size_t>(params.n_groups());
  std::vector<double> losses(data.n_units() * n_groups);
  for (std::size_t i = 0; i < data.n_units(); ++i) {
    detail::unit_losses(data, params, i, std::span<double>(losses.data() + i * n_groups, n_groups));
  }
  return losses;
}

}  // namespace gfe::kernels::serial
