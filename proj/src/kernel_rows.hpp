#pragma once

// Per-unit building blocks shared by the serial and OpenMP kernels.

#include <array>
#include <cmath>
#include <limits>

#include "gfe/kernels.hpp"

namespace gfe::kernels::detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Sparse design row of one observed cell: covariate columns, then the alpha
/// column, then (optionally) the mu column. Column indices are ascending.
struct DesignRow {
  std::vector<int> col;
  std::vector<double> val;
  int nnz = 0;

  explicit DesignRow(int n_theta) : col(n_theta + 2), val(n_theta + 2) {}

  void fill(const PanelDataset& data, const DesignLayout& layout, std::size_t i, std::size_t t, int g) {
    nnz = 0;
    if (layout.n_theta > 0) {
      const auto x = data.covariates(i, t);
      for (int k = 0; k < layout.n_theta; ++k) {
        col[nnz] = k;
        val[nnz] = x[static_cast<std::size_t>(k)];
        ++nnz;
      }
    }
    const int a = layout.alpha_column(g, t);
    if (a >= 0) {
      col[nnz] = a;
      val[nnz] = 1.0;
      ++nnz;
    }
    const int m = layout.mu_col[static_cast<std::size_t>(data.location(i))];
    if (m >= 0) {
      col[nnz] = m;
      val[nnz] = 1.0;
      ++nnz;
    }
  }

  double dot(const Eigen::VectorXd& z) const {
    double s = 0.0;
    for (int a = 0; a < nnz; ++a) s += val[a] * z[col[a]];
    return s;
  }
};

/// Adds unit i's rows to the lower triangle of xtx and to xty / yty.
inline void accumulate_unit(const PanelDataset& data, const DesignLayout& layout, std::size_t i, int g,
                            DesignRow& row, NormalEquations& ne) {
  for (int t : data.observed_periods(i)) {
    const auto tt = static_cast<std::size_t>(t);
    row.fill(data, layout, i, tt, g);
    const double y = data.outcome(i, tt);
    for (int a = 0; a < row.nnz; ++a) {
      const int ca = row.col[a];
      const double va = row.val[a];
      ne.xty[ca] += va * y;
      for (int b = 0; b <= a; ++b) ne.xtx(ca, row.col[b]) += va * row.val[b];
    }
    ne.yty += y * y;
    ++ne.n_rows;
  }
}

inline void accumulate_cross_residual(const PanelDataset& data, const DesignLayout& layout, std::size_t i,
                                      int g, const Eigen::VectorXd& z, DesignRow& row, CrossResidual& cr) {
  for (int t : data.observed_periods(i)) {
    const auto tt = static_cast<std::size_t>(t);
    row.fill(data, layout, i, tt, g);
    const double r = data.outcome(i, tt) - row.dot(z);
    for (int a = 0; a < row.nnz; ++a) cr.xtr[row.col[a]] += row.val[a] * r;
    cr.rtr += r * r;
  }
}

inline void unit_sse(const PanelDataset& data, const ModelParams& params, std::size_t i, int g,
                     SseResult& out) {
  const bool g_ok = g >= 0 && g < params.n_groups();
  for (int t : data.observed_periods(i)) {
    const auto tt = static_cast<std::size_t>(t);
    if (!g_ok || !params.defined(g, tt)) {
      ++out.undefined_cells;
      continue;
    }
    const double r = data.outcome(i, tt) - params.common_part(data.covariates(i, tt), data.location(i)) -
                     params.alpha(g, t);
    out.sse += r * r;
  }
}

/// loss_i(g) for every g into out[0..G).
inline void unit_losses(const PanelDataset& data, const ModelParams& params, std::size_t i,
                        std::span<double> out) {
  const int n_groups = params.n_groups();
  for (int g = 0; g < n_groups; ++g) out[static_cast<std::size_t>(g)] = 0.0;
  for (int t : data.observed_periods(i)) {
    const auto tt = static_cast<std::size_t>(t);
    const double base = data.outcome(i, tt) - params.common_part(data.covariates(i, tt), data.location(i));
    for (int g = 0; g < n_groups; ++g) {
      double& slot = out[static_cast<std::size_t>(g)];
      if (!params.defined(g, tt)) {
        slot = kInf;
      } else if (slot != kInf) {
        const double r = base - params.alpha(g, t);
        slot += r * r;
      }
    }
  }
}

inline NormalEquations zero_normal_equations(int n_cols) {
  NormalEquations ne;
  ne.xtx = Eigen::MatrixXd::Zero(n_cols, n_cols);
  ne.xty = Eigen::VectorXd::Zero(n_cols);
  return ne;
}

inline void symmetrize(Eigen::MatrixXd& m) {
  m.triangularView<Eigen::StrictlyUpper>() = m.transpose();
}

}  // namespace gfe::kernels::detail
