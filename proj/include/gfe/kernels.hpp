#pragma once

// Hot loops of the estimator. Every kernel exists twice:
//   serial::  straightforward single-pass loops, kept as the reference
//   omp::     OpenMP version used by the library
//
// The OpenMP kernels split units into a fixed number of contiguous blocks that
// does not depend on the thread count, reduce inside each block sequentially,
// and combine block partials in block order. Results are therefore bitwise
// identical for any OMP_NUM_THREADS, and agree with serial:: to rounding.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "gfe/panel.hpp"

namespace gfe::kernels {

/// Column map for the dummy-encoded regression y ~ x + alpha(g,t) + mu(p).
/// Several (g, t) cells may share one column (a pooled intercept).
struct DesignLayout {
  int n_theta = 0;                // covariate columns occupy [0, n_theta)
  int n_groups = 1;
  std::size_t n_periods = 0;
  std::vector<int> alpha_col;     // g * T + t -> column, -1 when the cell is excluded
  std::vector<int> mu_col;        // location -> column, -1 for the reference / empty locations
  int n_cols = 0;

  int alpha_column(int g, std::size_t t) const {
    return alpha_col[static_cast<std::size_t>(g) * n_periods + t];
  }
};

struct NormalEquations {
  Eigen::MatrixXd xtx;
  Eigen::VectorXd xty;
  double yty = 0.0;
  std::size_t n_rows = 0;
};

struct CrossResidual {
  Eigen::VectorXd xtr;  // X'(y - X z)
  double rtr = 0.0;     // |y - X z|^2
};

struct SseResult {
  double sse = 0.0;
  std::size_t undefined_cells = 0;
};

/// Number of contiguous unit blocks used by the parallel reductions.
std::size_t block_count(std::size_t n_units);

namespace serial {

NormalEquations accumulate_normal_equations(const PanelDataset& data, const DesignLayout& layout,
                                            std::span<const int> group);
CrossResidual cross_residual(const PanelDataset& data, const DesignLayout& layout,
                             std::span<const int> group, const Eigen::VectorXd& z);
SseResult masked_sse(const PanelDataset& data, const ModelParams& params, std::span<const int> group);
/// Row-major N x G matrix of loss_i(g); +inf where alpha(g, t) is undefined on
/// an observed period of unit i.
std::vector<double> assignment_losses(const PanelDataset& data, const ModelParams& params);

}  // namespace serial

namespace omp {

NormalEquations accumulate_normal_equations(const PanelDataset& data, const DesignLayout& layout,
                                            std::span<const int> group);
CrossResidual cross_residual(const PanelDataset& data, const DesignLayout& layout,
                             std::span<const int> group, const Eigen::VectorXd& z);
SseResult masked_sse(const PanelDataset& data, const ModelParams& params, std::span<const int> group);
std::vector<double> assignment_losses(const PanelDataset& data, const ModelParams& params);

}  // namespace omp

}  // namespace gfe::kernels
