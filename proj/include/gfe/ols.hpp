#pragma once

#include <cstddef>
#include <vector>

#include "gfe/kernels.hpp"
#include "gfe/panel.hpp"

namespace gfe {

struct DesignSpec {
  int n_groups = 1;
  bool include_covariates = true;
  int reference_location = 0;  // mu of this location is pinned to 0
};

struct OlsResult {
  ModelParams params;
  double sse = 0.0;
  int rank = 0;
  int n_columns = 0;
  bool rank_deficient = false;
  std::vector<std::size_t> cell_counts;  // row-major G x T observed members per (g, t)
};

/// Least-squares update of (theta, alpha, mu) for a fixed grouping, on observed
/// cells only. Group-period indicators act as intercepts; cells with no
/// observed member are left undefined and kept out of the design. A
/// rank-deficient design yields the minimum-norm solution and sets
/// rank_deficient. Throws NoObservations when the panel has no observed cell.
OlsResult ols_update(const PanelDataset& data, const GroupAssignment& gamma, const DesignSpec& spec);

/// Pooled regression of y on x, location indicators and one intercept (no
/// group or period effects). alpha is 1 x T with the intercept in every period.
OlsResult pooled_ols(const PanelDataset& data, const DesignSpec& spec);

struct CellResidual {
  std::size_t unit;
  std::size_t period;
  double value;
};

/// y - x'theta - alpha(g_i, t) - mu(p_i) for every observed cell, unit-major.
std::vector<CellResidual> residuals(const PanelDataset& data, const ModelParams& params,
                                    const GroupAssignment& gamma);

/// Column layout of the design for a grouping with the given (g, t) counts:
/// theta, then one column per populated (g, t) cell (a single shared intercept
/// when `pooled`), then mu for every non-reference location with observations.
kernels::DesignLayout make_layout(const PanelDataset& data, const std::vector<std::size_t>& counts,
                                  int n_groups, const DesignSpec& spec, bool pooled = false);

/// Per-(g, t) observed member counts, row-major G x T.
std::vector<std::size_t> cell_counts(const PanelDataset& data, const GroupAssignment& gamma);

}  // namespace gfe
