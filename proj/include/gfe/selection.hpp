#pragma once

#include <cstddef>
#include <vector>

#include "gfe/search.hpp"

namespace gfe {

struct TestCell {
  std::size_t unit;
  std::size_t period;
};

/// Last-observed-period holdout. `train` is the input panel under
/// d_train(i,t) = d(i,t) * 1{t not among unit i's last `holdout_periods` observed periods}.
struct HoldoutSplit {
  PanelDataset train;
  std::vector<TestCell> test_cells;  // unit-major, ascending period
  std::vector<int> last_period;      // per unit, period index of its last observation
  int holdout_periods = 1;
};

/// Holds out each unit's last observed period. Throws UnitObservedOnce naming
/// every unit with a single observation.
HoldoutSplit last_year_holdout(const PanelDataset& data);

/// Holds out each unit's last k observed periods (k = 2 for the medium-run
/// design). Every unit needs at least k + 1 observations.
HoldoutSplit last_periods_holdout(const PanelDataset& data, int k);

/// GT + N + K + L.
long long parameter_count(int n_groups, std::size_t n_periods, std::size_t n_units, std::size_t n_covariates,
                          std::size_t n_locations);

/// SSE / NT + sigma2 * (p / NT) * ln(NT), sigma2 = SSE / (NT - p).
/// Throws DegreesOfFreedomExhausted when NT <= p.
double bic_value(double sse, std::size_t nt_obs, long long n_params);

struct BicResult {
  double sse = 0.0;
  std::size_t nt_obs = 0;
  std::size_t effective_periods = 0;  // periods with at least one defined alpha
  long long n_params = 0;
  double sigma2 = 0.0;
  double bic = 0.0;
};

/// BIC of a fit on the panel it was estimated on (the training panel under holdout).
BicResult bic(const FitResult& fit, const PanelDataset& train);

struct HoldoutScore {
  double rmse = 0.0;
  std::size_t scored_cells = 0;
  std::size_t excluded_cells = 0;  // test cells whose alpha(g_i, t) is undefined
};

/// RMSE of x'theta + alpha(g_i, t) + mu(p_i) over the split's test cells.
/// `data` is the full panel the split was made from.
HoldoutScore holdout_rmse(const FitResult& fit, const PanelDataset& data, const HoldoutSplit& split);

struct SelectionRow {
  int n_groups = 1;
  int phase = 1;
  double sse_train = 0.0;
  double bic = 0.0;
  double rmse_test = 0.0;
  int n_starts = 0;
  std::size_t excluded_cells = 0;
};

struct SelectionReport {
  std::vector<SelectionRow> coarse;
  std::vector<SelectionRow> fine;
  int chosen_g = 1;
};

/// Phase 1 fits every G in the grid with `coarse`; phase 2 refits the
/// `shortlist_size` lowest-RMSE values of G with `fine`. The chosen G minimizes
/// phase-2 test RMSE, ties to the smaller G. config.n_groups is ignored.
SelectionReport select_g(const PanelDataset& data, const HoldoutSplit& split, const std::vector<int>& grid,
                         const DesignSpec& spec, const FitConfig& coarse, const FitConfig& fine,
                         int shortlist_size);

SelectionReport select_g(const PanelDataset& data, const std::vector<int>& grid, const DesignSpec& spec,
                         const FitConfig& coarse, const FitConfig& fine, int shortlist_size);

}  // namespace gfe
