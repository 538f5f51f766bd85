#include "gfe/selection.hpp"

#include <algorithm>
#include <cmath>
#include <exception>

namespace gfe {

HoldoutSplit last_year_holdout(const PanelDataset& data) { return last_periods_holdout(data, 1); }

HoldoutSplit last_periods_holdout(const PanelDataset& data, int k) {
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "holdout needs k >= 1");
  std::vector<Violation> short_units;
  for (std::size_t i = 0; i < data.n_units(); ++i) {
    if (data.observed_periods(i).size() < static_cast<std::size_t>(k) + 1) {
      short_units.push_back({ErrorCode::UnitObservedOnce, data.unit_ids()[i], 0,
                             std::to_string(data.observed_periods(i).size()) + " observed period(s)"});
    }
  }
  if (!short_units.empty()) throw ValidationError(std::move(short_units));

  HoldoutSplit split;
  split.holdout_periods = k;
  std::vector<std::uint8_t> mask(data.mask().begin(), data.mask().end());
  for (std::size_t i = 0; i < data.n_units(); ++i) {
    const auto obs = data.observed_periods(i);
    split.last_period.push_back(obs.back());
    for (std::size_t j = obs.size() - static_cast<std::size_t>(k); j < obs.size(); ++j) {
      const auto t = static_cast<std::size_t>(obs[j]);
      split.test_cells.push_back({i, t});
      mask[i * data.n_periods() + t] = 0;
    }
  }
  split.train = data.with_mask(mask);
  return split;
}

long long parameter_count(int n_groups, std::size_t n_periods, std::size_t n_units, std::size_t n_covariates,
                          std::size_t n_locations) {
  return static_cast<long long>(n_groups) * static_cast<long long>(n_periods) + static_cast<long long>(n_units) +
         static_cast<long long>(n_covariates) + static_cast<long long>(n_locations);
}

double bic_value(double sse, std::size_t nt_obs, long long n_params) {
  const auto nt = static_cast<double>(nt_obs);
  if (static_cast<long long>(nt_obs) <= n_params) {
    throw Error(ErrorCode::DegreesOfFreedomExhausted,
                "NT_obs=" + std::to_string(nt_obs) + " <= p=" + std::to_string(n_params));
  }
  const double sigma2 = sse / (nt - static_cast<double>(n_params));
  return sse / nt + sigma2 * (static_cast<double>(n_params) / nt) * std::log(nt);
}

BicResult bic(const FitResult& fit, const PanelDataset& train) {
  BicResult out;
  out.sse = objective(train, fit.params, fit.gamma);
  out.nt_obs = train.n_observed();
  for (std::size_t t = 0; t < train.n_periods(); ++t) {
    for (int g = 0; g < fit.params.n_groups(); ++g) {
      if (fit.params.defined(g, t)) {
        ++out.effective_periods;
        break;
      }
    }
  }
  out.n_params = parameter_count(fit.gamma.n_groups, out.effective_periods, train.n_units(),
                                 train.n_covariates(), train.n_locations());
  out.bic = bic_value(out.sse, out.nt_obs, out.n_params);
  out.sigma2 = out.sse / (static_cast<double>(out.nt_obs) - static_cast<double>(out.n_params));
  return out;
}

HoldoutScore holdout_rmse(const FitResult& fit, const PanelDataset& data, const HoldoutSplit& split) {
  HoldoutScore score;
  double sum = 0.0;
  for (const auto& cell : split.test_cells) {
    const int g = fit.gamma.group[cell.unit];
    if (!fit.params.defined(g, cell.period)) {
      ++score.excluded_cells;
      continue;
    }
    const double pred = fit.params.common_part(data.covariates(cell.unit, cell.period), data.location(cell.unit)) +
                        fit.params.alpha(g, static_cast<Eigen::Index>(cell.period));
    const double r = data.outcome(cell.unit, cell.period) - pred;
    sum += r * r;
    ++score.scored_cells;
  }
  if (score.scored_cells == 0) {
    throw Error(ErrorCode::NoScorableCells, std::to_string(score.excluded_cells) + " test cell(s) excluded");
  }
  score.rmse = std::sqrt(sum / static_cast<double>(score.scored_cells));
  return score;
}

namespace {

std::vector<SelectionRow> run_grid(const PanelDataset& data, const HoldoutSplit& split, const std::vector<int>& grid,
                                   const DesignSpec& spec, const FitConfig& base, int phase) {
  std::vector<SelectionRow> rows(grid.size());
  std::vector<std::exception_ptr> errors(grid.size());

#pragma omp parallel for schedule(dynamic, 1)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(grid.size()); ++k) {
    const auto idx = static_cast<std::size_t>(k);
    try {
      FitConfig config = base;
      config.n_groups = grid[idx];
      const auto fit = multi_start_fit(split.train, spec, config);
      const auto b = bic(fit, split.train);
      const auto score = holdout_rmse(fit, data, split);
      rows[idx] = {grid[idx], phase, fit.sse, b.bic, score.rmse, config.n_starts, score.excluded_cells};
    } catch (...) {
      errors[idx] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return rows;
}

}  // namespace

SelectionReport select_g(const PanelDataset& data, const HoldoutSplit& split, const std::vector<int>& grid,
                         const DesignSpec& spec, const FitConfig& coarse, const FitConfig& fine,
                         int shortlist_size) {
  if (grid.empty()) throw Error(ErrorCode::InvalidArgument, "G grid is empty");
  if (shortlist_size < 1) throw Error(ErrorCode::InvalidArgument, "shortlist size must be >= 1");
  std::vector<int> sorted_grid = grid;
  std::sort(sorted_grid.begin(), sorted_grid.end());
  sorted_grid.erase(std::unique(sorted_grid.begin(), sorted_grid.end()), sorted_grid.end());

  SelectionReport report;
  report.coarse = run_grid(data, split, sorted_grid, spec, coarse, 1);

  std::vector<SelectionRow> ranked = report.coarse;
  std::stable_sort(ranked.begin(), ranked.end(), [](const SelectionRow& a, const SelectionRow& b) {
    return a.rmse_test < b.rmse_test;
  });
  std::vector<int> shortlist;
  for (std::size_t k = 0; k < ranked.size() && k < static_cast<std::size_t>(shortlist_size); ++k) {
    shortlist.push_back(ranked[k].n_groups);
  }
  std::sort(shortlist.begin(), shortlist.end());

  report.fine = run_grid(data, split, shortlist, spec, fine, 2);
  const SelectionRow* best = &report.fine.front();
  for (const auto& row : report.fine) {
    if (row.rmse_test < best->rmse_test) best = &row;
  }
  report.chosen_g = best->n_groups;
  return report;
}

SelectionReport select_g(const PanelDataset& data, const std::vector<int>& grid, const DesignSpec& spec,
                         const FitConfig& coarse, const FitConfig& fine, int shortlist_size) {
  return select_g(data, last_year_holdout(data), grid, spec, coarse, fine, shortlist_size);
}

}  // namespace gfe
