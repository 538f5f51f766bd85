#pragma once

// From fitted models to welfare paths, poverty status, weighted rates,
// transition tables and their validation.

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gfe/search.hpp"
#include "gfe/selection.hpp"

namespace gfe {

// ---------------------------------------------------------------------------
// Prediction and completed paths

/// x'theta + alpha(g_i, t) + mu(p_i) with the unit's own covariates.
/// Throws MissingCovariates when (i, t) is unobserved, UndefinedAlpha when
/// alpha(g_i, t) is undefined.
double predict(const FitResult& fit, const PanelDataset& data, std::size_t unit, std::size_t period);

/// Same with caller-supplied covariates.
double predict_with(const FitResult& fit, std::span<const double> x, int location, int group, std::size_t period);

enum class CompletionRule {
  None,           // never filled; needing a value is an UntaggedColumn error
  TimeInvariant,  // carry nearest earlier observation forward, else the next one backward
  Age,            // nearest observation plus the signed calendar gap
  HoldFirst,      // value at the unit's first observed period
  Interpolate,    // linear in calendar time between bracketing observations
};

enum class FillFlag : std::uint8_t {
  Observed,
  CarriedForward,
  CarriedBackward,
  AgeForward,
  AgeBackward,  // backward age update; an extension of the forward rule
  HeldFirst,
  Interpolated,
  Missing,
};

std::string_view to_string(CompletionRule rule);
std::string_view to_string(FillFlag flag);

/// Covariates for every unit over the full period range, with the rule used for each value.
struct CovariateTable {
  std::size_t n_units = 0;
  std::size_t n_periods = 0;
  std::size_t n_covariates = 0;
  std::vector<double> values;   // (i * T + t) * K + k
  std::vector<FillFlag> flags;  // same layout
  bool backward_age_used = false;

  std::span<const double> at(std::size_t i, std::size_t t) const {
    return {values.data() + (i * n_periods + t) * n_covariates, n_covariates};
  }
  FillFlag flag(std::size_t i, std::size_t t, std::size_t k) const {
    return flags[(i * n_periods + t) * n_covariates + k];
  }
  bool complete(std::size_t i, std::size_t t) const;
};

/// Fills unobserved cells column by column. `window` lists the period indices
/// that must be filled (all periods when empty); a column tagged None that
/// would need a value there raises UntaggedColumn.
CovariateTable complete_covariates(const PanelDataset& data, std::span<const CompletionRule> rules,
                                   std::span<const std::size_t> window = {});

enum class CellSource : std::uint8_t { Observed, Imputed, Absent };

std::string_view to_string(CellSource source);

struct CompletedPanel {
  std::vector<std::size_t> window;  // period indices
  std::size_t n_units = 0;
  std::vector<double> y;            // i * window.size() + w
  std::vector<CellSource> source;
  std::string completion_policy;
  std::size_t absent_cells = 0;     // unobserved cells without a defined alpha or covariates

  double value(std::size_t i, std::size_t w) const { return y[i * window.size() + w]; }
  CellSource cell_source(std::size_t i, std::size_t w) const { return source[i * window.size() + w]; }
};

/// Observed outcome where d = 1, model prediction with completed covariates
/// elsewhere. Cells that cannot be predicted are marked Absent.
CompletedPanel complete_paths(const FitResult& fit, const PanelDataset& data, const CovariateTable& covariates,
                              std::span<const std::size_t> window, std::string completion_policy = "");

// ---------------------------------------------------------------------------
// Poverty status and rates

enum class PovertyStatus : std::uint8_t { NonPoor = 0, Poor = 1 };

/// Poor iff y < z (strict).
PovertyStatus poverty_status(double y, double z);

/// Per-period line for cells without their own: the mean of z over observed
/// cells of that period (the line itself when it is constant within the period).
std::vector<double> period_poverty_lines(const PanelDataset& data);

struct StatusRecord {
  int key = 0;
  std::int64_t period = 0;
  PovertyStatus status = PovertyStatus::NonPoor;
  double weight = 0.0;
};

struct RateRow {
  int key = 0;
  std::int64_t period = 0;
  double rate = 0.0;
  double weight_total = 0.0;
  std::size_t count = 0;
};

/// Sum(w * poor) / Sum(w) per (key, period). Throws ZeroWeightCell when a
/// (key, period) has zero total weight.
std::vector<RateRow> weighted_rate(std::span<const StatusRecord> records);

// ---------------------------------------------------------------------------
// Transitions

enum TransitionState : int { PoorPoor = 0, PoorNonPoor = 1, NonPoorPoor = 2, NonPoorNonPoor = 3 };

inline constexpr std::array<const char*, 4> kTransitionStateNames = {"poor_poor", "poor_nonpoor", "nonpoor_poor",
                                                                     "nonpoor_nonpoor"};

TransitionState transition_state(PovertyStatus before, PovertyStatus after);

struct TransitionPair {
  std::int64_t end_period = 0;
  PovertyStatus before = PovertyStatus::NonPoor;
  PovertyStatus after = PovertyStatus::NonPoor;
  double weight = 0.0;  // end-period weight
};

struct TransitionRow {
  std::int64_t end_period = 0;
  std::array<double, 4> share{};
  std::array<std::size_t, 4> count{};
  double weight_total = 0.0;
};

struct TransitionTable {
  std::vector<TransitionRow> rows;  // ascending end_period

  const TransitionRow* find(std::int64_t end_period) const;
};

/// Weighted shares of the four states per end period; periods with zero total
/// weight are omitted.
TransitionTable transition_table(std::span<const TransitionPair> pairs);

/// Pairs of consecutive observed calendar periods (gap of exactly one) using observed outcomes.
std::vector<TransitionPair> observed_transition_pairs(const PanelDataset& data);

/// Pairs of adjacent window periods of a completed panel where both cells are
/// present. The weight is the end cell's weight when observed, otherwise the
/// unit's nearest observed weight.
std::vector<TransitionPair> completed_transition_pairs(const CompletedPanel& completed, const PanelDataset& data);

struct OneStepValidation {
  TransitionTable actual;
  TransitionTable predicted;
  double accuracy = 0.0;           // weighted share with predicted status == actual status at t
  double misclassification = 0.0;  // 1 - accuracy
  std::size_t n_pairs = 0;
  std::size_t excluded_nonconsecutive = 0;
  std::size_t excluded_undefined = 0;  // alpha(g_i, t) undefined at the held-out period
};

/// For each unit whose held-out last period t directly follows (calendar t-1)
/// its previous observed period: actual (P_{t-1}, P_t) against
/// (P_{t-1}, 1{yhat_t < z_t}). `fit_on_train` must come from split.train.
OneStepValidation one_step_validation(const FitResult& fit_on_train, const PanelDataset& data,
                                      const HoldoutSplit& split);

struct HoldoutClassificationRow {
  std::int64_t period = 0;
  std::size_t units = 0;
  double actual_rate = 0.0;
  double predicted_rate = 0.0;
  double accuracy = 0.0;
};

/// Weighted poverty classification by held-out period over every scorable test
/// cell (used for the multi-period holdout).
std::vector<HoldoutClassificationRow> holdout_classification(const FitResult& fit_on_train,
                                                             const PanelDataset& data, const HoldoutSplit& split);

struct TransitionFitRow {
  std::int64_t end_period = 0;
  double mae = 0.0;
  double rmse = 0.0;
  double tv = 0.0;
};

struct TransitionFitMetrics {
  std::vector<TransitionFitRow> rows;
  double mae_avg = 0.0;
  double rmse_avg = 0.0;
  double tv_avg = 0.0;
  double tv_max = 0.0;
};

/// MAE, RMSE over the four states and TV = 0.5 * sum |diff| per shared end
/// period, averaged (and TV maximized) over periods. Throws NoOverlap.
TransitionFitMetrics transition_fit(const TransitionTable& predicted, const TransitionTable& actual);

// ---------------------------------------------------------------------------
// Group profiles and durations

struct GroupProfile {
  int group = 0;  // 0-based label in the fit
  int rank = 0;   // 0 = highest mean alpha
  std::size_t size = 0;
  double population_share = 0.0;
  double mean_alpha = 0.0;
  double baseline_outcome = 0.0;
  std::vector<double> baseline_covariates;
};

/// Non-empty groups ordered by descending mean defined alpha. Baseline values
/// are taken at each unit's first observed period and weighted by that
/// period's weight; population share is the group's share of those weights.
std::vector<GroupProfile> group_profiles(const FitResult& fit, const PanelDataset& data,
                                         std::span<const std::size_t> baseline_covariates);

/// N x W poverty statuses; -1 marks an absent cell.
struct StatusMatrix {
  std::size_t n_units = 0;
  std::size_t n_periods = 0;
  std::vector<std::int8_t> cells;

  std::int8_t at(std::size_t i, std::size_t w) const { return cells[i * n_periods + w]; }
};

/// Statuses of a completed panel: each cell's own line when observed, the period line otherwise.
StatusMatrix completed_statuses(const CompletedPanel& completed, const PanelDataset& data);

struct UnitDuration {
  std::size_t periods = 0;       // present cells
  std::size_t poor_periods = 0;
  double poor_share = 0.0;
  bool chronic = false;          // poor_periods >= k
  std::vector<int> spells;       // lengths of maximal poor runs; absent cells break runs
};

struct DurationSummary {
  std::vector<UnitDuration> units;
  std::map<int, std::size_t> spell_length_counts;
  double chronic_share = 0.0;    // unweighted share of units flagged chronic
};

DurationSummary duration_summaries(const StatusMatrix& statuses, int chronic_k);

}  // namespace gfe
