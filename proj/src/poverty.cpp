#include "gfe/poverty.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <numeric>

namespace gfe {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool poor(double y, double z) { return poverty_status(y, z) == PovertyStatus::Poor; }

}  // namespace

// ---------------------------------------------------------------------------
// Prediction and completed paths

double predict_with(const FitResult& fit, std::span<const double> x, int location, int group, std::size_t period) {
  if (group < 0 || group >= fit.params.n_groups() || !fit.params.defined(group, period)) {
    throw Error(ErrorCode::UndefinedAlpha, "group " + std::to_string(group + 1) + " period index " +
                                               std::to_string(period));
  }
  return fit.params.common_part(x, location) + fit.params.alpha(group, static_cast<Eigen::Index>(period));
}

double predict(const FitResult& fit, const PanelDataset& data, std::size_t unit, std::size_t period) {
  if (!data.observed(unit, period)) {
    throw Error(ErrorCode::MissingCovariates, "unit " + data.unit_ids()[unit] + " period " +
                                                  std::to_string(data.period_ids()[period]));
  }
  return predict_with(fit, data.covariates(unit, period), data.location(unit), fit.gamma.group[unit], period);
}

std::string_view to_string(CompletionRule rule) {
  switch (rule) {
    case CompletionRule::None: return "none";
    case CompletionRule::TimeInvariant: return "time_invariant";
    case CompletionRule::Age: return "age";
    case CompletionRule::HoldFirst: return "hold_first";
    case CompletionRule::Interpolate: return "interpolate";
  }
  return "none";
}

std::string_view to_string(FillFlag flag) {
  switch (flag) {
    case FillFlag::Observed: return "observed";
    case FillFlag::CarriedForward: return "carried_forward";
    case FillFlag::CarriedBackward: return "carried_backward";
    case FillFlag::AgeForward: return "age_forward";
    case FillFlag::AgeBackward: return "age_backward";
    case FillFlag::HeldFirst: return "held_first";
    case FillFlag::Interpolated: return "interpolated";
    case FillFlag::Missing: return "missing";
  }
  return "missing";
}

std::string_view to_string(CellSource source) {
  switch (source) {
    case CellSource::Observed: return "observed";
    case CellSource::Imputed: return "imputed";
    case CellSource::Absent: return "absent";
  }
  return "absent";
}

bool CovariateTable::complete(std::size_t i, std::size_t t) const {
  for (std::size_t k = 0; k < n_covariates; ++k) {
    if (flag(i, t, k) == FillFlag::Missing) return false;
  }
  return true;
}

CovariateTable complete_covariates(const PanelDataset& data, std::span<const CompletionRule> rules,
                                   std::span<const std::size_t> window) {
  const std::size_t n = data.n_units();
  const std::size_t periods = data.n_periods();
  const std::size_t k_cov = data.n_covariates();
  if (rules.size() != k_cov) throw Error(ErrorCode::InvalidArgument, "one completion rule per covariate");

  std::vector<std::uint8_t> needed(periods, window.empty() ? 1 : 0);
  for (std::size_t t : window) {
    if (t >= periods) throw Error(ErrorCode::InvalidArgument, "window period out of range");
    needed[t] = 1;
  }

  CovariateTable table;
  table.n_units = n;
  table.n_periods = periods;
  table.n_covariates = k_cov;
  table.values.assign(n * periods * k_cov, kNaN);
  table.flags.assign(n * periods * k_cov, FillFlag::Missing);
  const auto& calendar = data.period_ids();

  for (std::size_t i = 0; i < n; ++i) {
    const auto obs = data.observed_periods(i);
    for (std::size_t t = 0; t < periods; ++t) {
      const std::size_t base = (i * periods + t) * k_cov;
      if (data.observed(i, t)) {
        const auto x = data.covariates(i, t);
        for (std::size_t k = 0; k < k_cov; ++k) {
          table.values[base + k] = x[k];
          table.flags[base + k] = FillFlag::Observed;
        }
        continue;
      }
      // Bracketing observations: last observed before t and first after t.
      const auto after_it = std::upper_bound(obs.begin(), obs.end(), static_cast<int>(t));
      const int next = after_it == obs.end() ? -1 : *after_it;
      const int prev = after_it == obs.begin() ? -1 : *(after_it - 1);

      for (std::size_t k = 0; k < k_cov; ++k) {
        auto value_at = [&](int s) { return data.covariates(i, static_cast<std::size_t>(s))[k]; };
        double v = kNaN;
        FillFlag f = FillFlag::Missing;
        switch (rules[k]) {
          case CompletionRule::None:
            if (needed[t]) {
              throw Error(ErrorCode::UntaggedColumn,
                          "covariate '" + data.covariate_names()[k] + "' has no completion rule but unit " +
                              data.unit_ids()[i] + " needs period " + std::to_string(calendar[t]));
            }
            break;
          case CompletionRule::TimeInvariant:
            if (prev >= 0) {
              v = value_at(prev);
              f = FillFlag::CarriedForward;
            } else {
              v = value_at(next);
              f = FillFlag::CarriedBackward;
            }
            break;
          case CompletionRule::Age: {
            int src = prev;
            if (src < 0 || (next >= 0 && calendar[static_cast<std::size_t>(next)] - calendar[t] <
                                             calendar[t] - calendar[static_cast<std::size_t>(prev)])) {
              src = next;
            }
            const auto gap = static_cast<double>(calendar[t] - calendar[static_cast<std::size_t>(src)]);
            v = value_at(src) + gap;
            f = src < static_cast<int>(t) ? FillFlag::AgeForward : FillFlag::AgeBackward;
            if (f == FillFlag::AgeBackward) table.backward_age_used = true;
            break;
          }
          case CompletionRule::HoldFirst:
            v = value_at(obs.front());
            f = FillFlag::HeldFirst;
            break;
          case CompletionRule::Interpolate:
            if (prev >= 0 && next >= 0) {
              const auto t0 = static_cast<double>(calendar[static_cast<std::size_t>(prev)]);
              const auto t1 = static_cast<double>(calendar[static_cast<std::size_t>(next)]);
              const double w = (static_cast<double>(calendar[t]) - t0) / (t1 - t0);
              v = (1.0 - w) * value_at(prev) + w * value_at(next);
              f = FillFlag::Interpolated;
            } else if (prev >= 0) {
              v = value_at(prev);
              f = FillFlag::CarriedForward;
            } else {
              v = value_at(next);
              f = FillFlag::CarriedBackward;
            }
            break;
        }
        table.values[base + k] = v;
        table.flags[base + k] = f;
      }
    }
  }
  return table;
}

CompletedPanel complete_paths(const FitResult& fit, const PanelDataset& data, const CovariateTable& covariates,
                              std::span<const std::size_t> window, std::string completion_policy) {
  CompletedPanel out;
  out.window.assign(window.begin(), window.end());
  out.n_units = data.n_units();
  out.completion_policy = std::move(completion_policy);
  const std::size_t w_len = out.window.size();
  out.y.assign(out.n_units * w_len, kNaN);
  out.source.assign(out.n_units * w_len, CellSource::Absent);

  for (std::size_t i = 0; i < out.n_units; ++i) {
    const int g = fit.gamma.group[i];
    for (std::size_t w = 0; w < w_len; ++w) {
      const std::size_t t = out.window[w];
      if (t >= data.n_periods()) throw Error(ErrorCode::InvalidArgument, "window period out of range");
      const std::size_t c = i * w_len + w;
      if (data.observed(i, t)) {
        out.y[c] = data.outcome(i, t);
        out.source[c] = CellSource::Observed;
      } else if (fit.params.defined(g, t) && covariates.complete(i, t)) {
        out.y[c] = predict_with(fit, covariates.at(i, t), data.location(i), g, t);
        out.source[c] = CellSource::Imputed;
      } else {
        ++out.absent_cells;
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Poverty status and rates

PovertyStatus poverty_status(double y, double z) { return y < z ? PovertyStatus::Poor : PovertyStatus::NonPoor; }

std::vector<double> period_poverty_lines(const PanelDataset& data) {
  std::vector<double> sum(data.n_periods(), 0.0);
  std::vector<std::size_t> count(data.n_periods(), 0);
  for (std::size_t i = 0; i < data.n_units(); ++i) {
    for (int t : data.observed_periods(i)) {
      sum[static_cast<std::size_t>(t)] += data.poverty_line(i, static_cast<std::size_t>(t));
      ++count[static_cast<std::size_t>(t)];
    }
  }
  std::vector<double> lines(data.n_periods(), kNaN);
  for (std::size_t t = 0; t < lines.size(); ++t) {
    if (count[t] > 0) lines[t] = sum[t] / static_cast<double>(count[t]);
  }
  return lines;
}

std::vector<RateRow> weighted_rate(std::span<const StatusRecord> records) {
  std::map<std::pair<int, std::int64_t>, RateRow> acc;
  std::map<std::pair<int, std::int64_t>, double> poor_weight;
  for (const auto& r : records) {
    if (!(r.weight >= 0.0) || !std::isfinite(r.weight)) {
      throw Error(ErrorCode::InvalidArgument, "weights must be finite and >= 0");
    }
    auto& row = acc[{r.key, r.period}];
    row.key = r.key;
    row.period = r.period;
    row.weight_total += r.weight;
    ++row.count;
    if (r.status == PovertyStatus::Poor) poor_weight[{r.key, r.period}] += r.weight;
  }
  std::vector<RateRow> out;
  for (auto& [key, row] : acc) {
    if (row.weight_total <= 0.0) {
      throw Error(ErrorCode::ZeroWeightCell,
                  "key " + std::to_string(row.key) + " period " + std::to_string(row.period));
    }
    row.rate = poor_weight[key] / row.weight_total;
    out.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transitions

TransitionState transition_state(PovertyStatus before, PovertyStatus after) {
  const bool b = before == PovertyStatus::Poor;
  const bool a = after == PovertyStatus::Poor;
  if (b) return a ? PoorPoor : PoorNonPoor;
  return a ? NonPoorPoor : NonPoorNonPoor;
}

const TransitionRow* TransitionTable::find(std::int64_t end_period) const {
  const auto it = std::lower_bound(rows.begin(), rows.end(), end_period,
                                   [](const TransitionRow& r, std::int64_t p) { return r.end_period < p; });
  return it != rows.end() && it->end_period == end_period ? &*it : nullptr;
}

TransitionTable transition_table(std::span<const TransitionPair> pairs) {
  std::map<std::int64_t, TransitionRow> acc;
  std::map<std::int64_t, std::array<double, 4>> weights;
  for (const auto& p : pairs) {
    if (!(p.weight >= 0.0) || !std::isfinite(p.weight)) {
      throw Error(ErrorCode::InvalidArgument, "weights must be finite and >= 0");
    }
    const int s = transition_state(p.before, p.after);
    auto& row = acc[p.end_period];
    row.end_period = p.end_period;
    ++row.count[static_cast<std::size_t>(s)];
    weights[p.end_period][static_cast<std::size_t>(s)] += p.weight;
  }
  TransitionTable table;
  for (auto& [period, row] : acc) {
    const auto& w = weights[period];
    row.weight_total = w[0] + w[1] + w[2] + w[3];
    if (row.weight_total <= 0.0) continue;
    for (std::size_t s = 0; s < 4; ++s) row.share[s] = w[s] / row.weight_total;
    table.rows.push_back(row);
  }
  return table;
}

std::vector<TransitionPair> observed_transition_pairs(const PanelDataset& data) {
  const auto& calendar = data.period_ids();
  std::vector<TransitionPair> pairs;
  for (std::size_t i = 0; i < data.n_units(); ++i) {
    const auto obs = data.observed_periods(i);
    for (std::size_t j = 1; j < obs.size(); ++j) {
      const auto s = static_cast<std::size_t>(obs[j - 1]);
      const auto t = static_cast<std::size_t>(obs[j]);
      if (calendar[t] - calendar[s] != 1) continue;
      pairs.push_back({calendar[t], poverty_status(data.outcome(i, s), data.poverty_line(i, s)),
                       poverty_status(data.outcome(i, t), data.poverty_line(i, t)), data.weight(i, t)});
    }
  }
  return pairs;
}

StatusMatrix completed_statuses(const CompletedPanel& completed, const PanelDataset& data) {
  const auto lines = period_poverty_lines(data);
  StatusMatrix m;
  m.n_units = completed.n_units;
  m.n_periods = completed.window.size();
  m.cells.assign(m.n_units * m.n_periods, -1);
  for (std::size_t i = 0; i < m.n_units; ++i) {
    for (std::size_t w = 0; w < m.n_periods; ++w) {
      const std::size_t t = completed.window[w];
      const auto src = completed.cell_source(i, w);
      if (src == CellSource::Absent) continue;
      const double z = src == CellSource::Observed ? data.poverty_line(i, t) : lines[t];
      if (std::isnan(z)) continue;
      m.cells[i * m.n_periods + w] = poor(completed.value(i, w), z) ? 1 : 0;
    }
  }
  return m;
}

std::vector<TransitionPair> completed_transition_pairs(const CompletedPanel& completed, const PanelDataset& data) {
  const auto statuses = completed_statuses(completed, data);
  const auto& calendar = data.period_ids();
  std::vector<TransitionPair> pairs;
  for (std::size_t i = 0; i < completed.n_units; ++i) {
    const auto obs = data.observed_periods(i);
    for (std::size_t w = 1; w < completed.window.size(); ++w) {
      const std::int8_t before = statuses.at(i, w - 1);
      const std::int8_t after = statuses.at(i, w);
      if (before < 0 || after < 0) continue;
      const std::size_t t = completed.window[w];
      if (calendar[t] - calendar[completed.window[w - 1]] != 1) continue;
      std::size_t src = static_cast<std::size_t>(obs.front());
      for (int s : obs) {
        const auto ss = static_cast<std::size_t>(s);
        if (std::llabs(calendar[ss] - calendar[t]) < std::llabs(calendar[src] - calendar[t])) src = ss;
      }
      pairs.push_back({calendar[t], before ? PovertyStatus::Poor : PovertyStatus::NonPoor,
                       after ? PovertyStatus::Poor : PovertyStatus::NonPoor, data.weight(i, src)});
    }
  }
  return pairs;
}

OneStepValidation one_step_validation(const FitResult& fit_on_train, const PanelDataset& data,
                                      const HoldoutSplit& split) {
  const auto& calendar = data.period_ids();
  std::vector<TransitionPair> actual_pairs;
  std::vector<TransitionPair> predicted_pairs;
  OneStepValidation out;
  double weight_total = 0.0;
  double weight_correct = 0.0;

  for (std::size_t i = 0; i < data.n_units(); ++i) {
    const auto obs = data.observed_periods(i);
    if (obs.size() < 2) {
      ++out.excluded_nonconsecutive;
      continue;
    }
    const auto t = static_cast<std::size_t>(split.last_period[i]);
    const auto it = std::find(obs.begin(), obs.end(), static_cast<int>(t));
    if (it == obs.begin() || it == obs.end()) {
      ++out.excluded_nonconsecutive;
      continue;
    }
    const auto s = static_cast<std::size_t>(*(it - 1));
    if (calendar[t] - calendar[s] != 1) {
      ++out.excluded_nonconsecutive;
      continue;
    }
    const int g = fit_on_train.gamma.group[i];
    if (!fit_on_train.params.defined(g, t)) {
      ++out.excluded_undefined;
      continue;
    }
    const double z_t = data.poverty_line(i, t);
    const auto before = poverty_status(data.outcome(i, s), data.poverty_line(i, s));
    const auto actual = poverty_status(data.outcome(i, t), z_t);
    const auto predicted = poverty_status(predict(fit_on_train, data, i, t), z_t);
    const double w = data.weight(i, t);
    actual_pairs.push_back({calendar[t], before, actual, w});
    predicted_pairs.push_back({calendar[t], before, predicted, w});
    weight_total += w;
    if (predicted == actual) weight_correct += w;
    ++out.n_pairs;
  }

  out.actual = transition_table(actual_pairs);
  out.predicted = transition_table(predicted_pairs);
  out.accuracy = weight_total > 0.0 ? weight_correct / weight_total : kNaN;
  out.misclassification = 1.0 - out.accuracy;
  return out;
}

std::vector<HoldoutClassificationRow> holdout_classification(const FitResult& fit_on_train,
                                                             const PanelDataset& data, const HoldoutSplit& split) {
  struct Acc {
    std::size_t units = 0;
    double w = 0.0, w_actual = 0.0, w_pred = 0.0, w_correct = 0.0;
  };
  std::map<std::int64_t, Acc> acc;
  for (const auto& cell : split.test_cells) {
    const int g = fit_on_train.gamma.group[cell.unit];
    if (!fit_on_train.params.defined(g, cell.period)) continue;
    const double z = data.poverty_line(cell.unit, cell.period);
    const bool actual = poor(data.outcome(cell.unit, cell.period), z);
    const bool predicted = poor(predict(fit_on_train, data, cell.unit, cell.period), z);
    const double w = data.weight(cell.unit, cell.period);
    auto& a = acc[data.period_ids()[cell.period]];
    ++a.units;
    a.w += w;
    a.w_actual += actual ? w : 0.0;
    a.w_pred += predicted ? w : 0.0;
    a.w_correct += actual == predicted ? w : 0.0;
  }
  std::vector<HoldoutClassificationRow> rows;
  for (const auto& [period, a] : acc) {
    if (a.w <= 0.0) continue;
    rows.push_back({period, a.units, a.w_actual / a.w, a.w_pred / a.w, a.w_correct / a.w});
  }
  return rows;
}

TransitionFitMetrics transition_fit(const TransitionTable& predicted, const TransitionTable& actual) {
  TransitionFitMetrics m;
  for (const auto& p : predicted.rows) {
    const auto* a = actual.find(p.end_period);
    if (!a) continue;
    TransitionFitRow row;
    row.end_period = p.end_period;
    double abs_sum = 0.0;
    double sq_sum = 0.0;
    for (std::size_t s = 0; s < 4; ++s) {
      const double d = p.share[s] - a->share[s];
      abs_sum += std::abs(d);
      sq_sum += d * d;
    }
    row.mae = abs_sum / 4.0;
    row.rmse = std::sqrt(sq_sum / 4.0);
    row.tv = 0.5 * abs_sum;
    m.rows.push_back(row);
  }
  if (m.rows.empty()) throw Error(ErrorCode::NoOverlap, "tables share no end period");
  for (const auto& r : m.rows) {
    m.mae_avg += r.mae;
    m.rmse_avg += r.rmse;
    m.tv_avg += r.tv;
    m.tv_max = std::max(m.tv_max, r.tv);
  }
  const auto n = static_cast<double>(m.rows.size());
  m.mae_avg /= n;
  m.rmse_avg /= n;
  m.tv_avg /= n;
  return m;
}

// ---------------------------------------------------------------------------
// Group profiles and durations

std::vector<GroupProfile> group_profiles(const FitResult& fit, const PanelDataset& data,
                                         std::span<const std::size_t> baseline_covariates) {
  const int n_groups = fit.gamma.n_groups;
  const std::size_t n_cov = baseline_covariates.size();
  for (std::size_t k : baseline_covariates) {
    if (k >= data.n_covariates()) throw Error(ErrorCode::InvalidArgument, "baseline covariate out of range");
  }

  std::vector<GroupProfile> profiles(static_cast<std::size_t>(n_groups));
  std::vector<double> weight(static_cast<std::size_t>(n_groups), 0.0);
  double total_weight = 0.0;
  for (int g = 0; g < n_groups; ++g) {
    auto& p = profiles[static_cast<std::size_t>(g)];
    p.group = g;
    p.baseline_covariates.assign(n_cov, 0.0);
    double s = 0.0;
    int c = 0;
    for (Eigen::Index t = 0; t < fit.params.alpha.cols(); ++t) {
      if (fit.params.defined(g, static_cast<std::size_t>(t))) {
        s += fit.params.alpha(g, t);
        ++c;
      }
    }
    p.mean_alpha = c > 0 ? s / c : kNaN;
  }

  for (std::size_t i = 0; i < data.n_units(); ++i) {
    const auto g = static_cast<std::size_t>(fit.gamma.group[i]);
    const auto t0 = static_cast<std::size_t>(data.observed_periods(i).front());
    const double w = data.weight(i, t0);
    auto& p = profiles[g];
    ++p.size;
    weight[g] += w;
    total_weight += w;
    p.baseline_outcome += w * data.outcome(i, t0);
    const auto x = data.covariates(i, t0);
    for (std::size_t k = 0; k < n_cov; ++k) p.baseline_covariates[k] += w * x[baseline_covariates[k]];
  }
  if (total_weight <= 0.0) throw Error(ErrorCode::ZeroWeightCell, "baseline weights sum to zero");

  std::vector<GroupProfile> out;
  for (int g = 0; g < n_groups; ++g) {
    auto& p = profiles[static_cast<std::size_t>(g)];
    if (p.size == 0) continue;
    const double w = weight[static_cast<std::size_t>(g)];
    p.population_share = w / total_weight;
    p.baseline_outcome = w > 0.0 ? p.baseline_outcome / w : kNaN;
    for (auto& v : p.baseline_covariates) v = w > 0.0 ? v / w : kNaN;
    out.push_back(std::move(p));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const GroupProfile& a, const GroupProfile& b) { return a.mean_alpha > b.mean_alpha; });
  for (std::size_t r = 0; r < out.size(); ++r) out[r].rank = static_cast<int>(r);
  return out;
}

DurationSummary duration_summaries(const StatusMatrix& statuses, int chronic_k) {
  DurationSummary out;
  std::size_t chronic = 0;
  for (std::size_t i = 0; i < statuses.n_units; ++i) {
    UnitDuration u;
    int run = 0;
    for (std::size_t w = 0; w < statuses.n_periods; ++w) {
      const std::int8_t s = statuses.at(i, w);
      if (s == 1) {
        ++u.periods;
        ++u.poor_periods;
        ++run;
        continue;
      }
      if (s == 0) ++u.periods;
      if (run > 0) u.spells.push_back(run);
      run = 0;
    }
    if (run > 0) u.spells.push_back(run);
    u.poor_share = u.periods > 0 ? static_cast<double>(u.poor_periods) / static_cast<double>(u.periods) : kNaN;
    u.chronic = chronic_k >= 0 && u.poor_periods >= static_cast<std::size_t>(chronic_k) && u.poor_periods > 0;
    if (u.chronic) ++chronic;
    for (int len : u.spells) ++out.spell_length_counts[len];
    out.units.push_back(std::move(u));
  }
  out.chronic_share =
      statuses.n_units > 0 ? static_cast<double>(chronic) / static_cast<double>(statuses.n_units) : 0.0;
  return out;
}

}  // namespace gfe
