#include "gfe/panel.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "gfe/kernels.hpp"

namespace gfe {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyUnit: return "EmptyUnit";
    case ErrorCode::LocationDrift: return "LocationDrift";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::NegativeWeight: return "NegativeWeight";
    case ErrorCode::UndefinedAlpha: return "UndefinedAlpha";
    case ErrorCode::NoObservations: return "NoObservations";
    case ErrorCode::NoFeasibleGroup: return "NoFeasibleGroup";
    case ErrorCode::UnitObservedOnce: return "UnitObservedOnce";
    case ErrorCode::DegreesOfFreedomExhausted: return "DegreesOfFreedomExhausted";
    case ErrorCode::NoScorableCells: return "NoScorableCells";
    case ErrorCode::MissingCovariates: return "MissingCovariates";
    case ErrorCode::UntaggedColumn: return "UntaggedColumn";
    case ErrorCode::ZeroWeightCell: return "ZeroWeightCell";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::InfeasibleRotation: return "InfeasibleRotation";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::FilterEliminatedAll: return "FilterEliminatedAll";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

namespace {

std::string summarize(const std::vector<Violation>& violations) {
  std::ostringstream os;
  os << violations.size() << " violation(s)";
  for (std::size_t k = 0; k < violations.size() && k < 5; ++k) {
    const auto& v = violations[k];
    os << "; " << to_string(v.rule) << " unit=" << v.unit_id;
    if (v.period != 0) os << " period=" << v.period;
    if (!v.detail.empty()) os << " (" << v.detail << ")";
  }
  if (violations.size() > 5) os << "; ...";
  return os.str();
}

ErrorCode first_rule(const std::vector<Violation>& violations) {
  return violations.empty() ? ErrorCode::InvalidArgument : violations.front().rule;
}

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : Error(first_rule(violations), summarize(violations)), violations_(std::move(violations)) {}

RawPanel RawPanel::allocate(std::size_t n_units, std::size_t n_periods, std::size_t n_covariates) {
  RawPanel raw;
  raw.unit_ids.resize(n_units);
  raw.period_ids.resize(n_periods);
  raw.covariate_names.resize(n_covariates);
  const std::size_t cells = n_units * n_periods;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  raw.mask.assign(cells, 0);
  raw.outcome.assign(cells, nan);
  raw.weight.assign(cells, nan);
  raw.poverty_line.assign(cells, nan);
  raw.location.assign(cells, -1);
  raw.covariates.assign(cells * n_covariates, nan);
  return raw;
}

PanelDataset validate_dataset(const RawPanel& raw) {
  const std::size_t n = raw.n_units();
  const std::size_t periods = raw.n_periods();
  const std::size_t k = raw.n_covariates();
  const std::size_t cells = n * periods;

  if (n == 0 || periods == 0) {
    throw Error(ErrorCode::InvalidArgument, "panel needs at least one unit and one period");
  }
  if (raw.mask.size() != cells || raw.outcome.size() != cells || raw.weight.size() != cells ||
      raw.poverty_line.size() != cells || raw.location.size() != cells ||
      raw.covariates.size() != cells * k) {
    throw Error(ErrorCode::InvalidArgument, "cell arrays do not match N x T (x K)");
  }
  for (std::size_t t = 1; t < periods; ++t) {
    if (raw.period_ids[t] <= raw.period_ids[t - 1]) {
      throw Error(ErrorCode::InvalidArgument, "period_ids must be strictly increasing");
    }
  }

  int max_location = -1;
  for (std::size_t c = 0; c < cells; ++c) {
    if (raw.mask[c]) max_location = std::max(max_location, raw.location[c]);
  }
  std::size_t n_locations = raw.location_labels.size();
  if (n_locations == 0) n_locations = static_cast<std::size_t>(std::max(max_location + 1, 1));

  std::vector<Violation> violations;
  std::vector<int> unit_location(n, -1);

  for (std::size_t i = 0; i < n; ++i) {
    bool any = false;
    for (std::size_t t = 0; t < periods; ++t) {
      const std::size_t c = i * periods + t;
      if (!raw.mask[c]) continue;
      any = true;
      const long long period = raw.period_ids[t];
      const int loc = raw.location[c];
      if (loc < 0 || static_cast<std::size_t>(loc) >= n_locations) {
        violations.push_back({ErrorCode::InvalidArgument, raw.unit_ids[i], period,
                              "location index out of range"});
      } else if (unit_location[i] < 0) {
        unit_location[i] = loc;
      } else if (unit_location[i] != loc) {
        violations.push_back({ErrorCode::LocationDrift, raw.unit_ids[i], period,
                              "location " + std::to_string(loc) + " differs from " +
                                  std::to_string(unit_location[i])});
      }
      bool finite = std::isfinite(raw.outcome[c]) && std::isfinite(raw.weight[c]) &&
                    std::isfinite(raw.poverty_line[c]);
      for (std::size_t j = 0; j < k; ++j) finite = finite && std::isfinite(raw.covariates[c * k + j]);
      if (!finite) {
        violations.push_back({ErrorCode::NonFinite, raw.unit_ids[i], period, "observed cell"});
      } else if (raw.weight[c] < 0.0) {
        violations.push_back({ErrorCode::NegativeWeight, raw.unit_ids[i], period, ""});
      }
    }
    if (!any) violations.push_back({ErrorCode::EmptyUnit, raw.unit_ids[i], 0, "no observed period"});
  }
  if (!violations.empty()) throw ValidationError(std::move(violations));

  PanelDataset data;
  data.unit_ids_ = raw.unit_ids;
  data.period_ids_ = raw.period_ids;
  data.covariate_names_ = raw.covariate_names;
  data.location_labels_ = raw.location_labels;
  if (data.location_labels_.empty()) {
    for (std::size_t p = 0; p < n_locations; ++p) data.location_labels_.push_back(std::to_string(p + 1));
  }
  data.mask_ = raw.mask;
  for (auto& m : data.mask_) m = m ? 1 : 0;
  data.outcome_ = raw.outcome;
  data.weight_ = raw.weight;
  data.poverty_line_ = raw.poverty_line;
  data.covariates_ = raw.covariates;
  data.location_ = unit_location;
  data.build_index();
  return data;
}

void PanelDataset::build_index() {
  const std::size_t n = n_units();
  const std::size_t periods = n_periods();
  obs_offsets_.assign(n + 1, 0);
  obs_periods_.clear();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < periods; ++t) {
      if (mask_[i * periods + t]) obs_periods_.push_back(static_cast<int>(t));
    }
    obs_offsets_[i + 1] = obs_periods_.size();
  }
}

PanelDataset PanelDataset::with_mask(std::span<const std::uint8_t> mask) const {
  if (mask.size() != mask_.size()) throw Error(ErrorCode::InvalidArgument, "mask size mismatch");
  PanelDataset out = *this;
  std::vector<Violation> violations;
  for (std::size_t c = 0; c < mask.size(); ++c) {
    if (mask[c] && !mask_[c]) {
      throw Error(ErrorCode::InvalidArgument, "replacement mask may only remove observed cells");
    }
    out.mask_[c] = mask[c] ? 1 : 0;
  }
  out.build_index();
  for (std::size_t i = 0; i < out.n_units(); ++i) {
    if (out.observed_periods(i).empty()) {
      violations.push_back({ErrorCode::EmptyUnit, unit_ids_[i], 0, "no observed period under mask"});
    }
  }
  if (!violations.empty()) throw ValidationError(std::move(violations));
  return out;
}

PanelDataset PanelDataset::select_units(std::span<const std::size_t> units) const {
  const std::size_t periods = n_periods();
  const std::size_t k = n_covariates();
  PanelDataset out;
  out.period_ids_ = period_ids_;
  out.covariate_names_ = covariate_names_;
  out.location_labels_ = location_labels_;
  for (std::size_t i : units) {
    if (i >= n_units()) throw Error(ErrorCode::InvalidArgument, "unit index out of range");
    out.unit_ids_.push_back(unit_ids_[i]);
    out.location_.push_back(location_[i]);
    const std::size_t c0 = i * periods;
    out.mask_.insert(out.mask_.end(), mask_.begin() + c0, mask_.begin() + c0 + periods);
    out.outcome_.insert(out.outcome_.end(), outcome_.begin() + c0, outcome_.begin() + c0 + periods);
    out.weight_.insert(out.weight_.end(), weight_.begin() + c0, weight_.begin() + c0 + periods);
    out.poverty_line_.insert(out.poverty_line_.end(), poverty_line_.begin() + c0,
                             poverty_line_.begin() + c0 + periods);
    out.covariates_.insert(out.covariates_.end(), covariates_.begin() + c0 * k,
                           covariates_.begin() + (c0 + periods) * k);
  }
  if (out.unit_ids_.empty()) throw Error(ErrorCode::InvalidArgument, "selection is empty");
  out.build_index();
  return out;
}

RawPanel PanelDataset::to_raw() const {
  RawPanel raw;
  raw.unit_ids = unit_ids_;
  raw.period_ids = period_ids_;
  raw.covariate_names = covariate_names_;
  raw.location_labels = location_labels_;
  raw.mask = mask_;
  raw.outcome = outcome_;
  raw.weight = weight_;
  raw.poverty_line = poverty_line_;
  raw.covariates = covariates_;
  raw.location.resize(mask_.size());
  for (std::size_t i = 0; i < n_units(); ++i) {
    for (std::size_t t = 0; t < n_periods(); ++t) raw.location[i * n_periods() + t] = location_[i];
  }
  return raw;
}

ModelParams ModelParams::zeros(int n_groups, std::size_t n_periods, std::size_t n_covariates,
                               std::size_t n_locations, int reference_location) {
  ModelParams p;
  p.theta = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_covariates));
  p.alpha = Eigen::MatrixXd::Zero(n_groups, static_cast<Eigen::Index>(n_periods));
  p.alpha_defined.assign(static_cast<std::size_t>(n_groups) * n_periods, 1);
  p.mu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_locations));
  p.reference_location = reference_location;
  return p;
}

void ModelParams::set_alpha(int g, std::size_t t, double value) {
  alpha(g, static_cast<Eigen::Index>(t)) = value;
  alpha_defined[static_cast<std::size_t>(g) * static_cast<std::size_t>(alpha.cols()) + t] = 1;
}

void ModelParams::clear_alpha(int g, std::size_t t) {
  alpha(g, static_cast<Eigen::Index>(t)) = 0.0;
  alpha_defined[static_cast<std::size_t>(g) * static_cast<std::size_t>(alpha.cols()) + t] = 0;
}

double ModelParams::common_part(std::span<const double> x, int location) const {
  double v = mu[location];
  for (std::size_t k = 0; k < x.size(); ++k) v += x[k] * theta[static_cast<Eigen::Index>(k)];
  return v;
}

GroupAssignment GroupAssignment::constant(std::size_t n_units, int n_groups, int label) {
  GroupAssignment gamma;
  gamma.n_groups = n_groups;
  gamma.group.assign(n_units, label);
  return gamma;
}

void GroupAssignment::check(std::size_t n_units) const {
  if (n_groups < 1) throw Error(ErrorCode::InvalidArgument, "G must be >= 1");
  if (group.size() != n_units) throw Error(ErrorCode::InvalidArgument, "assignment length != N");
  for (int g : group) {
    if (g < 0 || g >= n_groups) throw Error(ErrorCode::InvalidArgument, "group label out of range");
  }
}

void FitConfig::check() const {
  if (n_groups < 1 || n_starts < 1 || itermax < 1 || neighmax < 1 || max_local_iters < 1) {
    throw Error(ErrorCode::InvalidArgument, "fit counters must all be >= 1");
  }
  if (!(sse_rel_tol > 0.0)) throw Error(ErrorCode::InvalidArgument, "sse_rel_tol must be positive");
}

double objective(const PanelDataset& data, const ModelParams& params, const GroupAssignment& gamma) {
  gamma.check(data.n_units());
  const auto r = kernels::omp::masked_sse(data, params, gamma.group);
  if (r.undefined_cells > 0) {
    throw Error(ErrorCode::UndefinedAlpha,
                std::to_string(r.undefined_cells) + " observed cell(s) map to undefined alpha");
  }
  return r.sse;
}

}  // namespace gfe
