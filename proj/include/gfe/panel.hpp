#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gfe/error.hpp"

namespace gfe {

/// Dense N x T staging area for an unbalanced panel before validation.
/// Cell (i, t) lives at index i * T + t; covariates at (i * T + t) * K + k.
/// Values in cells with mask == 0 are ignored.
struct RawPanel {
  std::vector<std::string> unit_ids;
  std::vector<std::int64_t> period_ids;
  std::vector<std::string> covariate_names;
  std::vector<std::string> location_labels;  // size L; generated when empty

  std::vector<std::uint8_t> mask;
  std::vector<double> outcome;
  std::vector<double> weight;
  std::vector<double> poverty_line;
  std::vector<int> location;  // 0-based, per cell
  std::vector<double> covariates;

  static RawPanel allocate(std::size_t n_units, std::size_t n_periods, std::size_t n_covariates);

  std::size_t n_units() const { return unit_ids.size(); }
  std::size_t n_periods() const { return period_ids.size(); }
  std::size_t n_covariates() const { return covariate_names.size(); }
  std::size_t cell(std::size_t i, std::size_t t) const { return i * period_ids.size() + t; }
};

/// Validated, immutable unbalanced panel. Only cells with observed(i, t) may be read.
class PanelDataset {
 public:
  PanelDataset() = default;

  std::size_t n_units() const { return unit_ids_.size(); }
  std::size_t n_periods() const { return period_ids_.size(); }
  std::size_t n_covariates() const { return covariate_names_.size(); }
  std::size_t n_locations() const { return location_labels_.size(); }
  std::size_t n_observed() const { return obs_periods_.size(); }

  bool observed(std::size_t i, std::size_t t) const { return mask_[i * n_periods() + t] != 0; }
  double outcome(std::size_t i, std::size_t t) const { return outcome_[i * n_periods() + t]; }
  double weight(std::size_t i, std::size_t t) const { return weight_[i * n_periods() + t]; }
  double poverty_line(std::size_t i, std::size_t t) const {
    return poverty_line_[i * n_periods() + t];
  }
  std::span<const double> covariates(std::size_t i, std::size_t t) const {
    const std::size_t k = n_covariates();
    return {covariates_.data() + (i * n_periods() + t) * k, k};
  }
  int location(std::size_t i) const { return location_[i]; }

  /// Period indices (ascending) at which unit i is observed.
  std::span<const int> observed_periods(std::size_t i) const {
    return {obs_periods_.data() + obs_offsets_[i], obs_offsets_[i + 1] - obs_offsets_[i]};
  }

  const std::vector<std::string>& unit_ids() const { return unit_ids_; }
  const std::vector<std::int64_t>& period_ids() const { return period_ids_; }
  const std::vector<std::string>& covariate_names() const { return covariate_names_; }
  const std::vector<std::string>& location_labels() const { return location_labels_; }
  std::span<const std::uint8_t> mask() const { return mask_; }

  /// Same panel under a narrower mask (mask <= current elementwise).
  /// Throws EmptyUnit if any unit would lose every observed period.
  PanelDataset with_mask(std::span<const std::uint8_t> mask) const;

  /// Restrict to the listed units, in the given order.
  PanelDataset select_units(std::span<const std::size_t> units) const;

  /// Back to staging form; validate_dataset(to_raw()) reproduces *this.
  RawPanel to_raw() const;

 private:
  friend PanelDataset validate_dataset(const RawPanel& raw);
  void build_index();

  std::vector<std::string> unit_ids_;
  std::vector<std::int64_t> period_ids_;
  std::vector<std::string> covariate_names_;
  std::vector<std::string> location_labels_;
  std::vector<std::uint8_t> mask_;
  std::vector<double> outcome_;
  std::vector<double> weight_;
  std::vector<double> poverty_line_;
  std::vector<double> covariates_;
  std::vector<int> location_;
  std::vector<std::size_t> obs_offsets_;
  std::vector<int> obs_periods_;
};

/// Checks every PanelDataset invariant; throws ValidationError listing all violations.
PanelDataset validate_dataset(const RawPanel& raw);

/// theta (K), alpha (G x T, each cell flagged defined or not) and mu (L, mu[reference] == 0).
struct ModelParams {
  Eigen::VectorXd theta;
  Eigen::MatrixXd alpha;
  std::vector<std::uint8_t> alpha_defined;  // row-major G x T
  Eigen::VectorXd mu;
  int reference_location = 0;

  static ModelParams zeros(int n_groups, std::size_t n_periods, std::size_t n_covariates,
                           std::size_t n_locations, int reference_location = 0);

  int n_groups() const { return static_cast<int>(alpha.rows()); }
  bool defined(int g, std::size_t t) const {
    return alpha_defined[static_cast<std::size_t>(g) * static_cast<std::size_t>(alpha.cols()) + t] != 0;
  }
  void set_alpha(int g, std::size_t t, double value);
  void clear_alpha(int g, std::size_t t);

  /// x'theta + mu_p, the part of the prediction that does not depend on the group.
  double common_part(std::span<const double> x, int location) const;
};

/// Unit-to-group partition. Labels are 0-based internally and 1-based in every file format.
struct GroupAssignment {
  int n_groups = 1;
  std::vector<int> group;

  static GroupAssignment constant(std::size_t n_units, int n_groups, int label = 0);
  void check(std::size_t n_units) const;
};

struct FitConfig {
  int n_groups = 1;
  int n_starts = 3;
  int itermax = 10;
  int neighmax = 5;
  int max_local_iters = 2;
  std::uint64_t base_seed = 20240101;
  double sse_rel_tol = 1e-10;

  void check() const;
};

/// Unweighted masked sum of squared residuals. Throws UndefinedAlpha when an
/// observed cell maps to an undefined alpha(g, t).
double objective(const PanelDataset& data, const ModelParams& params, const GroupAssignment& gamma);

}  // namespace gfe
