#include "gfe/ols.hpp"

#include <algorithm>
#include <cassert>

namespace gfe {

namespace {

constexpr double kRankTol = 1e-10;

struct Pinv {
  Eigen::MatrixXd matrix;
  int rank = 0;
};

Pinv symmetric_pinv(const Eigen::MatrixXd& a) {
  Pinv out;
  const auto n = a.rows();
  if (n == 0) {
    out.matrix.resize(0, 0);
    return out;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(a);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double scale = std::max(lambda.cwiseAbs().maxCoeff(), 1e-300);
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    if (lambda[j] > kRankTol * scale) {
      inv[j] = 1.0 / lambda[j];
      ++out.rank;
    }
  }
  const Eigen::MatrixXd& v = eig.eigenvectors();
  out.matrix = v * inv.asDiagonal() * v.transpose();
  return out;
}

// Solves the normal equations with the alpha block absorbed: the alpha-alpha
// block is diagonal (each row carries exactly one alpha indicator), so only the
// Schur complement on (theta, mu) needs a dense factorization. If that
// complement is singular the full system is pseudo-inverted instead, which
// gives the minimum-norm solution over all columns.
class NormalSolver {
 public:
  NormalSolver(const Eigen::MatrixXd& xtx, int alpha_begin, int alpha_end)
      : n_(static_cast<int>(xtx.rows())), alpha_begin_(alpha_begin), alpha_end_(alpha_end) {
    const int n_alpha = alpha_end - alpha_begin;
    for (int c = 0; c < n_; ++c) {
      if (c < alpha_begin || c >= alpha_end) reduced_.push_back(c);
    }
    const auto n_red = static_cast<Eigen::Index>(reduced_.size());

    d_inv_.resize(n_alpha);
    for (int a = 0; a < n_alpha; ++a) d_inv_[a] = 1.0 / xtx(alpha_begin + a, alpha_begin + a);

    a_ra_.resize(n_red, n_alpha);
    Eigen::MatrixXd schur(n_red, n_red);
    for (Eigen::Index r = 0; r < n_red; ++r) {
      for (int a = 0; a < n_alpha; ++a) a_ra_(r, a) = xtx(reduced_[r], alpha_begin + a);
      for (Eigen::Index s = 0; s < n_red; ++s) schur(r, s) = xtx(reduced_[r], reduced_[s]);
    }
    schur.noalias() -= a_ra_ * d_inv_.asDiagonal() * a_ra_.transpose();

    auto reduced_pinv = symmetric_pinv(schur);
    if (reduced_pinv.rank == n_red) {
      pinv_ = std::move(reduced_pinv.matrix);
      rank_ = n_alpha + static_cast<int>(n_red);
    } else {
      full_ = true;
      auto full = symmetric_pinv(xtx);
      pinv_ = std::move(full.matrix);
      rank_ = full.rank;
    }
  }

  Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
    if (full_) return pinv_ * rhs;
    const int n_alpha = alpha_end_ - alpha_begin_;
    const auto n_red = static_cast<Eigen::Index>(reduced_.size());
    Eigen::VectorXd b_red(n_red);
    for (Eigen::Index r = 0; r < n_red; ++r) b_red[r] = rhs[reduced_[r]];
    const Eigen::VectorXd b_alpha = rhs.segment(alpha_begin_, n_alpha);

    const Eigen::VectorXd z_red = pinv_ * (b_red - a_ra_ * d_inv_.cwiseProduct(b_alpha));
    const Eigen::VectorXd z_alpha = d_inv_.cwiseProduct(b_alpha - a_ra_.transpose() * z_red);

    Eigen::VectorXd z(n_);
    z.segment(alpha_begin_, n_alpha) = z_alpha;
    for (Eigen::Index r = 0; r < n_red; ++r) z[reduced_[r]] = z_red[r];
    return z;
  }

  int rank() const { return rank_; }
  bool deficient() const { return rank_ < n_; }

 private:
  int n_;
  int alpha_begin_;
  int alpha_end_;
  std::vector<int> reduced_;
  Eigen::VectorXd d_inv_;
  Eigen::MatrixXd a_ra_;
  Eigen::MatrixXd pinv_;
  bool full_ = false;
  int rank_ = 0;
};

std::vector<std::size_t> location_counts(const PanelDataset& data) {
  std::vector<std::size_t> counts(data.n_locations(), 0);
  for (std::size_t i = 0; i < data.n_units(); ++i) {
    counts[static_cast<std::size_t>(data.location(i))] += data.observed_periods(i).size();
  }
  return counts;
}

}  // namespace

kernels::DesignLayout make_layout(const PanelDataset& data, const std::vector<std::size_t>& counts,
                                  int n_groups, const DesignSpec& spec, bool pooled) {
  kernels::DesignLayout layout;
  layout.n_theta = spec.include_covariates ? static_cast<int>(data.n_covariates()) : 0;
  layout.n_groups = n_groups;
  layout.n_periods = data.n_periods();
  int col = layout.n_theta;

  layout.alpha_col.assign(static_cast<std::size_t>(n_groups) * data.n_periods(), -1);
  if (pooled) {
    for (auto& c : layout.alpha_col) c = col;
    ++col;
  } else {
    for (std::size_t c = 0; c < counts.size(); ++c) {
      if (counts[c] > 0) layout.alpha_col[c] = col++;
    }
  }

  const auto loc_counts = location_counts(data);
  layout.mu_col.assign(data.n_locations(), -1);
  for (std::size_t p = 0; p < data.n_locations(); ++p) {
    if (static_cast<int>(p) != spec.reference_location && loc_counts[p] > 0) layout.mu_col[p] = col++;
  }
  layout.n_cols = col;
  return layout;
}

namespace {

OlsResult solve_layout(const PanelDataset& data, const kernels::DesignLayout& layout, std::span<const int> group,
                       int n_alpha_cols, const DesignSpec& spec) {
  if (data.n_observed() == 0) throw Error(ErrorCode::NoObservations, "no observed cells");

  const auto ne = kernels::omp::accumulate_normal_equations(data, layout, group);
  const NormalSolver solver(ne.xtx, layout.n_theta, layout.n_theta + n_alpha_cols);
  Eigen::VectorXd z = solver.solve(ne.xty);
  // One step of iterative refinement on the true residual.
  const auto cr = kernels::omp::cross_residual(data, layout, group, z);
  z += solver.solve(cr.xtr);

  OlsResult out;
  out.n_columns = layout.n_cols;
  out.rank = solver.rank();
  out.rank_deficient = solver.deficient();
  out.params = ModelParams::zeros(layout.n_groups, data.n_periods(), data.n_covariates(), data.n_locations(),
                                  spec.reference_location);
  for (int k = 0; k < layout.n_theta; ++k) out.params.theta[k] = z[k];
  for (int g = 0; g < layout.n_groups; ++g) {
    for (std::size_t t = 0; t < data.n_periods(); ++t) {
      const int c = layout.alpha_column(g, t);
      if (c >= 0) {
        out.params.set_alpha(g, t, z[c]);
      } else {
        out.params.clear_alpha(g, t);
      }
    }
  }
  for (std::size_t p = 0; p < data.n_locations(); ++p) {
    const int c = layout.mu_col[p];
    if (c >= 0) out.params.mu[static_cast<Eigen::Index>(p)] = z[c];
  }
  return out;
}

void check_reference(const PanelDataset& data, const DesignSpec& spec) {
  if (spec.reference_location < 0 || static_cast<std::size_t>(spec.reference_location) >= data.n_locations()) {
    throw Error(ErrorCode::InvalidArgument, "reference_location out of range");
  }
}

}  // namespace

std::vector<std::size_t> cell_counts(const PanelDataset& data, const GroupAssignment& gamma) {
  std::vector<std::size_t> counts(static_cast<std::size_t>(gamma.n_groups) * data.n_periods(), 0);
  for (std::size_t i = 0; i < data.n_units(); ++i) {
    const auto row = static_cast<std::size_t>(gamma.group[i]) * data.n_periods();
    for (int t : data.observed_periods(i)) ++counts[row + static_cast<std::size_t>(t)];
  }
  return counts;
}

OlsResult ols_update(const PanelDataset& data, const GroupAssignment& gamma, const DesignSpec& spec) {
  gamma.check(data.n_units());
  check_reference(data, spec);
  if (spec.n_groups != gamma.n_groups) {
    throw Error(ErrorCode::InvalidArgument, "DesignSpec.n_groups differs from the assignment's G");
  }
  auto counts = cell_counts(data, gamma);
  const auto layout = make_layout(data, counts, gamma.n_groups, spec, false);
  const int n_alpha = static_cast<int>(std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }));
  auto out = solve_layout(data, layout, gamma.group, n_alpha, spec);
  out.cell_counts = std::move(counts);
  out.sse = objective(data, out.params, gamma);
  return out;
}

OlsResult pooled_ols(const PanelDataset& data, const DesignSpec& spec) {
  check_reference(data, spec);
  const std::vector<std::size_t> counts(data.n_periods(), 1);
  const auto layout = make_layout(data, counts, 1, spec, true);
  const std::vector<int> group(data.n_units(), 0);
  auto out = solve_layout(data, layout, group, 1, spec);
  out.sse = objective(data, out.params, GroupAssignment::constant(data.n_units(), 1));
  return out;
}

std::vector<CellResidual> residuals(const PanelDataset& data, const ModelParams& params,
                                    const GroupAssignment& gamma) {
  gamma.check(data.n_units());
  std::vector<CellResidual> out;
  out.reserve(data.n_observed());
  for (std::size_t i = 0; i < data.n_units(); ++i) {
    const int g = gamma.group[i];
    for (int t : data.observed_periods(i)) {
      const auto tt = static_cast<std::size_t>(t);
      if (g >= params.n_groups() || !params.defined(g, tt)) {
        throw Error(ErrorCode::UndefinedAlpha,
                    "unit " + data.unit_ids()[i] + " period " + std::to_string(data.period_ids()[tt]));
      }
      const double r =
          data.outcome(i, tt) - params.common_part(data.covariates(i, tt), data.location(i)) - params.alpha(g, t);
      out.push_back({i, tt, r});
    }
  }
  return out;
}

}  // namespace gfe
