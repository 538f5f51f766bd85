#include "gfe/dgp.hpp"

#include <cmath>
#include <limits>
#include <numeric>

namespace gfe {

void DgpSpec::check() const {
  if (n_units == 0 || n_periods == 0 || n_groups < 1 || n_locations < 1) {
    throw Error(ErrorCode::InvalidArgument, "DGP needs N, T, G, L >= 1");
  }
  if (theta.size() != static_cast<Eigen::Index>(n_covariates)) {
    throw Error(ErrorCode::InvalidArgument, "theta must have K entries");
  }
  if (alpha.rows() != n_groups || alpha.cols() != static_cast<Eigen::Index>(n_periods)) {
    throw Error(ErrorCode::InvalidArgument, "alpha must be G x T");
  }
  if (mu.size() != static_cast<Eigen::Index>(n_locations) || mu(0) != 0.0) {
    throw Error(ErrorCode::InvalidArgument, "mu must have L entries with mu[0] == 0");
  }
  if (!(noise_sd >= 0.0)) throw Error(ErrorCode::InvalidArgument, "noise_sd must be >= 0");
  if (!group_weights.empty()) {
    if (group_weights.size() != static_cast<std::size_t>(n_groups)) {
      throw Error(ErrorCode::InvalidArgument, "group_weights must have G entries");
    }
    double s = 0.0;
    for (double w : group_weights) {
      if (!(w >= 0.0)) throw Error(ErrorCode::InvalidArgument, "group weights must be >= 0");
      s += w;
    }
    if (std::abs(s - 1.0) > 1e-9) throw Error(ErrorCode::InvalidArgument, "group weights must sum to 1");
  }
  if (!poverty_line.empty() && poverty_line.size() != n_periods) {
    throw Error(ErrorCode::InvalidArgument, "poverty_line must have T entries");
  }
  if (rotation.kind == RotationKind::Window && rotation.window < 2) {
    throw Error(ErrorCode::InvalidArgument, "window length must be >= 2");
  }
  if (rotation.kind == RotationKind::RandomMask && !(rotation.p_obs > 0.0 && rotation.p_obs <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "p_obs must be in (0, 1]");
  }
}

namespace {

int draw_group(Rng& rng, const std::vector<double>& weights, int n_groups) {
  if (weights.empty()) return static_cast<int>(rng.below(static_cast<std::uint64_t>(n_groups)));
  const double u = rng.uniform();
  double c = 0.0;
  for (int g = 0; g < n_groups; ++g) {
    c += weights[static_cast<std::size_t>(g)];
    if (u < c) return g;
  }
  return n_groups - 1;
}

void draw_mask(Rng& rng, const DgpSpec& spec, std::uint8_t* row) {
  const std::size_t T = spec.n_periods;
  switch (spec.rotation.kind) {
    case RotationKind::Full:
      if (T < 2) throw Error(ErrorCode::InfeasibleRotation, "full observation with T < 2");
      std::fill(row, row + T, 1);
      return;
    case RotationKind::Window: {
      const auto w = static_cast<std::size_t>(spec.rotation.window);
      if (w > T) {
        throw Error(ErrorCode::InfeasibleRotation,
                    "window " + std::to_string(w) + " longer than T=" + std::to_string(T));
      }
      const auto entry = static_cast<std::size_t>(rng.below(T - w + 1));
      std::fill(row, row + T, 0);
      std::fill(row + entry, row + entry + w, 1);
      return;
    }
    case RotationKind::RandomMask:
      for (int attempt = 0; attempt < 1000; ++attempt) {
        std::size_t count = 0;
        for (std::size_t t = 0; t < T; ++t) {
          row[t] = rng.uniform() < spec.rotation.p_obs ? 1 : 0;
          count += row[t];
        }
        if (count >= 2) return;
      }
      throw Error(ErrorCode::InfeasibleRotation, "no mask with two observed periods in 1000 draws");
  }
}

}  // namespace

Simulated generate(const DgpSpec& spec) {
  spec.check();
  const std::size_t N = spec.n_units;
  const std::size_t T = spec.n_periods;
  const std::size_t K = spec.n_covariates;

  Rng rng(spec.seed);
  RawPanel raw = RawPanel::allocate(N, T, K);
  for (std::size_t t = 0; t < T; ++t) raw.period_ids[t] = spec.first_period + static_cast<std::int64_t>(t);
  for (std::size_t k = 0; k < K; ++k) raw.covariate_names[k] = "x" + std::to_string(k + 1);
  for (std::size_t p = 0; p < spec.n_locations; ++p) raw.location_labels.push_back(std::to_string(p + 1));

  Simulated out;
  out.truth.gamma = GroupAssignment::constant(N, spec.n_groups);
  out.truth.params = ModelParams::zeros(spec.n_groups, T, K, spec.n_locations, 0);
  out.truth.params.theta = spec.theta;
  out.truth.params.mu = spec.mu;
  for (int g = 0; g < spec.n_groups; ++g) {
    for (std::size_t t = 0; t < T; ++t) out.truth.params.set_alpha(g, t, spec.alpha(g, static_cast<Eigen::Index>(t)));
  }

  for (std::size_t i = 0; i < N; ++i) {
    raw.unit_ids[i] = "u" + std::to_string(i + 1);
    const int g = draw_group(rng, spec.group_weights, spec.n_groups);
    const int p = static_cast<int>(rng.below(spec.n_locations));
    const double w = spec.weight_sd > 0.0 ? std::exp(spec.weight_sd * rng.normal()) : 1.0;
    out.truth.gamma.group[i] = g;
    draw_mask(rng, spec, raw.mask.data() + i * T);

    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t c = raw.cell(i, t);
      double xb = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        const double x = spec.covariate ? spec.covariate(rng, i, t, k) : rng.normal();
        raw.covariates[c * K + k] = x;
        xb += x * spec.theta(static_cast<Eigen::Index>(k));
      }
      const double eps = spec.noise_sd * rng.normal();
      raw.location[c] = p;
      raw.weight[c] = w;
      raw.poverty_line[c] = spec.poverty_line.empty() ? 0.0 : spec.poverty_line[t];
      raw.outcome[c] = xb + spec.alpha(g, static_cast<Eigen::Index>(t)) + spec.mu(p) + eps;
    }
  }
  out.data = validate_dataset(raw);
  return out;
}

double separation(const Eigen::MatrixXd& alpha, double sigma) {
  if (sigma == 0.0) return std::numeric_limits<double>::infinity();
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index a = 0; a < alpha.rows(); ++a) {
    for (Eigen::Index b = a + 1; b < alpha.rows(); ++b) {
      const double rms = std::sqrt((alpha.row(a) - alpha.row(b)).squaredNorm() / static_cast<double>(alpha.cols()));
      best = std::min(best, rms);
    }
  }
  return best / sigma;
}

DgpSpec make_spec(std::size_t n_units, std::size_t n_periods, int n_groups, std::size_t n_covariates,
                  std::size_t n_locations, double gap, double noise_sd, Rotation rotation, std::uint64_t seed) {
  DgpSpec spec;
  spec.n_units = n_units;
  spec.n_periods = n_periods;
  spec.n_groups = n_groups;
  spec.n_covariates = n_covariates;
  spec.n_locations = n_locations;
  spec.theta.resize(static_cast<Eigen::Index>(n_covariates));
  for (std::size_t k = 0; k < n_covariates; ++k) spec.theta(static_cast<Eigen::Index>(k)) = 1.0 / static_cast<double>(k + 1);
  spec.alpha.resize(n_groups, static_cast<Eigen::Index>(n_periods));
  for (int g = 0; g < n_groups; ++g) {
    for (std::size_t t = 0; t < n_periods; ++t) {
      spec.alpha(g, static_cast<Eigen::Index>(t)) = 2.0 + 0.05 * static_cast<double>(t) + gap * g;
    }
  }
  spec.mu.resize(static_cast<Eigen::Index>(n_locations));
  for (std::size_t p = 0; p < n_locations; ++p) spec.mu(static_cast<Eigen::Index>(p)) = 0.5 * static_cast<double>(p);
  spec.noise_sd = noise_sd;
  spec.rotation = rotation;
  spec.poverty_line.assign(n_periods, 2.0 + gap * 0.5 * (n_groups - 1));
  spec.seed = seed;
  return spec;
}

}  // namespace gfe
