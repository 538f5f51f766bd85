#pragma once

// Simulated rotating panels with known groups, for testing the estimator end to end.

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "gfe/panel.hpp"
#include "gfe/rng.hpp"

namespace gfe {

enum class RotationKind { Window, RandomMask, Full };

struct Rotation {
  RotationKind kind = RotationKind::Full;
  int window = 4;        // Window: consecutive periods per unit, entry staggered uniformly
  double p_obs = 0.5;    // RandomMask: independent observation probability

  static Rotation full() { return {RotationKind::Full, 0, 1.0}; }
  static Rotation rolling(int w) { return {RotationKind::Window, w, 1.0}; }
  static Rotation random_mask(double p) { return {RotationKind::RandomMask, 0, p}; }
};

struct DgpSpec {
  std::size_t n_units = 100;
  std::size_t n_periods = 6;
  int n_groups = 2;
  std::size_t n_covariates = 1;
  std::size_t n_locations = 1;

  Eigen::VectorXd theta;   // K
  Eigen::MatrixXd alpha;   // G x T
  Eigen::VectorXd mu;      // L, mu[0] == 0 (location 0 is the reference)
  double noise_sd = 1.0;
  Rotation rotation;
  std::vector<double> group_weights;  // empty means equal

  // Covariate law. Standard normal when unset; otherwise called as (rng, i, t, k).
  std::function<double(Rng&, std::size_t, std::size_t, std::size_t)> covariate;
  // Weights are 1 when weight_sd == 0, else exp(weight_sd * N(0,1)), drawn once per unit.
  double weight_sd = 0.0;
  std::vector<double> poverty_line;  // per period; zeros when empty
  std::int64_t first_period = 1;
  std::uint64_t seed = 1;

  void check() const;
};

struct DgpTruth {
  GroupAssignment gamma;
  ModelParams params;
};

struct Simulated {
  PanelDataset data;
  DgpTruth truth;
};

/// Draws groups, locations, covariates, noise and the observation mask.
/// Masks leaving a unit with fewer than two observations are redrawn; throws
/// InfeasibleRotation after 1000 failed draws for one unit.
Simulated generate(const DgpSpec& spec);

/// Min over group pairs of the RMS gap between alpha rows, divided by sigma.
/// Infinity when sigma == 0.
double separation(const Eigen::MatrixXd& alpha, double sigma);

/// Convenience spec: G groups whose paths are a common trend plus level
/// offsets `gap` apart, K covariates with theta_k = 1 / (k + 1), L locations
/// with mu_p = 0.5 * p.
DgpSpec make_spec(std::size_t n_units, std::size_t n_periods, int n_groups, std::size_t n_covariates,
                  std::size_t n_locations, double gap, double noise_sd, Rotation rotation, std::uint64_t seed);

}  // namespace gfe
