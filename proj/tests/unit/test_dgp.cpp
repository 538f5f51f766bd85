#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <limits>

#include "gfe/dgp.hpp"
#include "gfe/ols.hpp"

using namespace gfe;

TEST(Generate, NoiselessFullObservationHasZeroObjective) {
  const auto sim = generate(make_spec(50, 6, 3, 3, 4, 1.0, 0.0, Rotation::full(), 2));
  EXPECT_EQ(sim.data.n_observed(), 300u);
  EXPECT_LT(objective(sim.data, sim.truth.params, sim.truth.gamma), 1e-24);
}

TEST(Generate, WindowRotationGivesConsecutiveRuns) {
  const auto sim = generate(make_spec(300, 10, 2, 1, 2, 1.0, 1.0, Rotation::rolling(3), 3));
  std::vector<int> entries(8, 0);
  for (std::size_t i = 0; i < 300; ++i) {
    const auto obs = sim.data.observed_periods(i);
    ASSERT_EQ(obs.size(), 3u);
    EXPECT_EQ(obs[1], obs[0] + 1);
    EXPECT_EQ(obs[2], obs[0] + 2);
    ++entries[static_cast<std::size_t>(obs[0])];
  }
  for (int e : entries) EXPECT_GT(e, 15);  // staggered entry over all 8 start periods
}

TEST(Generate, SameSeedSameBits) {
  const auto spec = make_spec(80, 7, 3, 2, 3, 1.0, 1.0, Rotation::random_mask(0.4), 17);
  const auto a = generate(spec).data.to_raw();
  const auto b = generate(spec).data.to_raw();
  EXPECT_EQ(a.mask, b.mask);
  EXPECT_EQ(std::memcmp(a.outcome.data(), b.outcome.data(), a.outcome.size() * sizeof(double)), 0);
  EXPECT_EQ(std::memcmp(a.covariates.data(), b.covariates.data(), a.covariates.size() * sizeof(double)), 0);
  auto other = spec;
  other.seed = 18;
  EXPECT_NE(generate(other).data.to_raw().mask, a.mask);
}

TEST(Generate, RandomMaskKeepsTwoObservations) {
  const auto sim = generate(make_spec(400, 5, 2, 1, 1, 1.0, 1.0, Rotation::random_mask(0.2), 4));
  for (std::size_t i = 0; i < 400; ++i) EXPECT_GE(sim.data.observed_periods(i).size(), 2u);
}

TEST(Generate, InfeasibleRotation) {
  auto spec = make_spec(10, 3, 2, 1, 1, 1.0, 1.0, Rotation::rolling(4), 1);
  try {
    generate(spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InfeasibleRotation);
  }
  spec = make_spec(10, 1, 2, 1, 1, 1.0, 1.0, Rotation::random_mask(0.9), 1);
  try {
    generate(spec);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InfeasibleRotation);
  }
  spec = make_spec(10, 5, 2, 1, 1, 1.0, 1.0, Rotation::rolling(1), 1);
  EXPECT_THROW(generate(spec), Error);
}

TEST(Generate, NoiseVarianceNearSigmaSquared) {
  const double sigma = 1.5;
  const auto sim = generate(make_spec(4000, 10, 3, 2, 5, 1.0, sigma, Rotation::full(), 9));
  double ss = 0.0;
  for (const auto& r : residuals(sim.data, sim.truth.params, sim.truth.gamma)) ss += r.value * r.value;
  const double var = ss / static_cast<double>(sim.data.n_observed());
  EXPECT_NEAR(var, sigma * sigma, 0.05 * sigma * sigma);
}

TEST(Generate, GroupWeightsRespected) {
  auto spec = make_spec(5000, 3, 2, 1, 1, 1.0, 1.0, Rotation::full(), 6);
  spec.group_weights = {0.8, 0.2};
  const auto sim = generate(spec);
  const double share = std::count(sim.truth.gamma.group.begin(), sim.truth.gamma.group.end(), 0) / 5000.0;
  EXPECT_NEAR(share, 0.8, 0.03);
}

TEST(Separation, Examples) {
  Eigen::MatrixXd same(2, 4);
  same << 1, 2, 3, 4, 1, 2, 3, 4;
  EXPECT_EQ(separation(same, 1.0), 0.0);
  Eigen::MatrixXd shifted(2, 4);
  shifted << 1, 2, 3, 4, 4, 5, 6, 7;
  EXPECT_NEAR(separation(shifted, 1.0), 3.0, 1e-15);
  EXPECT_EQ(separation(shifted, 0.0), std::numeric_limits<double>::infinity());
  Eigen::MatrixXd three(3, 2);
  three << 0, 0, 2, 2, 5, 5;
  EXPECT_NEAR(separation(three, 0.5), 4.0, 1e-15);
}
