#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "gfe/panel.hpp"
#include "oracles.hpp"

using namespace gfe;
using oracle::Cell;

namespace {

ErrorCode first_rule(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ValidationError& e) {
    return e.violations().front().rule;
  }
  ADD_FAILURE() << "no ValidationError";
  return ErrorCode::InvalidArgument;
}

// The N=2, T=2, K=1 hand instance; residuals are 0.5, 0.5, 0.2, -0.3.
struct HandInstance {
  PanelDataset data;
  ModelParams params;
  GroupAssignment gamma;

  HandInstance() {
    data = oracle::panel(2, {2007, 2008}, 1,
                         {{0, 0, 2.0, {1.0}, 0}, {0, 1, 3.5, {2.0}, 0}, {1, 0, 0.0, {-1.0}, 1}, {1, 1, 1.0, {4.0}, 1}},
                         2);
    params = ModelParams::zeros(2, 2, 1, 2, 0);
    params.theta << 0.5;
    params.set_alpha(0, 0, 1.0);
    params.set_alpha(0, 1, 2.0);
    params.set_alpha(1, 0, 0.0);
    params.set_alpha(1, 1, -1.0);
    params.mu << 0.0, 0.3;
    gamma = GroupAssignment{2, {0, 1}};
  }
};

}  // namespace

TEST(Validate, SingleObservationUnitAccepted) {
  const auto d = oracle::panel(1, {2010}, 0, {{0, 0, 1.5}});
  EXPECT_EQ(d.n_units(), 1u);
  EXPECT_EQ(d.n_observed(), 1u);
  EXPECT_DOUBLE_EQ(d.outcome(0, 0), 1.5);
}

TEST(Validate, LocationDriftNamesUnit) {
  auto raw = RawPanel::allocate(1, 3, 0);
  raw.unit_ids = {"hh42"};
  raw.period_ids = {2007, 2008, 2009};
  raw.location_labels = {"1", "2", "3", "4", "5"};
  for (std::size_t t : {0u, 2u}) {
    raw.mask[t] = 1;
    raw.outcome[t] = 1.0;
    raw.weight[t] = 1.0;
    raw.poverty_line[t] = 0.0;
  }
  raw.location[0] = 3;
  raw.location[2] = 4;
  try {
    validate_dataset(raw);
    FAIL();
  } catch (const ValidationError& e) {
    ASSERT_EQ(e.violations().size(), 1u);
    EXPECT_EQ(e.violations()[0].rule, ErrorCode::LocationDrift);
    EXPECT_EQ(e.violations()[0].unit_id, "hh42");
    EXPECT_EQ(e.violations()[0].period, 2009);
  }
}

TEST(Validate, EmptyUnit) {
  auto raw = RawPanel::allocate(2, 2, 0);
  raw.unit_ids = {"a", "b"};
  raw.period_ids = {1, 2};
  raw.mask[0] = 1;
  raw.outcome[0] = 1.0;
  raw.weight[0] = 1.0;
  raw.poverty_line[0] = 0.0;
  raw.location[0] = 0;
  EXPECT_EQ(first_rule([&] { validate_dataset(raw); }), ErrorCode::EmptyUnit);
}

TEST(Validate, NonFiniteAndNegativeWeight) {
  auto make = [](double y, double w) {
    auto raw = RawPanel::allocate(1, 1, 0);
    raw.unit_ids = {"a"};
    raw.period_ids = {1};
    raw.mask[0] = 1;
    raw.outcome[0] = y;
    raw.weight[0] = w;
    raw.poverty_line[0] = 0.0;
    raw.location[0] = 0;
    return raw;
  };
  EXPECT_EQ(first_rule([&] { validate_dataset(make(std::nan(""), 1.0)); }), ErrorCode::NonFinite);
  EXPECT_EQ(first_rule([&] { validate_dataset(make(1.0, -1.0)); }), ErrorCode::NegativeWeight);
}

TEST(Validate, ReportsEveryViolation) {
  auto raw = RawPanel::allocate(3, 1, 0);
  raw.unit_ids = {"a", "b", "c"};
  raw.period_ids = {1};
  try {
    validate_dataset(raw);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.violations().size(), 3u);
  }
}

TEST(Validate, PeriodsMustIncrease) {
  auto raw = RawPanel::allocate(1, 2, 0);
  raw.unit_ids = {"a"};
  raw.period_ids = {2009, 2007};
  EXPECT_THROW(validate_dataset(raw), Error);
}

TEST(Validate, NonContiguousPeriodsIndexedByPosition) {
  const auto d = oracle::panel(1, {2007, 2009, 2012}, 0, {{0, 0, 1.0}, {0, 2, 3.0}});
  ASSERT_EQ(d.observed_periods(0).size(), 2u);
  EXPECT_EQ(d.observed_periods(0)[1], 2);
  EXPECT_EQ(d.period_ids()[2], 2012);
}

TEST(Panel, WithMaskRemovesCellsOnly) {
  const auto d = oracle::panel(2, {1, 2}, 0, {{0, 0, 1.0}, {0, 1, 2.0}, {1, 0, 3.0}});
  std::vector<std::uint8_t> m(d.mask().begin(), d.mask().end());
  m[1] = 0;
  const auto narrowed = d.with_mask(m);
  EXPECT_EQ(narrowed.n_observed(), 2u);
  m[1] = 1;
  m[3] = 1;  // adds a cell
  EXPECT_THROW(d.with_mask(m), Error);
  std::vector<std::uint8_t> empty(4, 0);
  empty[0] = 1;
  EXPECT_EQ(first_rule([&] { d.with_mask(empty); }), ErrorCode::EmptyUnit);
}

TEST(Panel, SelectUnitsAndRawRoundTrip) {
  const HandInstance h;
  const std::vector<std::size_t> pick = {1};
  const auto one = h.data.select_units(pick);
  EXPECT_EQ(one.unit_ids()[0], "h2");
  EXPECT_DOUBLE_EQ(one.outcome(0, 1), 1.0);
  const auto back = validate_dataset(h.data.to_raw());
  EXPECT_EQ(back.n_observed(), h.data.n_observed());
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t t = 0; t < 2; ++t) EXPECT_EQ(back.outcome(i, t), h.data.outcome(i, t));
  }
}

TEST(Objective, SingleResidual) {
  const auto d = oracle::panel(1, {1}, 0, {{0, 0, 2.0}});
  const auto p = ModelParams::zeros(1, 1, 0, 1);
  EXPECT_DOUBLE_EQ(objective(d, p, GroupAssignment::constant(1, 1)), 4.0);
}

TEST(Objective, MaskedCellContributesNothing) {
  // Same residual of 2 at period 1, but the cell is unobserved.
  const auto d = oracle::panel(1, {1, 2}, 0, {{0, 1, 0.0}});
  const auto p = ModelParams::zeros(1, 2, 0, 1);
  EXPECT_DOUBLE_EQ(objective(d, p, GroupAssignment::constant(1, 1)), 0.0);
}

TEST(Objective, HandSummedResiduals) {
  const HandInstance h;
  EXPECT_NEAR(objective(h.data, h.params, h.gamma), 0.25 + 0.25 + 0.04 + 0.09, 1e-14);
}

TEST(Objective, LabelPermutationInvariant) {
  const HandInstance h;
  ModelParams swapped = h.params;
  swapped.alpha.row(0) = h.params.alpha.row(1);
  swapped.alpha.row(1) = h.params.alpha.row(0);
  const GroupAssignment g{2, {1, 0}};
  EXPECT_EQ(objective(h.data, swapped, g), objective(h.data, h.params, h.gamma));
}

TEST(Objective, UnobservedCellValuesIgnored) {
  const HandInstance h;
  auto raw = h.data.to_raw();
  // grow to three periods; the new period is never observed and holds garbage
  auto big = RawPanel::allocate(2, 3, 1);
  big.unit_ids = raw.unit_ids;
  big.period_ids = {2007, 2008, 2010};
  big.covariate_names = raw.covariate_names;
  big.location_labels = raw.location_labels;
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t t = 0; t < 2; ++t) {
      const auto a = raw.cell(i, t), b = big.cell(i, t);
      big.mask[b] = raw.mask[a];
      big.outcome[b] = raw.outcome[a];
      big.weight[b] = raw.weight[a];
      big.poverty_line[b] = raw.poverty_line[a];
      big.location[b] = raw.location[a];
      big.covariates[b] = raw.covariates[a];
    }
    big.outcome[big.cell(i, 2)] = 1e6;
  }
  const auto d = validate_dataset(big);
  auto p = ModelParams::zeros(2, 3, 1, 2);
  p.theta = h.params.theta;
  p.mu = h.params.mu;
  for (int g = 0; g < 2; ++g) {
    for (std::size_t t = 0; t < 2; ++t) p.set_alpha(g, t, h.params.alpha(g, static_cast<Eigen::Index>(t)));
  }
  EXPECT_EQ(objective(d, p, h.gamma), objective(h.data, h.params, h.gamma));
}

TEST(Objective, ZeroIffAllResidualsZero) {
  const HandInstance h;
  EXPECT_GT(objective(h.data, h.params, h.gamma), 0.0);
  auto exact = h.data.to_raw();
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t t = 0; t < 2; ++t) {
      const auto c = exact.cell(i, t);
      exact.outcome[c] = h.params.common_part({&exact.covariates[c], 1}, exact.location[c]) +
                         h.params.alpha(h.gamma.group[i], static_cast<Eigen::Index>(t));
    }
  }
  EXPECT_EQ(objective(validate_dataset(exact), h.params, h.gamma), 0.0);
}

TEST(Objective, UndefinedAlphaThrows) {
  HandInstance h;
  h.params.clear_alpha(1, 1);
  try {
    objective(h.data, h.params, h.gamma);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UndefinedAlpha);
  }
}
