#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "gfe/csv.hpp"
#include "gfe/dgp.hpp"
#include "gfe/io.hpp"

using namespace gfe;

namespace {

RunConfig config_for(const PanelDataset& d) {
  RunConfig c;
  c.columns = default_columns(d);
  return c;
}

Ingested ingest_text(const std::string& text, const RunConfig& c) {
  std::istringstream in(text);
  return ingest_csv(in, c);
}

}  // namespace

TEST(Ihs, ClosedForm) {
  EXPECT_EQ(ihs(0.0), 0.0);
  EXPECT_NEAR(ihs(1.0), std::log(1.0 + std::sqrt(2.0)), 1e-15);
  EXPECT_NEAR(ihs(1.0), 0.881374, 1e-6);
}

TEST(Csv, QuotedFieldsRoundTrip) {
  csv::Table t;
  t.header = {"a", "b,c", "d"};
  t.rows = {{"x \"quoted\"", "line\nbreak", ""}, {"1", "2", "3"}};
  std::ostringstream out;
  csv::Writer w(out);
  w.row(t.header);
  for (const auto& r : t.rows) w.row(r);
  std::istringstream in(out.str());
  const auto back = csv::read(in);
  EXPECT_EQ(back.header, t.header);
  EXPECT_EQ(back.rows, t.rows);
}

TEST(Csv, CrLfAndErrors) {
  std::istringstream crlf("a,b\r\n1,2\r\n");
  const auto t = csv::read(crlf);
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0][1], "2");
  std::istringstream ragged("a,b\n1\n");
  EXPECT_THROW(csv::read(ragged), Error);
  std::istringstream open("a\n\"never closed\n");
  EXPECT_THROW(csv::read(open), Error);
}

TEST(Csv, DoublesSurviveText) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 123456789.123456789}) {
    EXPECT_EQ(std::stod(csv::format_double(v)), v);
  }
}

TEST(Ingest, ExportRoundTripIsExact) {
  auto spec = make_spec(60, 7, 3, 2, 4, 1.0, 1.0, Rotation::random_mask(0.5), 3);
  spec.weight_sd = 0.5;
  const auto sim = generate(spec);
  std::ostringstream out;
  export_panel_csv(sim.data, out);
  const auto back = ingest_text(out.str(), config_for(sim.data)).data;
  const auto a = sim.data.to_raw();
  const auto b = back.to_raw();
  EXPECT_EQ(a.unit_ids, b.unit_ids);
  EXPECT_EQ(a.period_ids, b.period_ids);
  EXPECT_EQ(a.location_labels, b.location_labels);
  EXPECT_EQ(a.mask, b.mask);
  for (std::size_t c = 0; c < a.mask.size(); ++c) {
    if (!a.mask[c]) continue;
    EXPECT_EQ(a.outcome[c], b.outcome[c]);
    EXPECT_EQ(a.weight[c], b.weight[c]);
    EXPECT_EQ(a.location[c], b.location[c]);
  }
}

TEST(Ingest, MinRoundsDropsAreReported) {
  const std::string text =
      "unit,period,y,weight,location,z\n"
      "a,2010,1,1,1,0\na,2011,2,1,1,0\n"
      "b,2010,1,1,1,0\nb,2011,2,1,1,0\nb,2012,3,1,1,0\n";
  RunConfig c;
  c.min_rounds = 3;
  const auto in = ingest_text(text, c);
  EXPECT_EQ(in.data.n_units(), 1u);
  EXPECT_EQ(in.data.unit_ids()[0], "b");
  EXPECT_EQ(in.report.units_dropped.at("min_rounds"), 1u);
  EXPECT_EQ(in.report.rows_read, 5u);
  EXPECT_EQ(in.report.rows_kept, 3u);
  c.min_rounds = 4;
  try {
    ingest_text(text, c);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::FilterEliminatedAll);
  }
  c.min_rounds = 1;
  EXPECT_THROW(ingest_text(text, c), Error);
}

TEST(Ingest, MissingValuesLeaveCellsUnobserved) {
  const std::string text =
      "unit,period,y,weight,location,z\n"
      "a,1,1,1,1,0\na,2,NA,1,1,0\na,3,2,1,1,0\n"
      "b,1,1,1,1,0\nb,2,,1,1,0\nb,4,3,1,1,0\n"
      "c,2,4,1,1,0\nc,3,5,1,1,0\n";
  const auto in = ingest_text(text, RunConfig{});
  EXPECT_EQ(in.report.rows_missing, 2u);
  EXPECT_EQ(in.data.period_ids(), (std::vector<std::int64_t>{1, 2, 3, 4}));
  EXPECT_FALSE(in.data.observed(0, 1));
  EXPECT_FALSE(in.data.observed(1, 1));
  EXPECT_TRUE(in.data.observed(2, 1));
}

TEST(Ingest, ParseErrorsNameRecordAndColumn) {
  try {
    ingest_text("unit,period,y,weight,location,z\na,1,1,1,1,0\na,2,abc,1,1,0\n", RunConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("record 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("'y'"), std::string::npos);
  }
  EXPECT_THROW(ingest_text("unit,period,y\na,1,1\n", RunConfig{}), Error);  // unmapped weight column
  EXPECT_THROW(ingest_text("unit,period,y,weight,location,z\na,1,1,1,1,0\na,1,2,1,1,0\n", RunConfig{}), Error);
}

TEST(Ingest, IhsAndRangeFilters) {
  const std::string text =
      "unit,period,y,weight,location,z,age\n"
      "a,1,1,1,1,1,30\na,2,0,1,1,1,31\n"
      "b,1,5,1,1,1,60\nb,2,5,1,1,1,61\n";
  RunConfig c;
  c.apply_ihs = true;
  c.ranges = {{"age", 25, 55}};
  const auto in = ingest_text(text, c);
  ASSERT_EQ(in.data.n_units(), 1u);
  EXPECT_DOUBLE_EQ(in.data.outcome(0, 0), ihs(1.0));
  EXPECT_DOUBLE_EQ(in.data.outcome(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(in.data.poverty_line(0, 0), ihs(1.0));
  EXPECT_EQ(in.report.units_dropped.at("range:age"), 1u);
  EXPECT_EQ(in.data.n_covariates(), 0u);
}

TEST(Ingest, CovariateSetsSelectColumns) {
  const std::string text =
      "unit,period,y,weight,location,z,x1,x2\n"
      "a,1,1,1,1,1,3,4\na,2,0,1,1,1,3,5\n";
  RunConfig c;
  c.columns.covariates = {{"x1", CompletionRule::TimeInvariant, {"spec1", "spec2"}},
                          {"x2", CompletionRule::Age, {"spec2"}}};
  c.covariate_set = "spec1";
  EXPECT_EQ(ingest_text(text, c).data.covariate_names(), (std::vector<std::string>{"x1"}));
  c.covariate_set = "spec2";
  EXPECT_EQ(ingest_text(text, c).data.n_covariates(), 2u);
}

TEST(RunConfigJson, RoundTrip) {
  RunConfig c;
  c.input = "panel.csv";
  c.columns.covariates = {{"age", CompletionRule::Age, {"spec1"}}};
  c.ranges = {{"age", 25, 55}};
  c.fit.n_starts = 7;
  c.g_grid = {2, 4};
  const auto back = run_config_from_json(to_json(c));
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
  EXPECT_EQ(back.columns.covariates[0].completion, CompletionRule::Age);
}

TEST(FitJson, RoundTripAndDeterministicText) {
  const auto sim = generate(make_spec(50, 6, 2, 2, 3, 2.0, 0.5, Rotation::rolling(3), 8));
  FitConfig c;
  c.n_groups = 2;
  const auto fit = multi_start_fit(sim.data, DesignSpec{}, c);
  const auto j = fit_to_json(fit, sim.data);
  EXPECT_EQ(j.dump(), fit_to_json(multi_start_fit(sim.data, DesignSpec{}, c), sim.data).dump());
  const auto back = fit_from_json(nlohmann::json::parse(j.dump()), sim.data);
  EXPECT_EQ(back.gamma.group, fit.gamma.group);
  EXPECT_EQ(back.params.theta, fit.params.theta);
  EXPECT_EQ(back.params.mu, fit.params.mu);
  EXPECT_EQ(back.params.alpha_defined, fit.params.alpha_defined);
  EXPECT_EQ(objective(sim.data, back.params, back.gamma), objective(sim.data, fit.params, fit.gamma));
  EXPECT_EQ(j.at("assignment")[0].at("group").get<int>(), fit.gamma.group[0] + 1);
}
