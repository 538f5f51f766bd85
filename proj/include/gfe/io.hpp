#pragma once

// Panel CSV ingestion and export, run configuration, fit serialization.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "gfe/panel.hpp"
#include "gfe/poverty.hpp"
#include "gfe/search.hpp"

namespace gfe {

/// Inverse hyperbolic sine, ln(x + sqrt(x^2 + 1)).
double ihs(double x);

struct CovariateColumn {
  std::string name;
  CompletionRule completion = CompletionRule::None;
  std::vector<std::string> sets;  // labels such as "spec1", "spec2"
};

struct ColumnMap {
  std::string unit = "unit";
  std::string period = "period";
  std::string outcome = "y";
  std::string weight = "weight";      // empty: every weight is 1
  std::string location = "location";  // empty: a single location
  std::string poverty_line = "z";     // empty: line 0
  std::vector<CovariateColumn> covariates;
};

/// Keeps a unit only if `column` lies in [min, max] on the unit's first usable row.
struct RangeFilter {
  std::string column;
  double min = -1e300;
  double max = 1e300;
};

struct RunConfig {
  std::string input;
  ColumnMap columns;
  std::string covariate_set;  // empty: every mapped covariate
  bool apply_ihs = false;
  int min_rounds = 2;
  std::vector<RangeFilter> ranges;

  FitConfig fit;
  int fine_starts = 10;
  int shortlist = 6;
  std::vector<int> g_grid = {1, 2, 3, 4, 5, 6};
  int holdout_years = 1;
  int chronic_k = 3;
  std::string output_dir = "out";

  void check() const;
  /// Covariate columns selected by covariate_set, in map order.
  std::vector<CovariateColumn> active_covariates() const;
};

RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);
nlohmann::json to_json(const RunConfig& config);

CompletionRule completion_rule_from_string(const std::string& s);

struct IngestionReport {
  std::size_t rows_read = 0;
  std::size_t rows_missing = 0;  // rows with an empty or NA field, left unobserved
  std::map<std::string, std::size_t> units_dropped;  // per filter
  std::size_t units_kept = 0;
  std::size_t rows_kept = 0;

  nlohmann::json to_json() const;
};

struct Ingested {
  PanelDataset data;
  IngestionReport report;
};

/// Long-format CSV (one row per observed unit-period) to a validated panel.
/// Missing values mark the cell unobserved. Throws ParseError (with record
/// and column) and FilterEliminatedAll.
Ingested ingest(const RunConfig& config);
Ingested ingest_csv(std::istream& in, const RunConfig& config);

/// Observed cells in long format with the default column names
/// (unit, period, y, weight, location, z, covariates...).
void export_panel_csv(const PanelDataset& data, std::ostream& out);
void export_panel_csv(const PanelDataset& data, const std::string& path);

/// Column map matching export_panel_csv for this panel's covariates.
ColumnMap default_columns(const PanelDataset& data, CompletionRule completion = CompletionRule::TimeInvariant);

/// Deterministic JSON (no timestamps). Group labels are 1-based.
nlohmann::json fit_to_json(const FitResult& fit, const PanelDataset& data);
/// Inverse of fit_to_json against the same panel (units and periods matched by id).
FitResult fit_from_json(const nlohmann::json& j, const PanelDataset& data);

void write_text(const std::string& path, const std::string& text);

}  // namespace gfe
