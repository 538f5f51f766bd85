#include "gfe/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "gfe/csv.hpp"

namespace gfe {

using nlohmann::json;

double ihs(double x) { return std::asinh(x); }

// ---------------------------------------------------------------------------
// Run configuration

CompletionRule completion_rule_from_string(const std::string& s) {
  for (auto rule : {CompletionRule::None, CompletionRule::TimeInvariant, CompletionRule::Age,
                    CompletionRule::HoldFirst, CompletionRule::Interpolate}) {
    if (to_string(rule) == s) return rule;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown completion rule '" + s + "'");
}

void RunConfig::check() const {
  if (min_rounds < 2) throw Error(ErrorCode::InvalidArgument, "min_rounds must be >= 2");
  if (columns.unit.empty() || columns.period.empty() || columns.outcome.empty()) {
    throw Error(ErrorCode::InvalidArgument, "unit, period and outcome columns are required");
  }
  if (g_grid.empty()) throw Error(ErrorCode::InvalidArgument, "G grid is empty");
  for (int g : g_grid) {
    if (g < 1) throw Error(ErrorCode::InvalidArgument, "G grid entries must be >= 1");
  }
  if (fine_starts < 1 || shortlist < 1 || holdout_years < 1) {
    throw Error(ErrorCode::InvalidArgument, "fine_starts, shortlist and holdout_years must be >= 1");
  }
  fit.check();
}

std::vector<CovariateColumn> RunConfig::active_covariates() const {
  std::vector<CovariateColumn> out;
  for (const auto& c : columns.covariates) {
    if (covariate_set.empty() || std::find(c.sets.begin(), c.sets.end(), covariate_set) != c.sets.end()) {
      out.push_back(c);
    }
  }
  return out;
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  c.input = j.value("input", c.input);
  if (j.contains("columns")) {
    const auto& m = j.at("columns");
    c.columns.unit = m.value("unit", c.columns.unit);
    c.columns.period = m.value("period", c.columns.period);
    c.columns.outcome = m.value("outcome", c.columns.outcome);
    c.columns.weight = m.value("weight", c.columns.weight);
    c.columns.location = m.value("location", c.columns.location);
    c.columns.poverty_line = m.value("poverty_line", c.columns.poverty_line);
    for (const auto& cov : m.value("covariates", json::array())) {
      CovariateColumn col;
      if (cov.is_string()) {
        col.name = cov.get<std::string>();
      } else {
        col.name = cov.at("name").get<std::string>();
        col.completion = completion_rule_from_string(cov.value("completion", std::string("none")));
        col.sets = cov.value("sets", std::vector<std::string>{});
      }
      c.columns.covariates.push_back(std::move(col));
    }
  }
  c.covariate_set = j.value("covariate_set", c.covariate_set);
  c.apply_ihs = j.value("ihs", c.apply_ihs);
  c.min_rounds = j.value("min_rounds", c.min_rounds);
  for (const auto& r : j.value("range_filters", json::array())) {
    RangeFilter f;
    f.column = r.at("column").get<std::string>();
    f.min = r.value("min", f.min);
    f.max = r.value("max", f.max);
    c.ranges.push_back(f);
  }
  c.fit.n_groups = j.value("n_groups", c.fit.n_groups);
  c.fit.n_starts = j.value("n_starts", c.fit.n_starts);
  c.fit.itermax = j.value("itermax", c.fit.itermax);
  c.fit.neighmax = j.value("neighmax", c.fit.neighmax);
  c.fit.max_local_iters = j.value("max_local_iters", c.fit.max_local_iters);
  c.fit.base_seed = j.value("seed", c.fit.base_seed);
  c.fit.sse_rel_tol = j.value("sse_rel_tol", c.fit.sse_rel_tol);
  c.fine_starts = j.value("fine_starts", c.fine_starts);
  c.shortlist = j.value("shortlist", c.shortlist);
  c.g_grid = j.value("g_grid", c.g_grid);
  c.holdout_years = j.value("holdout_years", c.holdout_years);
  c.chronic_k = j.value("chronic_k", c.chronic_k);
  c.output_dir = j.value("output_dir", c.output_dir);
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  try {
    return run_config_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
}

json to_json(const RunConfig& c) {
  json covs = json::array();
  for (const auto& col : c.columns.covariates) {
    covs.push_back({{"name", col.name}, {"completion", std::string(to_string(col.completion))}, {"sets", col.sets}});
  }
  json ranges = json::array();
  for (const auto& f : c.ranges) ranges.push_back({{"column", f.column}, {"min", f.min}, {"max", f.max}});
  return {
      {"input", c.input},
      {"columns",
       {{"unit", c.columns.unit},
        {"period", c.columns.period},
        {"outcome", c.columns.outcome},
        {"weight", c.columns.weight},
        {"location", c.columns.location},
        {"poverty_line", c.columns.poverty_line},
        {"covariates", covs}}},
      {"covariate_set", c.covariate_set},
      {"ihs", c.apply_ihs},
      {"min_rounds", c.min_rounds},
      {"range_filters", ranges},
      {"n_groups", c.fit.n_groups},
      {"n_starts", c.fit.n_starts},
      {"itermax", c.fit.itermax},
      {"neighmax", c.fit.neighmax},
      {"max_local_iters", c.fit.max_local_iters},
      {"seed", c.fit.base_seed},
      {"sse_rel_tol", c.fit.sse_rel_tol},
      {"fine_starts", c.fine_starts},
      {"shortlist", c.shortlist},
      {"g_grid", c.g_grid},
      {"holdout_years", c.holdout_years},
      {"chronic_k", c.chronic_k},
      {"output_dir", c.output_dir},
  };
}

// ---------------------------------------------------------------------------
// Ingestion

json IngestionReport::to_json() const {
  return {{"rows_read", rows_read},
          {"rows_missing", rows_missing},
          {"units_dropped", units_dropped},
          {"units_kept", units_kept},
          {"rows_kept", rows_kept}};
}

namespace {

bool is_missing(const std::string& s) { return s.empty() || s == "NA" || s == "na" || s == "NaN" || s == "nan"; }

double parse_double(const std::string& s, std::size_t record, const std::string& column) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) {
    throw Error(ErrorCode::ParseError,
                "record " + std::to_string(record) + ", column '" + column + "': not a number: '" + s + "'");
  }
  return v;
}

std::int64_t parse_int(const std::string& s, std::size_t record, const std::string& column) {
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::ParseError,
                "record " + std::to_string(record) + ", column '" + column + "': not an integer: '" + s + "'");
  }
  return v;
}

struct Row {
  std::int64_t period;
  double y, w, z;
  std::string location;
  std::vector<double> x;
  bool usable;
  std::size_t record;
};

bool all_integers(const std::set<std::string>& labels) {
  for (const auto& s : labels) {
    std::int64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return false;
  }
  return true;
}

}  // namespace

Ingested ingest_csv(std::istream& in, const RunConfig& config) {
  config.check();
  const auto table = csv::read(in);
  const auto& cols = config.columns;
  const auto covs = config.active_covariates();

  auto need = [&](const std::string& name) {
    const int c = table.column(name);
    if (c < 0) throw Error(ErrorCode::ParseError, "missing column '" + name + "'");
    return c;
  };
  auto optional = [&](const std::string& name) { return name.empty() ? -1 : need(name); };
  const int c_unit = need(cols.unit);
  const int c_period = need(cols.period);
  const int c_y = need(cols.outcome);
  const int c_w = optional(cols.weight);
  const int c_loc = optional(cols.location);
  const int c_z = optional(cols.poverty_line);
  std::vector<int> c_x;
  for (const auto& cov : covs) c_x.push_back(need(cov.name));
  std::vector<int> c_range;
  for (const auto& f : config.ranges) c_range.push_back(need(f.column));

  Ingested out;
  auto& report = out.report;
  std::vector<std::string> unit_order;
  std::unordered_map<std::string, std::size_t> unit_index;
  std::vector<std::vector<Row>> rows_by_unit;
  std::vector<std::vector<double>> first_range;  // per unit, range-filter values at first usable row

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& f = table.rows[r];
    const std::size_t record = r + 2;
    ++report.rows_read;
    const std::string& unit = f[static_cast<std::size_t>(c_unit)];
    if (unit.empty()) throw Error(ErrorCode::ParseError, "record " + std::to_string(record) + ": empty unit id");
    auto [it, inserted] = unit_index.emplace(unit, unit_order.size());
    if (inserted) {
      unit_order.push_back(unit);
      rows_by_unit.emplace_back();
      first_range.emplace_back();
    }
    const std::size_t u = it->second;

    Row row{};
    row.record = record;
    row.period = parse_int(f[static_cast<std::size_t>(c_period)], record, cols.period);
    auto field = [&](int c) -> const std::string& { return f[static_cast<std::size_t>(c)]; };
    row.usable = !is_missing(field(c_y)) && (c_w < 0 || !is_missing(field(c_w))) &&
                 (c_loc < 0 || !field(c_loc).empty()) && (c_z < 0 || !is_missing(field(c_z)));
    for (int c : c_x) row.usable = row.usable && !is_missing(field(c));
    if (!row.usable) {
      ++report.rows_missing;
    } else {
      row.y = parse_double(field(c_y), record, cols.outcome);
      row.w = c_w < 0 ? 1.0 : parse_double(field(c_w), record, cols.weight);
      row.z = c_z < 0 ? 0.0 : parse_double(field(c_z), record, cols.poverty_line);
      row.location = c_loc < 0 ? "1" : field(c_loc);
      for (std::size_t k = 0; k < c_x.size(); ++k) row.x.push_back(parse_double(field(c_x[k]), record, covs[k].name));
      if (first_range[u].empty() && !c_range.empty()) {
        for (std::size_t q = 0; q < c_range.size(); ++q) {
          const auto& s = field(c_range[q]);
          first_range[u].push_back(is_missing(s) ? std::nan("") : parse_double(s, record, config.ranges[q].column));
        }
      }
    }
    for (const auto& prev : rows_by_unit[u]) {
      if (prev.period == row.period) {
        throw Error(ErrorCode::ParseError, "record " + std::to_string(record) + ": duplicate (unit, period) = (" +
                                               unit + ", " + std::to_string(row.period) + ")");
      }
    }
    rows_by_unit[u].push_back(std::move(row));
  }

  // Unit filters: range filters first, then minimum observed rounds.
  std::vector<std::size_t> kept;
  for (std::size_t u = 0; u < unit_order.size(); ++u) {
    bool keep = true;
    for (std::size_t q = 0; q < config.ranges.size() && keep; ++q) {
      const auto& f = config.ranges[q];
      const double v = first_range[u].empty() ? std::nan("") : first_range[u][q];
      if (!(v >= f.min && v <= f.max)) {
        ++report.units_dropped["range:" + f.column];
        keep = false;
      }
    }
    if (!keep) continue;
    const auto usable = static_cast<std::size_t>(
        std::count_if(rows_by_unit[u].begin(), rows_by_unit[u].end(), [](const Row& r) { return r.usable; }));
    if (usable < static_cast<std::size_t>(config.min_rounds)) {
      ++report.units_dropped["min_rounds"];
      continue;
    }
    kept.push_back(u);
  }
  if (kept.empty()) throw Error(ErrorCode::FilterEliminatedAll, "no unit survives the sample filters");

  std::set<std::int64_t> periods;
  std::set<std::string> labels;
  for (std::size_t u : kept) {
    for (const auto& r : rows_by_unit[u]) {
      if (!r.usable) continue;
      periods.insert(r.period);
      labels.insert(r.location);
    }
  }
  std::vector<std::string> label_order(labels.begin(), labels.end());
  if (all_integers(labels)) {
    std::sort(label_order.begin(), label_order.end(), [](const std::string& a, const std::string& b) {
      return std::stoll(a) < std::stoll(b);
    });
  }
  std::unordered_map<std::string, int> label_index;
  for (std::size_t p = 0; p < label_order.size(); ++p) label_index[label_order[p]] = static_cast<int>(p);
  const std::vector<std::int64_t> period_ids(periods.begin(), periods.end());

  RawPanel raw = RawPanel::allocate(kept.size(), period_ids.size(), covs.size());
  raw.period_ids = period_ids;
  raw.location_labels = label_order;
  for (std::size_t k = 0; k < covs.size(); ++k) raw.covariate_names[k] = covs[k].name;
  const std::size_t K = covs.size();
  for (std::size_t i = 0; i < kept.size(); ++i) {
    raw.unit_ids[i] = unit_order[kept[i]];
    for (const auto& r : rows_by_unit[kept[i]]) {
      if (!r.usable) continue;
      const auto t = static_cast<std::size_t>(
          std::lower_bound(period_ids.begin(), period_ids.end(), r.period) - period_ids.begin());
      const std::size_t c = raw.cell(i, t);
      raw.mask[c] = 1;
      raw.outcome[c] = config.apply_ihs ? ihs(r.y) : r.y;
      raw.poverty_line[c] = config.apply_ihs ? ihs(r.z) : r.z;
      raw.weight[c] = r.w;
      raw.location[c] = label_index.at(r.location);
      std::copy(r.x.begin(), r.x.end(), raw.covariates.begin() + static_cast<std::ptrdiff_t>(c * K));
      ++report.rows_kept;
    }
  }
  report.units_kept = kept.size();
  out.data = validate_dataset(raw);
  return out;
}

Ingested ingest(const RunConfig& config) {
  std::ifstream in(config.input, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + config.input);
  return ingest_csv(in, config);
}

// ---------------------------------------------------------------------------
// Export

void export_panel_csv(const PanelDataset& data, std::ostream& out) {
  csv::Writer w(out);
  std::vector<std::string> header = {"unit", "period", "y", "weight", "location", "z"};
  for (const auto& name : data.covariate_names()) header.push_back(name);
  w.row(header);
  for (std::size_t i = 0; i < data.n_units(); ++i) {
    for (int ti : data.observed_periods(i)) {
      const auto t = static_cast<std::size_t>(ti);
      std::vector<std::string> row = {data.unit_ids()[i],
                                      std::to_string(data.period_ids()[t]),
                                      csv::format_double(data.outcome(i, t)),
                                      csv::format_double(data.weight(i, t)),
                                      data.location_labels()[static_cast<std::size_t>(data.location(i))],
                                      csv::format_double(data.poverty_line(i, t))};
      for (double x : data.covariates(i, t)) row.push_back(csv::format_double(x));
      w.row(row);
    }
  }
}

void export_panel_csv(const PanelDataset& data, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  export_panel_csv(data, out);
}

ColumnMap default_columns(const PanelDataset& data, CompletionRule completion) {
  ColumnMap m;
  for (const auto& name : data.covariate_names()) m.covariates.push_back({name, completion, {}});
  return m;
}

// ---------------------------------------------------------------------------
// Fit serialization

json fit_to_json(const FitResult& fit, const PanelDataset& data) {
  const auto& p = fit.params;
  json theta = json::array();
  for (std::size_t k = 0; k < data.n_covariates(); ++k) {
    theta.push_back({{"name", data.covariate_names()[k]}, {"value", p.theta(static_cast<Eigen::Index>(k))}});
  }
  json mu = json::array();
  for (std::size_t l = 0; l < data.n_locations(); ++l) {
    mu.push_back({{"location", data.location_labels()[l]}, {"value", p.mu(static_cast<Eigen::Index>(l))}});
  }
  json alpha = json::array();
  for (int g = 0; g < p.n_groups(); ++g) {
    json row = json::array();
    for (std::size_t t = 0; t < data.n_periods(); ++t) {
      if (p.defined(g, t)) {
        row.push_back(p.alpha(g, static_cast<Eigen::Index>(t)));
      } else {
        row.push_back(nullptr);
      }
    }
    alpha.push_back(row);
  }
  json assignment = json::array();
  for (std::size_t i = 0; i < data.n_units(); ++i) {
    assignment.push_back({{"unit", data.unit_ids()[i]}, {"group", fit.gamma.group[i] + 1}});
  }
  return {
      {"n_groups", fit.gamma.n_groups},
      {"sse", fit.sse},
      {"periods", data.period_ids()},
      {"theta", theta},
      {"mu", mu},
      {"reference_location", data.location_labels()[static_cast<std::size_t>(p.reference_location)]},
      {"alpha", alpha},
      {"assignment", assignment},
      {"seed", fit.seed},
      {"diagnostics",
       {{"start_index", fit.start_index},
        {"start_sse", fit.start_sse},
        {"vns_cycles", fit.n_vns_cycles},
        {"shakes", fit.n_shakes},
        {"accepted", fit.n_accepted},
        {"rank_deficient_ever", fit.rank_deficient_ever}}},
  };
}

FitResult fit_from_json(const json& j, const PanelDataset& data) {
  FitResult fit;
  try {
    const int G = j.at("n_groups").get<int>();
    const auto periods = j.at("periods").get<std::vector<std::int64_t>>();
    std::unordered_map<std::string, int> loc;
    for (std::size_t l = 0; l < data.n_locations(); ++l) loc[data.location_labels()[l]] = static_cast<int>(l);
    const int ref = loc.at(j.at("reference_location").get<std::string>());
    fit.params = ModelParams::zeros(G, data.n_periods(), data.n_covariates(), data.n_locations(), ref);

    const auto& theta = j.at("theta");
    if (theta.size() != data.n_covariates()) throw Error(ErrorCode::InvalidArgument, "theta size mismatch");
    for (std::size_t k = 0; k < theta.size(); ++k) {
      if (theta[k].at("name").get<std::string>() != data.covariate_names()[k]) {
        throw Error(ErrorCode::InvalidArgument, "covariate order differs from the panel");
      }
      fit.params.theta(static_cast<Eigen::Index>(k)) = theta[k].at("value").get<double>();
    }
    for (const auto& m : j.at("mu")) {
      fit.params.mu(loc.at(m.at("location").get<std::string>())) = m.at("value").get<double>();
    }
    const auto& alpha = j.at("alpha");
    for (int g = 0; g < G; ++g) {
      for (std::size_t s = 0; s < periods.size(); ++s) {
        const auto& v = alpha.at(static_cast<std::size_t>(g)).at(s);
        if (v.is_null()) continue;
        const auto it = std::lower_bound(data.period_ids().begin(), data.period_ids().end(), periods[s]);
        if (it == data.period_ids().end() || *it != periods[s]) continue;
        fit.params.set_alpha(g, static_cast<std::size_t>(it - data.period_ids().begin()), v.get<double>());
      }
    }
    std::unordered_map<std::string, int> group;
    for (const auto& a : j.at("assignment")) group[a.at("unit").get<std::string>()] = a.at("group").get<int>() - 1;
    fit.gamma = GroupAssignment::constant(data.n_units(), G);
    for (std::size_t i = 0; i < data.n_units(); ++i) {
      const auto it = group.find(data.unit_ids()[i]);
      if (it == group.end()) throw Error(ErrorCode::InvalidArgument, "unit " + data.unit_ids()[i] + " not in fit");
      fit.gamma.group[i] = it->second;
    }
    fit.gamma.check(data.n_units());
    fit.sse = j.at("sse").get<double>();
    fit.seed = j.value("seed", std::uint64_t{0});
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("fit json: ") + e.what());
  } catch (const std::out_of_range& e) {
    throw Error(ErrorCode::ParseError, std::string("fit json: unknown label: ") + e.what());
  }
  return fit;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  out << text;
}

}  // namespace gfe
