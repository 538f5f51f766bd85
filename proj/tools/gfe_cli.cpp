// gfe: grouped fixed-effects estimation and poverty analytics for rotating panels.

#include <omp.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "gfe/csv.hpp"
#include "gfe/dgp.hpp"
#include "gfe/io.hpp"
#include "gfe/metrics.hpp"
#include "gfe/poverty.hpp"
#include "gfe/search.hpp"
#include "gfe/selection.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace gfe;

namespace {

struct Options {
  std::string config_path;
  std::string input;
  std::string out;
  std::optional<int> g;
  std::vector<int> g_grid;
  std::optional<int> n_starts;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::optional<int> min_rounds;
  std::optional<bool> ihs;
  // subcommand specific
  int holdout_years = 0;
  std::string fit_path;
  std::string reference;
  std::string covariate_set;
};

RunConfig resolve(const Options& o) {
  RunConfig c = o.config_path.empty() ? RunConfig{} : load_run_config(o.config_path);
  if (!o.input.empty()) c.input = o.input;
  if (!o.out.empty()) c.output_dir = o.out;
  if (o.g) c.fit.n_groups = *o.g;
  if (!o.g_grid.empty()) c.g_grid = o.g_grid;
  if (o.n_starts) c.fit.n_starts = *o.n_starts;
  if (o.seed) c.fit.base_seed = *o.seed;
  if (o.min_rounds) c.min_rounds = *o.min_rounds;
  if (o.ihs) c.apply_ihs = *o.ihs;
  if (o.holdout_years > 0) c.holdout_years = o.holdout_years;
  if (!o.covariate_set.empty()) c.covariate_set = o.covariate_set;
  c.check();
  return c;
}

// Without an explicit column map every non-key column of the file is a covariate.
Ingested load(RunConfig& c) {
  if (c.input.empty()) throw Error(ErrorCode::InvalidArgument, "no input file (--input or config 'input')");
  if (c.columns.covariates.empty()) {
    const auto header = csv::read_file(c.input).header;
    const auto& m = c.columns;
    for (const auto& h : header) {
      if (h == m.unit || h == m.period || h == m.outcome || h == m.weight || h == m.location || h == m.poverty_line) {
        continue;
      }
      bool filter = false;
      for (const auto& f : c.ranges) filter = filter || f.column == h;
      if (!filter) c.columns.covariates.push_back({h, CompletionRule::TimeInvariant, {}});
    }
  }
  return ingest(c);
}

std::string path_in(const RunConfig& c, const std::string& name) { return (fs::path(c.output_dir) / name).string(); }

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json summary_base(const std::string& command, const RunConfig& c, const Ingested* in) {
  json s = {{"command", command}, {"version", GFE_VERSION}, {"config", to_json(c)}};
  if (in) {
    s["ingestion"] = in->report.to_json();
    s["panel"] = {{"units", in->data.n_units()},
                  {"periods", in->data.n_periods()},
                  {"covariates", in->data.n_covariates()},
                  {"locations", in->data.n_locations()},
                  {"observed_cells", in->data.n_observed()}};
  }
  return s;
}

FitResult fit_or_load(const Options& o, const RunConfig& c, const PanelDataset& data) {
  if (!o.fit_path.empty()) {
    std::ifstream in(o.fit_path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + o.fit_path);
    return fit_from_json(json::parse(in), data);
  }
  return canonical_labels(multi_start_fit(data, DesignSpec{}, c.fit));
}

void write_transitions(const std::string& path, const TransitionTable& table) {
  csv::Table out;
  out.header = {"end_period"};
  for (const char* s : kTransitionStateNames) out.header.emplace_back(s);
  out.header.insert(out.header.end(), {"weight_total", "pairs"});
  for (const auto& r : table.rows) {
    std::vector<std::string> row = {std::to_string(r.end_period)};
    for (double s : r.share) row.push_back(csv::format_double(s));
    row.push_back(csv::format_double(r.weight_total));
    row.push_back(std::to_string(r.count[0] + r.count[1] + r.count[2] + r.count[3]));
    out.rows.push_back(std::move(row));
  }
  csv::write_file(path, out);
}

TransitionTable read_transitions(const std::string& path) {
  const auto t = csv::read_file(path);
  const int c_period = t.column("end_period");
  if (c_period < 0) throw Error(ErrorCode::ParseError, path + ": missing column 'end_period'");
  std::array<int, 4> c_state{};
  for (std::size_t s = 0; s < 4; ++s) {
    c_state[s] = t.column(kTransitionStateNames[s]);
    if (c_state[s] < 0) throw Error(ErrorCode::ParseError, path + ": missing column '" + kTransitionStateNames[s] + "'");
  }
  TransitionTable table;
  for (const auto& r : t.rows) {
    TransitionRow row;
    row.end_period = std::stoll(r[static_cast<std::size_t>(c_period)]);
    for (std::size_t s = 0; s < 4; ++s) row.share[s] = std::stod(r[static_cast<std::size_t>(c_state[s])]);
    table.rows.push_back(row);
  }
  std::sort(table.rows.begin(), table.rows.end(),
            [](const TransitionRow& a, const TransitionRow& b) { return a.end_period < b.end_period; });
  return table;
}

void write_fit_metrics(const std::string& path, const TransitionFitMetrics& m) {
  csv::Table out;
  out.header = {"end_period", "mae", "rmse", "tv"};
  for (const auto& r : m.rows) {
    out.rows.push_back({std::to_string(r.end_period), csv::format_double(r.mae), csv::format_double(r.rmse),
                        csv::format_double(r.tv)});
  }
  out.rows.push_back({"average", csv::format_double(m.mae_avg), csv::format_double(m.rmse_avg),
                      csv::format_double(m.tv_avg)});
  csv::write_file(path, out);
}

json fit_metrics_json(const TransitionFitMetrics& m) {
  return {{"mae_avg", m.mae_avg}, {"rmse_avg", m.rmse_avg}, {"tv_avg", m.tv_avg}, {"tv_max", m.tv_max}};
}

// ---------------------------------------------------------------------------

int cmd_fit(const Options& o) {
  auto c = resolve(o);
  const auto in = load(c);
  fs::create_directories(c.output_dir);
  const auto fit = canonical_labels(multi_start_fit(in.data, DesignSpec{}, c.fit));
  write_json(path_in(c, "fit.json"), fit_to_json(fit, in.data));
  auto s = summary_base("fit", c, &in);
  s["sse"] = fit.sse;
  s["n_groups"] = fit.gamma.n_groups;
  write_json(path_in(c, "summary.json"), s);
  std::cout << "fit: G=" << fit.gamma.n_groups << " SSE=" << csv::format_double(fit.sse) << " -> "
            << c.output_dir << "\n";
  return 0;
}

int cmd_select_g(const Options& o) {
  auto c = resolve(o);
  const auto in = load(c);
  fs::create_directories(c.output_dir);
  FitConfig fine = c.fit;
  fine.n_starts = c.fine_starts;
  const auto split = last_periods_holdout(in.data, c.holdout_years);
  const auto report = select_g(in.data, split, c.g_grid, DesignSpec{}, c.fit, fine, c.shortlist);

  csv::Table out;
  out.header = {"G", "phase", "sse_train", "bic", "rmse_test", "n_starts", "excluded_cells"};
  for (const auto* rows : {&report.coarse, &report.fine}) {
    for (const auto& r : *rows) {
      out.rows.push_back({std::to_string(r.n_groups), std::to_string(r.phase), csv::format_double(r.sse_train),
                          csv::format_double(r.bic), csv::format_double(r.rmse_test), std::to_string(r.n_starts),
                          std::to_string(r.excluded_cells)});
    }
  }
  csv::write_file(path_in(c, "selection.csv"), out);
  auto s = summary_base("select-g", c, &in);
  s["chosen_g"] = report.chosen_g;
  write_json(path_in(c, "summary.json"), s);
  std::cout << "select-g: chosen G=" << report.chosen_g << " -> " << c.output_dir << "\n";
  return 0;
}

int cmd_validate(const Options& o) {
  auto c = resolve(o);
  const auto in = load(c);
  fs::create_directories(c.output_dir);
  const auto split = last_periods_holdout(in.data, c.holdout_years);
  const auto fit = canonical_labels(multi_start_fit(split.train, DesignSpec{}, c.fit));
  const auto score = holdout_rmse(fit, in.data, split);
  auto s = summary_base("validate", c, &in);
  s["rmse_test"] = score.rmse;
  s["scored_cells"] = score.scored_cells;
  s["excluded_cells"] = score.excluded_cells;

  if (c.holdout_years == 1) {
    const auto v = one_step_validation(fit, in.data, split);
    write_transitions(path_in(c, "transitions_actual.csv"), v.actual);
    write_transitions(path_in(c, "transitions_pred.csv"), v.predicted);
    s["accuracy"] = v.accuracy;
    s["misclassification"] = v.misclassification;
    s["pairs"] = v.n_pairs;
    s["excluded_nonconsecutive"] = v.excluded_nonconsecutive;
    s["excluded_undefined"] = v.excluded_undefined;
    if (!v.actual.rows.empty()) {
      const auto m = transition_fit(v.predicted, v.actual);
      write_fit_metrics(path_in(c, "fit_metrics.csv"), m);
      s["transition_fit"] = fit_metrics_json(m);
    }
    std::cout << "validate: accuracy=" << csv::format_double(v.accuracy) << " over " << v.n_pairs << " pairs\n";
  } else {
    csv::Table out;
    out.header = {"period", "units", "actual_rate", "predicted_rate", "accuracy"};
    for (const auto& r : holdout_classification(fit, in.data, split)) {
      out.rows.push_back({std::to_string(r.period), std::to_string(r.units), csv::format_double(r.actual_rate),
                          csv::format_double(r.predicted_rate), csv::format_double(r.accuracy)});
    }
    csv::write_file(path_in(c, "holdout_classification.csv"), out);
    std::cout << "validate: " << c.holdout_years << "-period holdout, RMSE=" << csv::format_double(score.rmse) << "\n";
  }
  write_json(path_in(c, "summary.json"), s);
  return 0;
}

// Window: every period with at least one defined alpha.
std::vector<std::size_t> defined_window(const FitResult& fit, std::size_t n_periods) {
  std::vector<std::size_t> window;
  for (std::size_t t = 0; t < n_periods; ++t) {
    for (int g = 0; g < fit.params.n_groups(); ++g) {
      if (fit.params.defined(g, t)) {
        window.push_back(t);
        break;
      }
    }
  }
  return window;
}

CompletedPanel completed_panel(const RunConfig& c, const FitResult& fit, const PanelDataset& data) {
  std::vector<CompletionRule> rules;
  for (const auto& col : c.active_covariates()) rules.push_back(col.completion);
  const auto window = defined_window(fit, data.n_periods());
  const auto covariates = complete_covariates(data, rules, window);
  std::string policy;
  for (std::size_t k = 0; k < rules.size(); ++k) {
    if (k) policy += ";";
    policy += data.covariate_names()[k] + "=" + std::string(to_string(rules[k]));
  }
  if (covariates.backward_age_used) policy += ";age_backward_extension";
  return complete_paths(fit, data, covariates, window, policy);
}

int cmd_transitions(const Options& o) {
  auto c = resolve(o);
  const auto in = load(c);
  fs::create_directories(c.output_dir);
  auto s = summary_base("transitions", c, &in);
  const auto observed_pairs = observed_transition_pairs(in.data);
  const auto actual = transition_table(observed_pairs);
  write_transitions(path_in(c, "transitions_actual.csv"), actual);
  s["observed_pairs"] = observed_pairs.size();

  const auto fit = fit_or_load(o, c, in.data);
  const auto completed = completed_panel(c, fit, in.data);
  const auto completed_pairs = completed_transition_pairs(completed, in.data);
  const auto predicted = transition_table(completed_pairs);
  write_transitions(path_in(c, "transitions_pred.csv"), predicted);
  s["completed_pairs"] = completed_pairs.size();

  if (!o.reference.empty()) {
    const auto m = transition_fit(predicted, read_transitions(o.reference));
    write_fit_metrics(path_in(c, "fit_metrics.csv"), m);
    s["transition_fit"] = fit_metrics_json(m);
  }
  write_json(path_in(c, "summary.json"), s);
  std::cout << "transitions: " << observed_pairs.size() << " observed pairs, " << completed_pairs.size()
            << " completed pairs\n";
  return 0;
}

int cmd_complete(const Options& o) {
  auto c = resolve(o);
  const auto in = load(c);
  const auto& data = in.data;
  fs::create_directories(c.output_dir);
  const auto fit = fit_or_load(o, c, data);
  const auto completed = completed_panel(c, fit, data);
  const auto statuses = completed_statuses(completed, data);

  csv::Table panel;
  panel.header = {"unit", "period", "y_comp", "source", "status"};
  for (std::size_t i = 0; i < completed.n_units; ++i) {
    for (std::size_t w = 0; w < completed.window.size(); ++w) {
      const auto st = statuses.at(i, w);
      panel.rows.push_back({data.unit_ids()[i], std::to_string(data.period_ids()[completed.window[w]]),
                            csv::format_double(completed.value(i, w)),
                            std::string(to_string(completed.cell_source(i, w))),
                            st < 0 ? "" : (st ? "poor" : "nonpoor")});
    }
  }
  csv::write_file(path_in(c, "completed_panel.csv"), panel);

  std::vector<std::size_t> baseline(data.n_covariates());
  std::iota(baseline.begin(), baseline.end(), std::size_t{0});
  csv::Table profiles;
  profiles.header = {"group", "rank", "size", "population_share", "mean_alpha", "baseline_outcome"};
  for (const auto& name : data.covariate_names()) profiles.header.push_back("baseline_" + name);
  for (const auto& p : group_profiles(fit, data, baseline)) {
    std::vector<std::string> row = {std::to_string(p.group + 1), std::to_string(p.rank + 1), std::to_string(p.size),
                                    csv::format_double(p.population_share), csv::format_double(p.mean_alpha),
                                    csv::format_double(p.baseline_outcome)};
    for (double v : p.baseline_covariates) row.push_back(csv::format_double(v));
    profiles.rows.push_back(std::move(row));
  }
  csv::write_file(path_in(c, "profiles.csv"), profiles);

  const auto durations = duration_summaries(statuses, c.chronic_k);
  csv::Table dur;
  dur.header = {"unit", "group", "periods", "poor_periods", "poor_share", "chronic", "spells"};
  for (std::size_t i = 0; i < durations.units.size(); ++i) {
    const auto& u = durations.units[i];
    std::string spells;
    for (std::size_t k = 0; k < u.spells.size(); ++k) spells += (k ? ";" : "") + std::to_string(u.spells[k]);
    dur.rows.push_back({data.unit_ids()[i], std::to_string(fit.gamma.group[i] + 1), std::to_string(u.periods),
                        std::to_string(u.poor_periods), csv::format_double(u.poor_share), u.chronic ? "1" : "0",
                        spells});
  }
  csv::write_file(path_in(c, "durations.csv"), dur);

  auto s = summary_base("complete", c, &in);
  s["completion_policy"] = completed.completion_policy;
  s["absent_cells"] = completed.absent_cells;
  s["chronic_share"] = durations.chronic_share;
  json spells = json::object();
  for (const auto& [len, n] : durations.spell_length_counts) spells[std::to_string(len)] = n;
  s["spell_length_counts"] = spells;
  write_json(path_in(c, "summary.json"), s);
  std::cout << "complete: " << completed.window.size() << " periods, " << completed.absent_cells
            << " absent cells\n";
  return 0;
}

struct SimOptions {
  std::size_t n = 200, t = 10, k = 2, l = 3;
  int g = 3;
  double gap = 2.0, sigma = 0.5;
  int window = 4;
  std::uint64_t seed = 1;
};

int cmd_simulate(const Options& o, const SimOptions& so) {
  const std::string out_dir = o.out.empty() ? "out" : o.out;
  fs::create_directories(out_dir);
  const auto rotation = so.window > 0 ? Rotation::rolling(so.window) : Rotation::full();
  const auto spec = make_spec(so.n, so.t, so.g, so.k, so.l, so.gap, so.sigma, rotation, so.seed);
  const auto sim = generate(spec);
  export_panel_csv(sim.data, (fs::path(out_dir) / "panel.csv").string());

  FitResult truth;
  truth.params = sim.truth.params;
  truth.gamma = sim.truth.gamma;
  truth.sse = objective(sim.data, truth.params, truth.gamma);
  auto t = fit_to_json(truth, sim.data);
  t["separation"] = separation(spec.alpha, spec.noise_sd);
  write_json((fs::path(out_dir) / "truth.json").string(), t);
  std::cout << "simulate: " << sim.data.n_units() << " units, " << sim.data.n_observed() << " observed cells -> "
            << out_dir << "\n";
  return 0;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--config", o.config_path, "JSON run configuration");
  sub->add_option("--input", o.input, "panel CSV");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--g", o.g, "number of groups");
  sub->add_option("--g-grid", o.g_grid, "candidate G values")->delimiter(',');
  sub->add_option("--n-starts", o.n_starts, "VNS starts");
  sub->add_option("--seed", o.seed, "base seed");
  sub->add_option("--threads", o.threads, "OpenMP thread cap (0: runtime default)");
  sub->add_option("--min-rounds", o.min_rounds, "minimum observed rounds per unit");
  sub->add_flag("--ihs,!--no-ihs", o.ihs, "IHS-transform outcome and poverty line");
  sub->add_option("--covariate-set", o.covariate_set, "covariate set label, e.g. spec1");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grouped fixed-effects estimation for rotating panels"};
  app.set_version_flag("--version", GFE_VERSION);
  app.require_subcommand(1);
  Options o;
  SimOptions so;

  auto* fit = app.add_subcommand("fit", "estimate with a fixed G");
  auto* sel = app.add_subcommand("select-g", "choose G by holdout RMSE");
  auto* val = app.add_subcommand("validate", "last-period holdout validation");
  auto* tra = app.add_subcommand("transitions", "observed and completed transition tables");
  auto* cmp = app.add_subcommand("complete", "completed paths, group profiles and durations");
  auto* sim = app.add_subcommand("simulate", "write a synthetic rotating panel");
  for (auto* sub : {fit, sel, val, tra, cmp}) add_common(sub, o);
  val->add_option("--holdout-years", o.holdout_years, "periods held out per unit");
  for (auto* sub : {tra, cmp}) sub->add_option("--fit", o.fit_path, "fit.json to use instead of refitting");
  tra->add_option("--reference", o.reference, "reference transition table CSV to score against");

  sim->add_option("--out", o.out, "output directory");
  sim->add_option("--n", so.n, "units");
  sim->add_option("--t", so.t, "periods");
  sim->add_option("--g", so.g, "true groups");
  sim->add_option("--k", so.k, "covariates");
  sim->add_option("--l", so.l, "locations");
  sim->add_option("--gap", so.gap, "level gap between adjacent group paths");
  sim->add_option("--sigma", so.sigma, "noise sd");
  sim->add_option("--window", so.window, "rotation window (0: full observation)");
  sim->add_option("--seed", so.seed, "seed");

  CLI11_PARSE(app, argc, argv);
  if (o.threads > 0) omp_set_num_threads(o.threads);

  const auto* chosen = app.get_subcommands().front();
  const std::string name = chosen->get_name();
  try {
    if (chosen == fit) return cmd_fit(o);
    if (chosen == sel) return cmd_select_g(o);
    if (chosen == val) return cmd_validate(o);
    if (chosen == tra) return cmd_transitions(o);
    if (chosen == cmp) return cmd_complete(o);
    if (chosen == sim) return cmd_simulate(o, so);
  } catch (const ValidationError& e) {
    json err = {{"command", name}, {"error", "ValidationError"}, {"message", e.what()}};
    json v = json::array();
    for (const auto& x : e.violations()) {
      v.push_back({{"rule", std::string(to_string(x.rule))}, {"unit", x.unit_id}, {"period", x.period},
                   {"detail", x.detail}});
    }
    err["violations"] = v;
    std::cerr << err.dump(2) << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << json{{"command", name}, {"error", std::string(to_string(e.code()))}, {"message", e.what()}}.dump(2)
              << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"command", name}, {"error", "internal"}, {"message", e.what()}}.dump(2) << "\n";
    return 1;
  }
  return 1;
}
