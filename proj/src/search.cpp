#include "gfe/search.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numeric>

#include "gfe/kernels.hpp"
#include "gfe/rng.hpp"

namespace gfe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

int argmin_lowest(std::span<const double> losses) {
  int best = 0;
  for (int g = 1; g < static_cast<int>(losses.size()); ++g) {
    if (losses[static_cast<std::size_t>(g)] < losses[static_cast<std::size_t>(best)]) best = g;
  }
  return best;
}

[[maybe_unused]] bool non_increasing(const std::vector<double>& v) {
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] > v[k - 1] * (1.0 + 1e-12) + 1e-300) return false;
  }
  return true;
}

DesignSpec with_groups(DesignSpec spec, int n_groups) {
  spec.n_groups = n_groups;
  return spec;
}

void emit(const SearchObserver* observer, const SearchEvent& event) {
  if (observer && observer->on_event) observer->on_event(event);
}

// Draws `count` distinct units (Floyd's algorithm), visits them in ascending
// order and gives each an independent uniform group, possibly its current one.
void shake(GroupAssignment& gamma, int count, Rng& rng) {
  const std::size_t n = gamma.group.size();
  const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(count), n);
  std::vector<std::size_t> chosen;
  chosen.reserve(m);
  for (std::size_t j = n - m; j < n; ++j) {
    const auto pick = static_cast<std::size_t>(rng.below(j + 1));
    if (std::find(chosen.begin(), chosen.end(), pick) == chosen.end()) {
      chosen.push_back(pick);
    } else {
      chosen.push_back(j);
    }
  }
  std::sort(chosen.begin(), chosen.end());
  for (std::size_t i : chosen) {
    gamma.group[i] = static_cast<int>(rng.below(static_cast<std::uint64_t>(gamma.n_groups)));
  }
}

}  // namespace

Initialization initialize(const PanelDataset& data, int n_groups, const DesignSpec& spec) {
  if (n_groups < 1) throw Error(ErrorCode::InvalidArgument, "G must be >= 1");
  const auto pooled = pooled_ols(data, spec);

  const std::size_t periods = data.n_periods();
  std::vector<double> sum(periods, 0.0);
  std::vector<std::size_t> count(periods, 0);
  for (std::size_t i = 0; i < data.n_units(); ++i) {
    for (int t : data.observed_periods(i)) {
      const auto tt = static_cast<std::size_t>(t);
      sum[tt] += data.outcome(i, tt) - pooled.params.common_part(data.covariates(i, tt), data.location(i));
      ++count[tt];
    }
  }

  Initialization init;
  init.params = ModelParams::zeros(n_groups, periods, data.n_covariates(), data.n_locations(),
                                   spec.reference_location);
  init.params.theta = pooled.params.theta;
  init.params.mu = pooled.params.mu;
  for (std::size_t t = 0; t < periods; ++t) {
    for (int g = 0; g < n_groups; ++g) {
      if (count[t] > 0) {
        init.params.set_alpha(g, t, sum[t] / static_cast<double>(count[t]));
      } else {
        init.params.clear_alpha(g, t);
      }
    }
  }
  init.gamma = assign_groups(data, init.params);
  return init;
}

GroupAssignment assign_groups(const PanelDataset& data, const ModelParams& params) {
  const auto n_groups = static_cast<std::size_t>(params.n_groups());
  const auto losses = kernels::omp::assignment_losses(data, params);
  GroupAssignment gamma = GroupAssignment::constant(data.n_units(), params.n_groups());
  for (std::size_t i = 0; i < data.n_units(); ++i) {
    const std::span<const double> row(losses.data() + i * n_groups, n_groups);
    const int best = argmin_lowest(row);
    if (row[static_cast<std::size_t>(best)] == kInf) {
      throw Error(ErrorCode::NoFeasibleGroup, "unit " + data.unit_ids()[i]);
    }
    gamma.group[i] = best;
  }
  return gamma;
}

LocalSearchResult local_search(const PanelDataset& data, const ModelParams& params, const GroupAssignment& gamma,
                               int max_passes) {
  gamma.check(data.n_units());
  LocalSearchResult out;
  out.gamma = gamma;
  if (max_passes <= 0) return out;

  const auto n_groups = static_cast<std::size_t>(params.n_groups());
  const auto losses = kernels::omp::assignment_losses(data, params);

  for (int pass = 0; pass < max_passes; ++pass) {
    int moved = 0;
    for (std::size_t i = 0; i < data.n_units(); ++i) {
      const std::span<const double> row(losses.data() + i * n_groups, n_groups);
      const int current = out.gamma.group[i];
      const int best = argmin_lowest(row);
      const double current_loss = row[static_cast<std::size_t>(current)];
      const double best_loss = row[static_cast<std::size_t>(best)];
      if (best_loss < current_loss) {
        out.gamma.group[i] = best;
        out.move_sse_drop.push_back(current_loss - best_loss);
        ++moved;
      }
    }
    ++out.passes;
    out.moves += moved;
    if (moved == 0) break;
  }
  return out;
}

RefineResult refine(const PanelDataset& data, const GroupAssignment& gamma, const DesignSpec& spec,
                    int max_local_iters) {
  const auto design = with_groups(spec, gamma.n_groups);
  auto first = ols_update(data, gamma, design);

  RefineResult out;
  out.trace.stage_sse.push_back(first.sse);
  out.trace.rank_deficient = first.rank_deficient;

  auto ls = local_search(data, first.params, gamma, max_local_iters);
  out.trace.passes = ls.passes;
  out.trace.moves = ls.moves;
  double running = first.sse;
  for (double drop : ls.move_sse_drop) {
    running -= drop;
    out.trace.stage_sse.push_back(running);
  }

  if (ls.moves == 0) {
    out.params = std::move(first.params);
    out.gamma = std::move(ls.gamma);
    out.sse = first.sse;
  } else {
    auto last = ols_update(data, ls.gamma, design);
    out.trace.stage_sse.push_back(last.sse);
    out.trace.rank_deficient = out.trace.rank_deficient || last.rank_deficient;
    out.params = std::move(last.params);
    out.gamma = std::move(ls.gamma);
    out.sse = last.sse;
  }
  assert(non_increasing(out.trace.stage_sse));
  return out;
}

FitResult vns_fit(const PanelDataset& data, const DesignSpec& spec, const FitConfig& config, int start_index,
                  const SearchObserver* observer) {
  config.check();
  const auto design = with_groups(spec, config.n_groups);

  FitResult result;
  result.start_index = start_index;
  result.seed = stream_seed(config.base_seed, static_cast<std::uint64_t>(start_index));
  Rng rng(result.seed);

  auto report = [&](const RefineTrace& trace) {
    result.rank_deficient_ever = result.rank_deficient_ever || trace.rank_deficient;
    if (observer && observer->on_refine) observer->on_refine(trace);
  };

  const auto init = initialize(data, config.n_groups, design);
  auto incumbent = refine(data, init.gamma, design, config.max_local_iters);
  report(incumbent.trace);
  emit(observer, {SearchEvent::Kind::Start, start_index, 0, 0, incumbent.sse});

  for (int cycle = 1; cycle <= config.itermax; ++cycle) {
    ++result.n_vns_cycles;
    emit(observer, {SearchEvent::Kind::Cycle, start_index, cycle, 0, incumbent.sse});
    int size = 1;
    while (size <= config.neighmax) {
      GroupAssignment shaken = incumbent.gamma;
      shake(shaken, size, rng);
      ++result.n_shakes;
      emit(observer, {SearchEvent::Kind::Shake, start_index, cycle, size, incumbent.sse});

      auto candidate = refine(data, shaken, design, config.max_local_iters);
      report(candidate.trace);
      if (candidate.sse < incumbent.sse) {
        incumbent = std::move(candidate);
        ++result.n_accepted;
        emit(observer, {SearchEvent::Kind::Accepted, start_index, cycle, size, incumbent.sse});
        size = 1;
      } else {
        ++size;
      }
    }
  }

  result.params = std::move(incumbent.params);
  result.gamma = std::move(incumbent.gamma);
  result.sse = incumbent.sse;
  emit(observer, {SearchEvent::Kind::Finished, start_index, result.n_vns_cycles, 0, result.sse});
  return result;
}

FitResult multi_start_fit(const PanelDataset& data, const DesignSpec& spec, const FitConfig& config,
                          const SearchObserver* observer) {
  config.check();
  const int n_starts = config.n_starts;
  std::vector<FitResult> results(static_cast<std::size_t>(n_starts));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_starts));

  std::mutex mutex;
  SearchObserver serialized;
  if (observer) {
    if (observer->on_event) {
      serialized.on_event = [&](const SearchEvent& e) {
        std::lock_guard lock(mutex);
        observer->on_event(e);
      };
    }
    if (observer->on_refine) {
      serialized.on_refine = [&](const RefineTrace& t) {
        std::lock_guard lock(mutex);
        observer->on_refine(t);
      };
    }
  }
  const SearchObserver* inner = observer ? &serialized : nullptr;

#pragma omp parallel for schedule(dynamic, 1)
  for (int s = 0; s < n_starts; ++s) {
    try {
      results[static_cast<std::size_t>(s)] = vns_fit(data, spec, config, s, inner);
    } catch (...) {
      errors[static_cast<std::size_t>(s)] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  double best_sse = kInf;
  for (const auto& r : results) best_sse = std::min(best_sse, r.sse);
  const double cutoff = best_sse + config.sse_rel_tol * std::max(best_sse, 1e-300);
  std::size_t winner = 0;
  while (results[winner].sse > cutoff) ++winner;

  FitResult out = std::move(results[winner]);
  out.start_sse.clear();
  for (const auto& r : results) {
    out.start_sse.push_back(r.sse);
    out.rank_deficient_ever = out.rank_deficient_ever || r.rank_deficient_ever;
  }
  return out;
}

FitResult canonical_labels(const FitResult& fit) {
  const int n_groups = fit.gamma.n_groups;
  const auto periods = static_cast<std::size_t>(fit.params.alpha.cols());
  std::vector<std::size_t> sizes(static_cast<std::size_t>(n_groups), 0);
  for (int g : fit.gamma.group) ++sizes[static_cast<std::size_t>(g)];

  std::vector<double> mean(static_cast<std::size_t>(n_groups), -kInf);
  for (int g = 0; g < n_groups; ++g) {
    double s = 0.0;
    int c = 0;
    for (std::size_t t = 0; t < periods; ++t) {
      if (fit.params.defined(g, t)) {
        s += fit.params.alpha(g, static_cast<Eigen::Index>(t));
        ++c;
      }
    }
    if (c > 0 && sizes[static_cast<std::size_t>(g)] > 0) mean[static_cast<std::size_t>(g)] = s / c;
  }

  std::vector<int> order(static_cast<std::size_t>(n_groups));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return mean[static_cast<std::size_t>(a)] > mean[static_cast<std::size_t>(b)];
  });
  std::vector<int> new_label(static_cast<std::size_t>(n_groups));
  for (int k = 0; k < n_groups; ++k) new_label[static_cast<std::size_t>(order[static_cast<std::size_t>(k)])] = k;

  FitResult out = fit;
  for (auto& g : out.gamma.group) g = new_label[static_cast<std::size_t>(g)];
  for (int g = 0; g < n_groups; ++g) {
    const int to = new_label[static_cast<std::size_t>(g)];
    for (std::size_t t = 0; t < periods; ++t) {
      if (fit.params.defined(g, t)) {
        out.params.set_alpha(to, t, fit.params.alpha(g, static_cast<Eigen::Index>(t)));
      } else {
        out.params.clear_alpha(to, t);
      }
    }
  }
  return out;
}

}  // namespace gfe
