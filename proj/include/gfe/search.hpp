#pragma once

// Grouped fixed-effects estimation by variable neighborhood search: random
// multi-unit reassignments ("shakes") of growing size, each followed by a
// capped refinement (OLS, greedy single-unit moves, OLS), accepting strict
// improvements, repeated over several independently seeded starts.

#include <cstdint>
#include <functional>
#include <vector>

#include "gfe/ols.hpp"
#include "gfe/panel.hpp"

namespace gfe {

struct FitResult {
  ModelParams params;
  GroupAssignment gamma;
  double sse = 0.0;
  int n_vns_cycles = 0;
  int n_shakes = 0;
  int n_accepted = 0;
  int start_index = 0;
  std::uint64_t seed = 0;  // stream seed of the winning start
  bool rank_deficient_ever = false;
  std::vector<double> start_sse;  // per start, filled by multi_start_fit
};

/// SSE after each refinement stage: first OLS, every accepted single-unit
/// move, final OLS.
struct RefineTrace {
  std::vector<double> stage_sse;
  int passes = 0;
  int moves = 0;
  bool rank_deficient = false;
};

struct SearchEvent {
  enum class Kind { Start, Cycle, Shake, Accepted, Finished };
  Kind kind = Kind::Start;
  int start_index = 0;
  int cycle = 0;
  int shake_size = 0;
  double sse = 0.0;
};

/// Optional hooks. multi_start_fit may invoke them from several threads; calls
/// are serialized by the library.
struct SearchObserver {
  std::function<void(const SearchEvent&)> on_event;
  std::function<void(const RefineTrace&)> on_refine;
};

struct Initialization {
  ModelParams params;  // pooled theta/mu, alpha(g, t) = period-mean residual for every g
  GroupAssignment gamma;
};

/// Deterministic starting point shared by every start.
Initialization initialize(const PanelDataset& data, int n_groups, const DesignSpec& spec);

/// Each unit to its loss-minimizing group; candidates with an undefined alpha on
/// the unit's observed periods are skipped; ties go to the lowest index.
GroupAssignment assign_groups(const PanelDataset& data, const ModelParams& params);

struct LocalSearchResult {
  GroupAssignment gamma;
  int passes = 0;
  int moves = 0;
  std::vector<double> move_sse_drop;  // loss decrease of each accepted move, in order
};

/// Up to max_passes sweeps in unit order, holding params fixed. A unit moves to
/// its best alternative only when that strictly lowers its loss.
LocalSearchResult local_search(const PanelDataset& data, const ModelParams& params, const GroupAssignment& gamma,
                               int max_passes);

struct RefineResult {
  ModelParams params;
  GroupAssignment gamma;
  double sse = 0.0;
  RefineTrace trace;
};

RefineResult refine(const PanelDataset& data, const GroupAssignment& gamma, const DesignSpec& spec,
                    int max_local_iters);

/// One start of the search. Deterministic in (data, spec, config, start_index);
/// the random stream is seeded with stream_seed(config.base_seed, start_index).
FitResult vns_fit(const PanelDataset& data, const DesignSpec& spec, const FitConfig& config, int start_index,
                  const SearchObserver* observer = nullptr);

/// Runs starts 0..n_starts-1 (in parallel when OpenMP allows) and keeps the
/// lowest SSE. SSEs within config.sse_rel_tol of the minimum count as ties,
/// which go to the lowest start index.
FitResult multi_start_fit(const PanelDataset& data, const DesignSpec& spec, const FitConfig& config,
                          const SearchObserver* observer = nullptr);

/// Relabels groups by descending mean of their defined alpha cells; empty
/// groups go last. Leaves SSE and fitted values unchanged.
FitResult canonical_labels(const FitResult& fit);

}  // namespace gfe
