// Copyright 2026 The LEAN Pruning Authors
// Licensed under the Apache License, Version 2.0

#ifndef LEAN_PRUNERS_HPP
#define LEAN_PRUNERS_HPP

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "lean/network.hpp"
#include "lean/opnorm.hpp"
#include "lean/prune_graph.hpp"

namespace lean {

enum class PruneMethod { lean, magnitude, opnorm };
enum class FilterScore { l1, spectral };

std::string_view to_string(PruneMethod method);
std::optional<PruneMethod> parse_prune_method(std::string_view text);

struct PruneConfig {
  PruneMethod method = PruneMethod::lean;
  /// Target fraction of prunable convolutions remaining after the last step.
  double p_ratio = 0.1;
  int n_steps = 1;
  /// Channels whose succeeding batchnorm has a running variance below this are redundant.
  double var_threshold = 1e-40;
  NormConfig norm_config;

  /// Per-step multiplicative keep ratio: exp(ln(p_ratio) / n_steps).
  double step_ratio() const;
  /// Throws Error{config} for a ratio outside (0,1) or a non-positive step count.
  void validate() const;
};

/// Smallest integer count >= fraction * total, tolerant of binary rounding
/// (0.1 * 210 keeps 21 filters, not 22).
std::size_t keep_count(double fraction, std::size_t total);

struct StepRecord {
  int step = 0;
  PruneMethod method = PruneMethod::lean;
  double step_ratio = 1.0;
  double target_fraction = 1.0;
  double fraction_remaining = 1.0;
  /// Prunable convolutions left after the step.
  std::size_t retained_count = 0;
  std::vector<NodeId> removed_nodes;
  std::size_t chains_extracted = 0;
  /// Largest number of prunable convolutions in a single extracted chain.
  std::size_t max_chain_convs = 0;
  /// Lowest retained filter score (threshold methods only).
  std::optional<double> threshold_used;
  double wall_ms = 0.0;
};

struct PruneState {
  PruneConfig config;
  NetworkSpec original;
  NetworkSpec network;
  PruneGraph graph;
  std::set<OperatorId> retained_conv_ids;
  std::size_t original_prunable_conv_count = 0;
  std::vector<StepRecord> step_log;
};

struct LeanSelection {
  /// Extracted prunable convolutions plus every operator that is not a prunable convolution.
  std::set<OperatorId> retained;
  std::size_t retained_convs = 0;
  std::size_t chains_extracted = 0;
  std::size_t max_chain_convs = 0;
};

/// Extracts longest chains from `graph` until at least keep_count(target_fraction, P) of its
/// P prunable convolutions lie on extracted chains. The crossing chain is kept whole.
/// Edges that are not prunable convolutions are never counted and always retained.
LeanSelection lean_select(PruneGraph& graph, double target_fraction);

/// Continues an extraction until `selection.retained_convs >= target_count` or the graph
/// runs out of edges.
void lean_extend(PruneGraph& graph, std::size_t target_count, LeanSelection& selection);

/// Fixed-point removal of (a) non-input channels without a retained incoming operator from a
/// surviving channel and (b) channels whose succeeding batchnorm operators all have
/// running_var < var_threshold. Every operator touching a removed channel is erased from
/// `retained`, unprunable ones included. Returns the removed channel ids.
std::set<NodeId> redundancy_eliminate(const NetworkSpec& network, std::set<OperatorId>& retained,
                                      double var_threshold);

/// Per-filter scores of every prunable convolution.
std::map<OperatorId, double> filter_scores(const NetworkSpec& network, FilterScore score, const NormConfig& cfg);

/// Global threshold: keeps the best-scored keep_count(target_fraction, P) prunable
/// convolutions (lower id first on ties) and every other operator.
std::set<OperatorId> threshold_select(const NetworkSpec& network, double target_fraction, FilterScore score,
                                      const NormConfig& cfg);

/// Same, from precomputed scores, keeping `count` filters and never choosing `excluded`.
std::set<OperatorId> threshold_keep(const NetworkSpec& network, const std::map<OperatorId, double>& scores,
                                    std::size_t count, const std::set<OperatorId>& excluded = {});

using RetrainHook = std::function<NetworkSpec(const NetworkSpec&, int step)>;

/// Identity hook: no retraining.
NetworkSpec no_retraining(const NetworkSpec& net, int step);

/// Iterative fine-tuning schedule. Step t keeps keep_count(step_ratio^(t+1), N0) of the
/// original N0 prunable convolutions (exactly p_ratio at the last step), selected by the
/// configured method on a graph rebuilt from the current weights, then materialized and passed
/// to the retrain hook. LEAN steps run redundancy elimination and may end below their target;
/// threshold steps keep exactly the target.
std::pair<NetworkSpec, PruneState> prune_driver(const NetworkSpec& network, const PruneConfig& cfg,
                                                const RetrainHook& retrain_hook = no_retraining);

double fraction_remaining(const PruneState& state);

/// One JSON object per line: step, method, fractions, counts, removed nodes, wall_ms.
std::string step_log_jsonl(const std::vector<StepRecord>& log);

}  // namespace lean

#endif  // LEAN_PRUNERS_HPP
