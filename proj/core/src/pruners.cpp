// Copyright 2026 The LEAN Pruning Authors
// Licensed under the Apache License, Version 2.0

#include "lean/pruners.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>
#include <unordered_map>

#include "lean/error.hpp"

namespace lean {

std::string_view to_string(PruneMethod method) {
  switch (method) {
    case PruneMethod::lean: return "lean";
    case PruneMethod::magnitude: return "magnitude";
    case PruneMethod::opnorm: return "opnorm";
  }
  return "lean";
}

std::optional<PruneMethod> parse_prune_method(std::string_view text) {
  for (auto m : {PruneMethod::lean, PruneMethod::magnitude, PruneMethod::opnorm}) {
    if (to_string(m) == text) return m;
  }
  return std::nullopt;
}

double PruneConfig::step_ratio() const { return std::exp(std::log(p_ratio) / n_steps); }

void PruneConfig::validate() const {
  if (!(p_ratio > 0.0 && p_ratio < 1.0)) throw Error(ErrorCode::config, "ratio must be in (0,1)");
  if (n_steps < 1) throw Error(ErrorCode::config, "steps must be >= 1");
  if (!(var_threshold >= 0.0)) throw Error(ErrorCode::config, "var-threshold must be >= 0");
  if (norm_config.n < 1) throw Error(ErrorCode::config, "n must be >= 1");
}

std::size_t keep_count(double fraction, std::size_t total) {
  const double exact = fraction * static_cast<double>(total);
  const double slack = 1e-9 * std::max(1.0, std::abs(exact));
  const double rounded = std::ceil(exact - slack);
  if (rounded <= 0.0) return 0;
  return std::min(total, static_cast<std::size_t>(rounded));
}

namespace {

bool is_prunable_conv(const GraphEdge& e) { return e.prunable && is_convolution(e.kind); }
bool is_prunable_conv(const OperatorDescriptor& op) { return op.prunable && is_convolution(op.kind); }

}  // namespace

void lean_extend(PruneGraph& graph, std::size_t target_count, LeanSelection& selection) {
  while (selection.retained_convs < target_count && graph.remaining_edge_count() > 0) {
    const Chain chain = longest_path(graph);
    remove_path(graph, chain);
    std::size_t convs = 0;
    for (auto id : chain.edges) {
      const auto* e = graph.find_edge(id);
      if (is_prunable_conv(*e)) {
        ++convs;
        selection.retained.insert(id);
      }
    }
    selection.retained_convs += convs;
    selection.max_chain_convs = std::max(selection.max_chain_convs, convs);
    ++selection.chains_extracted;
  }
}

LeanSelection lean_select(PruneGraph& graph, double target_fraction) {
  if (graph.edges().empty()) throw Error(ErrorCode::contract, "lean_select: empty pruning graph");
  if (!(target_fraction > 0.0 && target_fraction <= 1.0)) {
    throw Error(ErrorCode::config, "lean_select: target fraction must be in (0,1]");
  }
  LeanSelection selection;
  std::size_t total = 0;
  for (const auto& e : graph.edges()) {
    if (!is_prunable_conv(e)) {
      selection.retained.insert(e.id);
    } else {
      ++total;
      if (e.extracted) {
        selection.retained.insert(e.id);
        ++selection.retained_convs;
      }
    }
  }
  lean_extend(graph, keep_count(target_fraction, total), selection);
  return selection;
}

std::set<NodeId> redundancy_eliminate(const NetworkSpec& network, std::set<OperatorId>& retained,
                                      double var_threshold) {
  std::unordered_map<NodeId, std::vector<const OperatorDescriptor*>> in_ops;
  std::unordered_map<NodeId, std::vector<const OperatorDescriptor*>> out_ops;
  for (const auto& op : network.operators) {
    in_ops[op.dst].push_back(&op);
    out_ops[op.src].push_back(&op);
  }

  std::set<NodeId> removed;
  bool changed = true;
  while (changed) {
    changed = false;
    for (const auto& node : network.nodes) {
      if (node.role == NodeRole::input || removed.count(node.id) != 0) continue;

      bool fed = false;
      for (const auto* op : in_ops[node.id]) {
        if (retained.count(op->id) != 0 && removed.count(op->src) == 0) {
          fed = true;
          break;
        }
      }

      bool dead_norm = false;
      std::size_t norms = 0;
      for (const auto* op : out_ops[node.id]) {
        if (op->kind != OpKind::batchnorm || retained.count(op->id) == 0) continue;
        ++norms;
        dead_norm = static_cast<double>(op->batchnorm().running_var) < var_threshold;
        if (!dead_norm) break;
      }
      dead_norm = dead_norm && norms > 0;

      if (!fed || dead_norm) {
        removed.insert(node.id);
        for (const auto* op : in_ops[node.id]) retained.erase(op->id);
        for (const auto* op : out_ops[node.id]) retained.erase(op->id);
        changed = true;
      }
    }
  }
  return removed;
}

std::map<OperatorId, double> filter_scores(const NetworkSpec& network, FilterScore score, const NormConfig& cfg) {
  std::map<OperatorId, double> scores;
  for (const auto& op : network.operators) {
    if (!is_prunable_conv(op)) continue;
    scores[op.id] = score == FilterScore::l1 ? l1_filter_norm(op.conv().kernel) : operator_norm(op, cfg);
  }
  return scores;
}

std::set<OperatorId> threshold_keep(const NetworkSpec& network, const std::map<OperatorId, double>& scores,
                                    std::size_t count, const std::set<OperatorId>& excluded) {
  std::set<OperatorId> retained;
  std::vector<std::pair<double, OperatorId>> ranked;
  for (const auto& op : network.operators) {
    if (!is_prunable_conv(op)) {
      retained.insert(op.id);
    } else if (excluded.count(op.id) == 0) {
      ranked.emplace_back(scores.at(op.id), op.id);
    }
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  for (std::size_t i = 0; i < std::min(count, ranked.size()); ++i) retained.insert(ranked[i].second);
  return retained;
}

std::set<OperatorId> threshold_select(const NetworkSpec& network, double target_fraction, FilterScore score,
                                      const NormConfig& cfg) {
  const auto scores = filter_scores(network, score, cfg);
  return threshold_keep(network, scores, keep_count(target_fraction, scores.size()));
}

NetworkSpec no_retraining(const NetworkSpec& net, int /*step*/) { return net; }

namespace {

struct StepSelection {
  std::set<OperatorId> retained;
  std::set<NodeId> removed_nodes;
  std::size_t chains_extracted = 0;
  std::size_t max_chain_convs = 0;
  std::optional<double> threshold_used;
};

// Chains are extracted up to the target, then redundant channels are removed once. The
// elimination may leave the step below its target; it is not topped up.
StepSelection select_lean(const NetworkSpec& net, PruneGraph& graph, std::size_t target, double var_threshold) {
  LeanSelection sel;
  for (const auto& e : graph.edges()) {
    if (!is_prunable_conv(e)) sel.retained.insert(e.id);
  }
  lean_extend(graph, target, sel);

  StepSelection out;
  out.retained = std::move(sel.retained);
  out.removed_nodes = redundancy_eliminate(net, out.retained, var_threshold);
  out.chains_extracted = sel.chains_extracted;
  out.max_chain_convs = sel.max_chain_convs;
  return out;
}

// Plain global top-k. Redundancy elimination belongs to LEAN only; a threshold step may leave
// channels disconnected, and biases of channels that lose every input go with materialization.
StepSelection select_threshold(const NetworkSpec& net, FilterScore score, const NormConfig& cfg,
                               std::size_t target) {
  const auto scores = filter_scores(net, score, cfg);
  StepSelection out;
  out.retained = threshold_keep(net, scores, target, {});
  for (const auto& [id, s] : scores) {
    if (out.retained.count(id) != 0) out.threshold_used = out.threshold_used ? std::min(*out.threshold_used, s) : s;
  }
  return out;
}

}  // namespace

std::pair<NetworkSpec, PruneState> prune_driver(const NetworkSpec& network, const PruneConfig& cfg,
                                                const RetrainHook& retrain_hook) {
  cfg.validate();
  require_valid(network, "prune_driver");

  PruneState state;
  state.config = cfg;
  state.original = network;
  state.network = network;
  state.retained_conv_ids = prunable_conv_ids(network);
  state.original_prunable_conv_count = state.retained_conv_ids.size();
  if (state.original_prunable_conv_count == 0) {
    throw Error(ErrorCode::config, "network '" + network.name + "' has no prunable convolutions");
  }
  const double step_ratio = cfg.step_ratio();
  const auto original = static_cast<double>(state.original_prunable_conv_count);

  for (int step = 0; step < cfg.n_steps; ++step) {
    const auto started = std::chrono::steady_clock::now();
    const double target_fraction = step + 1 == cfg.n_steps ? cfg.p_ratio : std::pow(step_ratio, step + 1);
    const std::size_t target = keep_count(target_fraction, state.original_prunable_conv_count);

    state.graph = build_graph(state.network, cfg.norm_config);
    StepSelection sel;
    switch (cfg.method) {
      case PruneMethod::lean:
        sel = select_lean(state.network, state.graph, target, cfg.var_threshold);
        break;
      case PruneMethod::magnitude:
        sel = select_threshold(state.network, FilterScore::l1, cfg.norm_config, target);
        break;
      case PruneMethod::opnorm:
        sel = select_threshold(state.network, FilterScore::spectral, cfg.norm_config, target);
        break;
    }

    NetworkSpec next = materialize_pruned(state.network, sel.retained, sel.removed_nodes);
    NetworkSpec trained;
    try {
      trained = retrain_hook(next, step);
      require_valid(trained, "retrain hook");
    } catch (const Error& e) {
      throw Error(ErrorCode::validation, "step " + std::to_string(step) + ": " + e.what());
    }
    state.network = std::move(trained);
    state.retained_conv_ids = prunable_conv_ids(state.network);

    StepRecord record;
    record.step = step;
    record.method = cfg.method;
    record.step_ratio = step_ratio;
    record.target_fraction = target_fraction;
    record.retained_count = state.retained_conv_ids.size();
    record.fraction_remaining = static_cast<double>(record.retained_count) / original;
    record.removed_nodes.assign(sel.removed_nodes.begin(), sel.removed_nodes.end());
    record.chains_extracted = sel.chains_extracted;
    record.max_chain_convs = sel.max_chain_convs;
    record.threshold_used = sel.threshold_used;
    record.wall_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    state.step_log.push_back(std::move(record));
  }

  NetworkSpec result = state.network;
  return {std::move(result), std::move(state)};
}

double fraction_remaining(const PruneState& state) {
  if (state.original_prunable_conv_count == 0) return 1.0;
  return static_cast<double>(state.retained_conv_ids.size()) /
         static_cast<double>(state.original_prunable_conv_count);
}

std::string step_log_jsonl(const std::vector<StepRecord>& log) {
  std::string out;
  for (const auto& r : log) {
    nlohmann::json j{{"step", r.step},
                     {"method", std::string(to_string(r.method))},
                     {"step_ratio", r.step_ratio},
                     {"target_fraction", r.target_fraction},
                     {"fraction_remaining", r.fraction_remaining},
                     {"retained_count", r.retained_count},
                     {"removed_nodes", r.removed_nodes},
                     {"chains_extracted", r.chains_extracted},
                     {"max_chain_convs", r.max_chain_convs},
                     {"threshold_used", r.threshold_used ? nlohmann::json(*r.threshold_used) : nlohmann::json()},
                     {"wall_ms", r.wall_ms}};
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace lean
