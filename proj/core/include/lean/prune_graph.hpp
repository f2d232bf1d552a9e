// Copyright 2026 The LEAN Pruning Authors
// Licensed under the Apache License, Version 2.0

#ifndef LEAN_PRUNE_GRAPH_HPP
#define LEAN_PRUNE_GRAPH_HPP

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "lean/network.hpp"
#include "lean/opnorm.hpp"

namespace lean {

/// One operator of the network as a weighted edge between two channel nodes.
struct GraphEdge {
  OperatorId id = 0;
  NodeId src = 0;
  NodeId dst = 0;
  double weight = 1.0;
  bool prunable = true;
  OpKind kind = OpKind::conv;
  bool extracted = false;

  bool operator==(const GraphEdge&) const = default;
};

/// Channel-level DAG with operator-norm edge weights. Multi-edges are allowed.
/// Edges are kept sorted by id; topological order is cached at construction.
class PruneGraph {
 public:
  PruneGraph() = default;

  /// Throws Error{build} if an edge references an unknown node, a weight is negative or
  /// non-finite, a relu/identity_skip edge has weight != 1, or the graph has a cycle.
  PruneGraph(std::vector<NodeId> nodes, std::vector<GraphEdge> edges);

  const std::vector<NodeId>& nodes() const { return nodes_; }
  const std::vector<GraphEdge>& edges() const { return edges_; }
  const std::vector<NodeId>& topo_order() const { return topo_order_; }

  const GraphEdge* find_edge(OperatorId id) const;
  std::size_t remaining_edge_count() const;

  /// Marks one edge extracted; throws Error{contract} if unknown or already extracted.
  void mark_extracted(OperatorId id);

  // Dense indexing used by the path routines.
  std::size_t node_index(NodeId id) const { return node_index_.at(id); }
  const std::vector<std::size_t>& incoming(std::size_t node) const { return incoming_[node]; }
  const std::vector<std::size_t>& outgoing(std::size_t node) const { return outgoing_[node]; }
  const std::vector<std::size_t>& topo_indices() const { return topo_indices_; }

  bool operator==(const PruneGraph& other) const {
    return nodes_ == other.nodes_ && edges_ == other.edges_ && topo_order_ == other.topo_order_;
  }

 private:
  std::vector<NodeId> nodes_;
  std::vector<GraphEdge> edges_;
  std::vector<NodeId> topo_order_;
  std::vector<std::size_t> topo_indices_;
  std::unordered_map<NodeId, std::size_t> node_index_;
  std::unordered_map<OperatorId, std::size_t> edge_index_;
  std::vector<std::vector<std::size_t>> incoming_;
  std::vector<std::vector<std::size_t>> outgoing_;
};

/// A directed path of edges, valued by the product of its weights.
struct Chain {
  std::vector<OperatorId> edges;
  double value = 0.0;
  /// Sum of log-weights along the path; -infinity iff some edge has weight 0.
  double log_value = 0.0;
};

/// One node per channel, one edge per operator, weighted by operator_norm.
PruneGraph build_graph(const NetworkSpec& net, const NormConfig& cfg);

/// Maximum-product path over non-extracted edges (any start, any end, >= 1 edge), by a
/// single dynamic program in topological order over log-weights. Among equal values the
/// path whose edges, compared last-to-first by (src, dst, id), are smallest wins; a path
/// that is a suffix of another is preferred. Throws Error{contract} on an exhausted graph.
Chain longest_path(const PruneGraph& graph);

/// Enumerates every path (graphs of at most 15 nodes); same ordering as longest_path.
Chain brute_force_longest_path(const PruneGraph& graph);

/// Marks the chain's edges as extracted.
void remove_path(PruneGraph& graph, const Chain& chain);

enum class GraphFormat { dot, json };

std::string export_graph(const PruneGraph& graph, GraphFormat format);

/// Inverse of the JSON export.
PruneGraph graph_from_json(std::string_view text);

}  // namespace lean

#endif  // LEAN_PRUNE_GRAPH_HPP
