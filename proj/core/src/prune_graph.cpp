// Copyright 2026 The LEAN Pruning Authors
// Licensed under the Apache License, Version 2.0

#include "lean/prune_graph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <nlohmann/json.hpp>
#include <queue>
#include <sstream>
#include <tuple>

#include "lean/error.hpp"

namespace lean {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::size_t kNone = static_cast<std::size_t>(-1);
constexpr std::size_t kBruteForceNodeLimit = 15;

double log_weight(double w) { return w > 0.0 ? std::log(w) : kNegInf; }

auto edge_key(const GraphEdge& e) { return std::make_tuple(e.src, e.dst, e.id); }

// Compares edge sequences last-to-first; a proper suffix orders first.
bool reverse_lex_less(const PruneGraph& g, const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  const auto& edges = g.edges();
  auto ia = a.rbegin();
  auto ib = b.rbegin();
  for (; ia != a.rend() && ib != b.rend(); ++ia, ++ib) {
    const auto ka = edge_key(edges[*ia]);
    const auto kb = edge_key(edges[*ib]);
    if (ka != kb) return ka < kb;
  }
  return a.size() < b.size();
}

Chain make_chain(const PruneGraph& g, const std::vector<std::size_t>& path) {
  Chain chain;
  chain.value = 1.0;
  chain.log_value = 0.0;
  for (auto idx : path) {
    const auto& e = g.edges()[idx];
    chain.edges.push_back(e.id);
    chain.value *= e.weight;
    chain.log_value += log_weight(e.weight);
  }
  return chain;
}

}  // namespace

PruneGraph::PruneGraph(std::vector<NodeId> nodes, std::vector<GraphEdge> edges)
    : nodes_(std::move(nodes)), edges_(std::move(edges)) {
  std::sort(nodes_.begin(), nodes_.end());
  std::sort(edges_.begin(), edges_.end(), [](const GraphEdge& a, const GraphEdge& b) { return a.id < b.id; });
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (!node_index_.emplace(nodes_[i], i).second) {
      throw Error(ErrorCode::build, "duplicate graph node " + std::to_string(nodes_[i]));
    }
  }
  incoming_.resize(nodes_.size());
  outgoing_.resize(nodes_.size());
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const auto& e = edges_[i];
    const std::string label = "edge " + std::to_string(e.id);
    if (!edge_index_.emplace(e.id, i).second) throw Error(ErrorCode::build, "duplicate " + label);
    const auto s = node_index_.find(e.src);
    const auto d = node_index_.find(e.dst);
    if (s == node_index_.end() || d == node_index_.end()) {
      throw Error(ErrorCode::build, label + " references an unknown node");
    }
    if (!std::isfinite(e.weight) || e.weight < 0.0) {
      throw Error(ErrorCode::build, label + " has invalid weight " + std::to_string(e.weight));
    }
    if ((e.kind == OpKind::relu || e.kind == OpKind::identity_skip) && e.weight != 1.0) {
      throw Error(ErrorCode::build, label + " is non-linear/identity but has weight != 1");
    }
    outgoing_[s->second].push_back(i);
    incoming_[d->second].push_back(i);
  }

  // Kahn's algorithm, smallest node id first, for a reproducible order.
  std::vector<std::size_t> indeg(nodes_.size());
  for (std::size_t v = 0; v < nodes_.size(); ++v) indeg[v] = incoming_[v].size();
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t v = 0; v < nodes_.size(); ++v) {
    if (indeg[v] == 0) ready.push(v);
  }
  while (!ready.empty()) {
    const auto u = ready.top();
    ready.pop();
    topo_indices_.push_back(u);
    topo_order_.push_back(nodes_[u]);
    for (auto ei : outgoing_[u]) {
      const auto v = node_index_.at(edges_[ei].dst);
      if (--indeg[v] == 0) ready.push(v);
    }
  }
  if (topo_indices_.size() != nodes_.size()) throw Error(ErrorCode::build, "pruning graph contains a cycle");
}

const GraphEdge* PruneGraph::find_edge(OperatorId id) const {
  const auto it = edge_index_.find(id);
  return it == edge_index_.end() ? nullptr : &edges_[it->second];
}

std::size_t PruneGraph::remaining_edge_count() const {
  return static_cast<std::size_t>(
      std::count_if(edges_.begin(), edges_.end(), [](const GraphEdge& e) { return !e.extracted; }));
}

void PruneGraph::mark_extracted(OperatorId id) {
  const auto it = edge_index_.find(id);
  if (it == edge_index_.end()) throw Error(ErrorCode::contract, "edge " + std::to_string(id) + " is not in the graph");
  auto& e = edges_[it->second];
  if (e.extracted) throw Error(ErrorCode::contract, "edge " + std::to_string(id) + " is already extracted");
  e.extracted = true;
}

PruneGraph build_graph(const NetworkSpec& net, const NormConfig& cfg) {
  require_valid(net, "build_graph");
  std::vector<NodeId> nodes;
  nodes.reserve(net.nodes.size());
  for (const auto& n : net.nodes) nodes.push_back(n.id);
  std::vector<GraphEdge> edges;
  edges.reserve(net.operators.size());
  for (const auto& op : net.operators) {
    double weight = 1.0;
    try {
      weight = operator_norm(op, cfg);
    } catch (const Error& e) {
      throw Error(e.code(), "operator " + std::to_string(op.id) + " (" + std::string(to_string(op.kind)) +
                                "): " + e.what());
    }
    edges.push_back(GraphEdge{op.id, op.src, op.dst, weight, op.prunable, op.kind, false});
  }
  return PruneGraph(std::move(nodes), std::move(edges));
}

Chain longest_path(const PruneGraph& graph) {
  const auto& edges = graph.edges();
  const std::size_t n = graph.nodes().size();
  std::vector<double> best(n, kNegInf);
  std::vector<std::size_t> best_edge(n, kNone);
  std::vector<char> extends(n, 0);  // best path at v continues the best path at its source

  for (auto v : graph.topo_indices()) {
    for (auto ei : graph.incoming(v)) {
      const auto& e = edges[ei];
      if (e.extracted) continue;
      const auto u = graph.node_index(e.src);
      const double lw = log_weight(e.weight);
      // Extend only when the prefix strictly increases the value; otherwise start at u.
      const bool extend = lw != kNegInf && best_edge[u] != kNone && best[u] > 0.0;
      const double candidate = extend ? best[u] + lw : lw;
      const bool better = best_edge[v] == kNone || candidate > best[v] ||
                          (candidate == best[v] && edge_key(e) < edge_key(edges[best_edge[v]]));
      if (better) {
        best[v] = candidate;
        best_edge[v] = ei;
        extends[v] = extend ? 1 : 0;
      }
    }
  }

  std::size_t end = kNone;
  for (std::size_t v = 0; v < n; ++v) {
    if (best_edge[v] == kNone) continue;
    if (end == kNone || best[v] > best[end] ||
        (best[v] == best[end] && edge_key(edges[best_edge[v]]) < edge_key(edges[best_edge[end]]))) {
      end = v;
    }
  }
  if (end == kNone) throw Error(ErrorCode::contract, "longest_path: no non-extracted edges remain");

  std::vector<std::size_t> path;
  for (std::size_t v = end;;) {
    const auto ei = best_edge[v];
    path.push_back(ei);
    if (!extends[v]) break;
    v = graph.node_index(edges[ei].src);
  }
  std::reverse(path.begin(), path.end());
  return make_chain(graph, path);
}

Chain brute_force_longest_path(const PruneGraph& graph) {
  if (graph.nodes().size() > kBruteForceNodeLimit) {
    throw Error(ErrorCode::size, "brute_force_longest_path supports at most " +
                                     std::to_string(kBruteForceNodeLimit) + " nodes");
  }
  const auto& edges = graph.edges();
  std::vector<std::size_t> best_path;
  double best_value = kNegInf;
  bool found = false;
  std::vector<std::size_t> path;

  const std::function<void(std::size_t, double)> walk = [&](std::size_t node, double value) {
    for (auto ei : graph.outgoing(node)) {
      if (edges[ei].extracted) continue;
      const double next = value + log_weight(edges[ei].weight);
      path.push_back(ei);
      if (!found || next > best_value || (next == best_value && reverse_lex_less(graph, path, best_path))) {
        best_value = next;
        best_path = path;
        found = true;
      }
      walk(graph.node_index(edges[ei].dst), next);
      path.pop_back();
    }
  };
  for (std::size_t v = 0; v < graph.nodes().size(); ++v) walk(v, 0.0);
  if (!found) throw Error(ErrorCode::contract, "brute_force_longest_path: no non-extracted edges remain");
  return make_chain(graph, best_path);
}

void remove_path(PruneGraph& graph, const Chain& chain) {
  for (auto id : chain.edges) {
    const auto* e = graph.find_edge(id);
    if (e == nullptr || e->extracted) {
      throw Error(ErrorCode::contract, "remove_path: edge " + std::to_string(id) + " is not available");
    }
  }
  for (auto id : chain.edges) graph.mark_extracted(id);
}

std::string export_graph(const PruneGraph& graph, GraphFormat format) {
  if (format == GraphFormat::dot) {
    std::ostringstream out;
    out << "digraph pruning_graph {\n";
    for (auto id : graph.nodes()) out << "  n" << id << " [label=\"" << id << "\"];\n";
    char weight[32];
    for (const auto& e : graph.edges()) {
      std::snprintf(weight, sizeof weight, "%.6g", e.weight);
      out << "  n" << e.src << " -> n" << e.dst << " [id=\"e" << e.id << "\", label=\"" << weight
          << "\", kind=\"" << to_string(e.kind) << "\"";
      if (e.extracted && !e.prunable) {
        out << ", style=\"dashed,bold\"";
      } else if (e.extracted) {
        out << ", style=dashed";
      } else if (!e.prunable) {
        out << ", style=bold";
      }
      out << "];\n";
    }
    out << "}\n";
    return out.str();
  }

  nlohmann::json edges = nlohmann::json::array();
  std::size_t prunable_convs = 0;
  std::size_t extracted = 0;
  for (const auto& e : graph.edges()) {
    edges.push_back({{"edge_id", e.id},
                     {"src", e.src},
                     {"dst", e.dst},
                     {"weight", e.weight},
                     {"prunable", e.prunable},
                     {"kind", std::string(to_string(e.kind))},
                     {"extracted", e.extracted}});
    prunable_convs += (e.prunable && is_convolution(e.kind)) ? 1 : 0;
    extracted += e.extracted ? 1 : 0;
  }
  const nlohmann::json doc{{"format_version", 1},
                           {"nodes", graph.nodes()},
                           {"edges", std::move(edges)},
                           {"topo_order", graph.topo_order()},
                           {"summary",
                            {{"nodes", graph.nodes().size()},
                             {"edges", graph.edges().size()},
                             {"prunable_conv_edges", prunable_convs},
                             {"extracted_edges", extracted}}}};
  return doc.dump(1) + "\n";
}

PruneGraph graph_from_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
    std::vector<NodeId> nodes = doc.at("nodes").get<std::vector<NodeId>>();
    std::vector<GraphEdge> edges;
    for (const auto& j : doc.at("edges")) {
      const auto kind = parse_op_kind(j.at("kind").get<std::string>());
      if (!kind) throw Error(ErrorCode::format, "graph JSON: unknown edge kind");
      edges.push_back(GraphEdge{j.at("edge_id").get<OperatorId>(), j.at("src").get<NodeId>(),
                                j.at("dst").get<NodeId>(), j.at("weight").get<double>(),
                                j.at("prunable").get<bool>(), *kind, j.at("extracted").get<bool>()});
    }
    return PruneGraph(std::move(nodes), std::move(edges));
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::format, std::string("graph JSON: ") + e.what());
  }
}

}  // namespace lean
