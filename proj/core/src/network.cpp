// Copyright 2026 The LEAN Pruning Authors
// Licensed under the Apache License, Version 2.0

#include "lean/network.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>
#include <utility>

#include "lean/error.hpp"

namespace lean {

std::string_view to_string(NodeRole role) {
  switch (role) {
    case NodeRole::input: return "input";
    case NodeRole::hidden: return "hidden";
    case NodeRole::output: return "output";
  }
  return "hidden";
}

std::string_view to_string(OpKind kind) {
  switch (kind) {
    case OpKind::conv: return "conv";
    case OpKind::conv_transposed: return "conv_transposed";
    case OpKind::batchnorm: return "batchnorm";
    case OpKind::avgpool: return "avgpool";
    case OpKind::relu: return "relu";
    case OpKind::identity_skip: return "identity_skip";
  }
  return "relu";
}

std::optional<NodeRole> parse_node_role(std::string_view text) {
  for (auto role : {NodeRole::input, NodeRole::hidden, NodeRole::output}) {
    if (to_string(role) == text) return role;
  }
  return std::nullopt;
}

std::optional<OpKind> parse_op_kind(std::string_view text) {
  for (auto kind : {OpKind::conv, OpKind::conv_transposed, OpKind::batchnorm, OpKind::avgpool,
                    OpKind::relu, OpKind::identity_skip}) {
    if (to_string(kind) == text) return kind;
  }
  return std::nullopt;
}

std::string_view to_string(Violation::Kind kind) {
  switch (kind) {
    case Violation::Kind::duplicate_id: return "duplicate_id";
    case Violation::Kind::noncontiguous_ids: return "noncontiguous_ids";
    case Violation::Kind::dangling_reference: return "dangling_reference";
    case Violation::Kind::parameters: return "parameters";
    case Violation::Kind::role: return "role";
    case Violation::Kind::cycle: return "cycle";
    case Violation::Kind::scale: return "scale";
    case Violation::Kind::missing_io: return "missing_io";
    case Violation::Kind::not_on_path: return "not_on_path";
    case Violation::Kind::bias: return "bias";
  }
  return "unknown";
}

Kernel::Kernel(int k, std::vector<float> v) : size(k), values(std::move(v)) {}

Kernel Kernel::zeros(int k) {
  return Kernel(k, std::vector<float>(static_cast<std::size_t>(k) * static_cast<std::size_t>(k), 0.0f));
}

const ConvParams& OperatorDescriptor::conv() const {
  if (const auto* p = std::get_if<ConvParams>(&params)) return *p;
  throw Error(ErrorCode::contract, "operator " + std::to_string(id) + " has no kernel parameters");
}

const PoolParams& OperatorDescriptor::pool() const {
  if (const auto* p = std::get_if<PoolParams>(&params)) return *p;
  throw Error(ErrorCode::contract, "operator " + std::to_string(id) + " has no pooling parameters");
}

const BatchNormParams& OperatorDescriptor::batchnorm() const {
  if (const auto* p = std::get_if<BatchNormParams>(&params)) return *p;
  throw Error(ErrorCode::contract, "operator " + std::to_string(id) + " has no batchnorm parameters");
}

int OperatorDescriptor::stride() const {
  if (const auto* c = std::get_if<ConvParams>(&params)) return c->stride;
  if (const auto* p = std::get_if<PoolParams>(&params)) return p->stride;
  return 1;
}

int OperatorDescriptor::dilation() const {
  if (const auto* c = std::get_if<ConvParams>(&params)) return c->dilation;
  return 1;
}

OperatorDescriptor make_conv(OperatorId id, NodeId src, NodeId dst, Kernel kernel, int stride,
                             int dilation, bool prunable) {
  return {id, OpKind::conv, src, dst, ConvParams{std::move(kernel), stride, dilation}, prunable};
}

OperatorDescriptor make_conv_transposed(OperatorId id, NodeId src, NodeId dst, Kernel kernel,
                                        int stride, bool prunable) {
  return {id, OpKind::conv_transposed, src, dst, ConvParams{std::move(kernel), stride, 1}, prunable};
}

OperatorDescriptor make_batchnorm(OperatorId id, NodeId src, NodeId dst, BatchNormParams bn) {
  return {id, OpKind::batchnorm, src, dst, bn, true};
}

OperatorDescriptor make_avgpool(OperatorId id, NodeId src, NodeId dst, int stride) {
  return {id, OpKind::avgpool, src, dst, PoolParams{stride}, true};
}

OperatorDescriptor make_relu(OperatorId id, NodeId src, NodeId dst) {
  return {id, OpKind::relu, src, dst, std::monostate{}, true};
}

OperatorDescriptor make_identity_skip(OperatorId id, NodeId src, NodeId dst) {
  return {id, OpKind::identity_skip, src, dst, std::monostate{}, false};
}

const ChannelNode* NetworkSpec::find_node(NodeId id) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                             [](const ChannelNode& n, NodeId v) { return n.id < v; });
  if (it != nodes.end() && it->id == id) return &*it;
  // Fall back for networks that were never canonicalized.
  for (const auto& n : nodes) {
    if (n.id == id) return &n;
  }
  return nullptr;
}

const OperatorDescriptor* NetworkSpec::find_operator(OperatorId id) const {
  auto it = std::lower_bound(operators.begin(), operators.end(), id,
                             [](const OperatorDescriptor& o, OperatorId v) { return o.id < v; });
  if (it != operators.end() && it->id == id) return &*it;
  for (const auto& o : operators) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

void NetworkSpec::canonicalize() {
  std::stable_sort(nodes.begin(), nodes.end(),
                   [](const ChannelNode& a, const ChannelNode& b) { return a.id < b.id; });
  std::stable_sort(operators.begin(), operators.end(),
                   [](const OperatorDescriptor& a, const OperatorDescriptor& b) { return a.id < b.id; });
  std::stable_sort(biases.begin(), biases.end(), [](const BiasTerm& a, const BiasTerm& b) {
    return std::tie(a.channel, a.owner) < std::tie(b.channel, b.owner);
  });
}

std::set<OperatorId> prunable_conv_ids(const NetworkSpec& net) {
  std::set<OperatorId> ids;
  for (const auto& op : net.operators) {
    if (op.prunable && is_convolution(op.kind)) ids.insert(op.id);
  }
  return ids;
}

std::set<OperatorId> operator_ids(const NetworkSpec& net) {
  std::set<OperatorId> ids;
  for (const auto& op : net.operators) ids.insert(op.id);
  return ids;
}

namespace {

void add(std::vector<Violation>& out, Violation::Kind kind, std::string message,
         std::vector<std::int64_t> ids = {}) {
  out.push_back(Violation{kind, std::move(message), std::move(ids)});
}

std::string op_label(const OperatorDescriptor& op) {
  std::ostringstream s;
  s << to_string(op.kind) << " operator " << op.id << " (" << op.src << "->" << op.dst << ")";
  return s.str();
}

void check_parameters(const OperatorDescriptor& op, std::vector<Violation>& out) {
  const auto bad = [&](const std::string& why) {
    add(out, Violation::Kind::parameters, op_label(op) + ": " + why, {op.id});
  };
  switch (op.kind) {
    case OpKind::conv:
    case OpKind::conv_transposed: {
      const auto* c = std::get_if<ConvParams>(&op.params);
      if (c == nullptr) return bad("expected kernel parameters");
      if (c->kernel.size < 1) return bad("kernel size must be >= 1");
      if (c->kernel.values.size() != static_cast<std::size_t>(c->kernel.size * c->kernel.size))
        return bad("kernel value count does not match k*k");
      if (c->stride < 1) return bad("stride must be >= 1");
      if (c->dilation < 1) return bad("dilation must be >= 1");
      if (op.kind == OpKind::conv_transposed && c->dilation != 1)
        return bad("dilated transposed convolutions are not supported");
      for (float v : c->kernel.values) {
        if (!std::isfinite(v)) return bad("kernel contains a non-finite value");
      }
      break;
    }
    case OpKind::batchnorm: {
      const auto* bn = std::get_if<BatchNormParams>(&op.params);
      if (bn == nullptr) return bad("expected batchnorm parameters");
      if (!(bn->running_var >= 0.0f)) return bad("running_var must be >= 0");
      if (!(bn->epsilon > 0.0f)) return bad("epsilon must be > 0");
      if (!std::isfinite(bn->gamma) || !std::isfinite(bn->beta) || !std::isfinite(bn->running_mean))
        return bad("batchnorm contains a non-finite value");
      break;
    }
    case OpKind::avgpool: {
      const auto* p = std::get_if<PoolParams>(&op.params);
      if (p == nullptr) return bad("expected pooling parameters");
      if (p->stride < 1) return bad("stride must be >= 1");
      break;
    }
    case OpKind::relu:
    case OpKind::identity_skip:
      if (!std::holds_alternative<std::monostate>(op.params)) return bad("operator takes no parameters");
      if (op.kind == OpKind::identity_skip && op.prunable) return bad("identity_skip must be unprunable");
      break;
  }
}

void check_scale(const OperatorDescriptor& op, const ChannelNode& src, const ChannelNode& dst,
                 std::vector<Violation>& out) {
  const int s = op.stride();
  bool ok = true;
  switch (op.kind) {
    case OpKind::conv:
    case OpKind::avgpool:
      ok = dst.spatial_scale == src.spatial_scale * s;
      break;
    case OpKind::conv_transposed:
      ok = src.spatial_scale % s == 0 && dst.spatial_scale == src.spatial_scale / s;
      break;
    case OpKind::batchnorm:
    case OpKind::relu:
    case OpKind::identity_skip:
      ok = dst.spatial_scale == src.spatial_scale;
      break;
  }
  if (!ok) {
    std::ostringstream s_msg;
    s_msg << op_label(op) << " maps spatial_scale " << src.spatial_scale << " to "
          << dst.spatial_scale << " with stride " << s;
    add(out, Violation::Kind::scale, s_msg.str(), {op.id, src.id, dst.id});
  }
}

}  // namespace

std::vector<Violation> validate_network(const NetworkSpec& net) {
  std::vector<Violation> out;

  if (net.input_size < 1) add(out, Violation::Kind::scale, "input_size must be >= 1");

  std::unordered_map<NodeId, std::size_t> node_index;
  for (std::size_t i = 0; i < net.nodes.size(); ++i) {
    const auto& n = net.nodes[i];
    if (!node_index.emplace(n.id, i).second) {
      add(out, Violation::Kind::duplicate_id, "duplicate node id " + std::to_string(n.id), {n.id});
    }
    if (n.spatial_scale < 1 || (net.input_size >= 1 && net.input_size % n.spatial_scale != 0)) {
      add(out, Violation::Kind::scale,
          "node " + std::to_string(n.id) + " has spatial_scale " + std::to_string(n.spatial_scale) +
              " which does not divide input_size " + std::to_string(net.input_size),
          {n.id});
    }
    if (n.layer_index && *n.layer_index < 0) {
      add(out, Violation::Kind::parameters, "node " + std::to_string(n.id) + " has a negative layer_index",
          {n.id});
    }
  }
  if (!net.pruned && !net.nodes.empty()) {
    const auto [lo, hi] = std::minmax_element(
        net.nodes.begin(), net.nodes.end(),
        [](const ChannelNode& a, const ChannelNode& b) { return a.id < b.id; });
    if (hi->id - lo->id + 1 != static_cast<std::int64_t>(node_index.size())) {
      add(out, Violation::Kind::noncontiguous_ids, "node ids do not form a contiguous range");
    }
  }

  std::set<OperatorId> op_ids;
  std::vector<const OperatorDescriptor*> edges;
  for (const auto& op : net.operators) {
    if (!op_ids.insert(op.id).second) {
      add(out, Violation::Kind::duplicate_id, "duplicate operator id " + std::to_string(op.id), {op.id});
    }
    check_parameters(op, out);
    const bool has_src = node_index.count(op.src) != 0;
    const bool has_dst = node_index.count(op.dst) != 0;
    if (!has_src || !has_dst) {
      add(out, Violation::Kind::dangling_reference,
          op_label(op) + " references a node that does not exist", {op.id});
      continue;
    }
    edges.push_back(&op);
  }

  bool has_input = false;
  bool has_output = false;
  for (const auto& n : net.nodes) {
    has_input |= n.role == NodeRole::input;
    has_output |= n.role == NodeRole::output;
  }
  if (!has_input || !has_output) {
    add(out, Violation::Kind::missing_io, "network needs at least one input and one output node");
  }

  const std::size_t node_count = net.nodes.size();
  std::vector<std::vector<std::size_t>> succ(node_count);
  std::vector<std::vector<std::size_t>> pred(node_count);
  std::vector<std::size_t> indeg(node_count, 0);
  for (const auto* op : edges) {
    const std::size_t s = node_index.at(op->src);
    const std::size_t d = node_index.at(op->dst);
    const auto& src = net.nodes[s];
    const auto& dst = net.nodes[d];
    if (src.role == NodeRole::output) {
      add(out, Violation::Kind::role, op_label(*op) + " leaves output node " + std::to_string(src.id),
          {op->id, src.id});
    }
    if (dst.role == NodeRole::input) {
      add(out, Violation::Kind::role, op_label(*op) + " enters input node " + std::to_string(dst.id),
          {op->id, dst.id});
    }
    check_scale(*op, src, dst, out);
    succ[s].push_back(d);
    pred[d].push_back(s);
    ++indeg[d];
  }

  // Kahn's algorithm; anything left over sits on a cycle (or behind one).
  std::queue<std::size_t> ready;
  for (std::size_t i = 0; i < node_count; ++i) {
    if (indeg[i] == 0) ready.push(i);
  }
  std::size_t visited = 0;
  while (!ready.empty()) {
    const auto u = ready.front();
    ready.pop();
    ++visited;
    for (auto v : succ[u]) {
      if (--indeg[v] == 0) ready.push(v);
    }
  }
  if (visited != node_count) {
    std::vector<std::int64_t> cyclic;
    for (std::size_t i = 0; i < node_count; ++i) {
      if (indeg[i] != 0) cyclic.push_back(net.nodes[i].id);
    }
    add(out, Violation::Kind::cycle, "operator graph contains a cycle", std::move(cyclic));
  }

  if (!net.pruned) {
    const auto sweep = [&](const std::vector<std::vector<std::size_t>>& adj, NodeRole seed) {
      std::vector<char> seen(node_count, 0);
      std::vector<std::size_t> stack;
      for (std::size_t i = 0; i < node_count; ++i) {
        if (net.nodes[i].role == seed) {
          seen[i] = 1;
          stack.push_back(i);
        }
      }
      while (!stack.empty()) {
        const auto u = stack.back();
        stack.pop_back();
        for (auto v : adj[u]) {
          if (!seen[v]) {
            seen[v] = 1;
            stack.push_back(v);
          }
        }
      }
      return seen;
    };
    const auto from_input = sweep(succ, NodeRole::input);
    const auto to_output = sweep(pred, NodeRole::output);
    for (std::size_t i = 0; i < node_count; ++i) {
      if (net.nodes[i].role == NodeRole::hidden && !(from_input[i] && to_output[i])) {
        add(out, Violation::Kind::not_on_path,
            "hidden node " + std::to_string(net.nodes[i].id) + " is not on an input-to-output path",
            {net.nodes[i].id});
      }
    }
  }

  std::set<NodeId> fed_channels;
  for (const auto* op : edges) {
    if (is_convolution(op->kind) || op->kind == OpKind::batchnorm) fed_channels.insert(op->dst);
  }
  for (const auto& b : net.biases) {
    if (node_index.count(b.channel) == 0) {
      add(out, Violation::Kind::dangling_reference,
          "bias '" + b.owner + "' references missing channel " + std::to_string(b.channel), {b.channel});
    } else if (fed_channels.count(b.channel) == 0) {
      add(out, Violation::Kind::bias,
          "bias '" + b.owner + "' on channel " + std::to_string(b.channel) +
              " has no convolution or batchnorm operator feeding it",
          {b.channel});
    }
  }
  return out;
}

void require_valid(const NetworkSpec& net, std::string_view context) {
  const auto violations = validate_network(net);
  if (violations.empty()) return;
  std::ostringstream msg;
  msg << context << ": network '" << net.name << "' is invalid (" << violations.size() << " violation"
      << (violations.size() == 1 ? "" : "s") << ")";
  const std::size_t shown = std::min<std::size_t>(violations.size(), 3);
  for (std::size_t i = 0; i < shown; ++i) {
    msg << "; " << to_string(violations[i].kind) << ": " << violations[i].message;
  }
  throw Error(ErrorCode::validation, msg.str());
}

NetworkSpec materialize_pruned(const NetworkSpec& net, const std::set<OperatorId>& retained_operator_ids,
                               const std::set<NodeId>& removed_channels) {
  for (OperatorId id : retained_operator_ids) {
    if (net.find_operator(id) == nullptr) {
      throw Error(ErrorCode::contract, "retained operator " + std::to_string(id) + " is not in the network");
    }
  }
  for (const auto& op : net.operators) {
    const bool on_removed = removed_channels.count(op.src) != 0 || removed_channels.count(op.dst) != 0;
    if (!op.prunable && !on_removed && retained_operator_ids.count(op.id) == 0) {
      throw Error(ErrorCode::contract,
                  "unprunable operator " + std::to_string(op.id) + " missing from the retained set");
    }
  }
  if (retained_operator_ids.size() == net.operators.size()) return net;

  NetworkSpec out;
  out.name = net.name;
  out.input_size = net.input_size;
  out.pruned = true;

  std::set<NodeId> touched;
  std::set<NodeId> fed;
  for (const auto& op : net.operators) {
    if (retained_operator_ids.count(op.id) == 0) continue;
    out.operators.push_back(op);
    touched.insert(op.src);
    touched.insert(op.dst);
    if (is_convolution(op.kind) || op.kind == OpKind::batchnorm) fed.insert(op.dst);
  }
  for (const auto& n : net.nodes) {
    if (n.role != NodeRole::hidden || touched.count(n.id) != 0) out.nodes.push_back(n);
  }
  for (const auto& b : net.biases) {
    if (fed.count(b.channel) != 0) out.biases.push_back(b);
  }
  out.canonicalize();
  require_valid(out, "materialize_pruned");
  return out;
}

}  // namespace lean
