// Copyright 2026 The LEAN Pruning Authors
// Licensed under the Apache License, Version 2.0

#ifndef LEAN_NETWORK_HPP
#define LEAN_NETWORK_HPP

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

namespace lean {

using NodeId = std::int64_t;
using OperatorId = std::int64_t;

enum class NodeRole { input, hidden, output };

enum class OpKind { conv, conv_transposed, batchnorm, avgpool, relu, identity_skip };

std::string_view to_string(NodeRole role);
std::string_view to_string(OpKind kind);
std::optional<NodeRole> parse_node_role(std::string_view text);
std::optional<OpKind> parse_op_kind(std::string_view text);

/// True for the two kinds that carry a learned filter and count toward the pruning ratio.
constexpr bool is_convolution(OpKind kind) {
  return kind == OpKind::conv || kind == OpKind::conv_transposed;
}

/// One channel of the network. spatial_scale is the divisor of the input resolution.
struct ChannelNode {
  NodeId id = 0;
  std::optional<int> layer_index;
  NodeRole role = NodeRole::hidden;
  int spatial_scale = 1;

  bool operator==(const ChannelNode&) const = default;
};

/// Square k x k filter, row-major. Stored in single precision to match the container.
struct Kernel {
  int size = 0;
  std::vector<float> values;

  Kernel() = default;
  Kernel(int k, std::vector<float> v);
  static Kernel zeros(int k);

  float at(int row, int col) const { return values[static_cast<std::size_t>(row * size + col)]; }
  float& at(int row, int col) { return values[static_cast<std::size_t>(row * size + col)]; }

  bool operator==(const Kernel&) const = default;
};

struct ConvParams {
  Kernel kernel;
  int stride = 1;
  int dilation = 1;

  bool operator==(const ConvParams&) const = default;
};

struct PoolParams {
  int stride = 2;

  bool operator==(const PoolParams&) const = default;
};

struct BatchNormParams {
  float gamma = 1.0f;
  float beta = 0.0f;
  float running_mean = 0.0f;
  float running_var = 1.0f;
  float epsilon = 1e-5f;

  bool operator==(const BatchNormParams&) const = default;
};

/// Parameter payload; which alternative is populated is fixed by the operator kind.
using OperatorParams = std::variant<std::monostate, ConvParams, PoolParams, BatchNormParams>;

struct OperatorDescriptor {
  OperatorId id = 0;
  OpKind kind = OpKind::relu;
  NodeId src = 0;
  NodeId dst = 0;
  OperatorParams params;
  bool prunable = true;

  const ConvParams& conv() const;
  const PoolParams& pool() const;
  const BatchNormParams& batchnorm() const;

  /// Stride for conv, conv_transposed and avgpool; 1 otherwise.
  int stride() const;
  /// Dilation for conv kinds; 1 otherwise.
  int dilation() const;

  bool operator==(const OperatorDescriptor&) const = default;
};

OperatorDescriptor make_conv(OperatorId id, NodeId src, NodeId dst, Kernel kernel, int stride = 1,
                             int dilation = 1, bool prunable = true);
OperatorDescriptor make_conv_transposed(OperatorId id, NodeId src, NodeId dst, Kernel kernel,
                                        int stride, bool prunable = true);
OperatorDescriptor make_batchnorm(OperatorId id, NodeId src, NodeId dst, BatchNormParams bn);
OperatorDescriptor make_avgpool(OperatorId id, NodeId src, NodeId dst, int stride);
OperatorDescriptor make_relu(OperatorId id, NodeId src, NodeId dst);
OperatorDescriptor make_identity_skip(OperatorId id, NodeId src, NodeId dst);

/// Additive bias of one output channel of a layer. Not part of the pruning graph.
struct BiasTerm {
  std::string owner;
  NodeId channel = 0;
  float value = 0.0f;

  bool operator==(const BiasTerm&) const = default;
};

/// A CNN as a channel-level operator DAG.
///
/// `pruned` marks networks produced by materialize_pruned: such networks may have gaps in
/// their node id range and hidden channels that no longer lie on an input-to-output path.
struct NetworkSpec {
  std::string name;
  int input_size = 64;
  bool pruned = false;
  std::vector<ChannelNode> nodes;
  std::vector<OperatorDescriptor> operators;
  std::vector<BiasTerm> biases;

  const ChannelNode* find_node(NodeId id) const;
  const OperatorDescriptor* find_operator(OperatorId id) const;

  /// Sorts nodes, operators and biases into their canonical (id) order.
  void canonicalize();

  bool operator==(const NetworkSpec&) const = default;
};

/// Prunable conv / conv_transposed operator ids.
std::set<OperatorId> prunable_conv_ids(const NetworkSpec& net);
std::set<OperatorId> operator_ids(const NetworkSpec& net);

struct Violation {
  enum class Kind {
    duplicate_id,
    noncontiguous_ids,
    dangling_reference,
    parameters,
    role,
    cycle,
    scale,
    missing_io,
    not_on_path,
    bias,
  };
  Kind kind;
  std::string message;
  std::vector<std::int64_t> ids;
};

std::string_view to_string(Violation::Kind kind);

/// Checks every NetworkSpec invariant; returns one record per failure (never throws).
std::vector<Violation> validate_network(const NetworkSpec& net);

/// Throws Error{validation} carrying the first violations if the network is invalid.
void require_valid(const NetworkSpec& net, std::string_view context);

/// Copy of `net` holding only `retained_operator_ids`. Biases whose channel keeps no
/// conv/batchnorm input are dropped, as are hidden channels left without operators.
/// Input and output channels are always kept. Every unprunable operator must be retained
/// unless it touches one of `removed_channels`.
NetworkSpec materialize_pruned(const NetworkSpec& net, const std::set<OperatorId>& retained_operator_ids,
                               const std::set<NodeId>& removed_channels = {});

}  // namespace lean

#endif  // LEAN_NETWORK_HPP
