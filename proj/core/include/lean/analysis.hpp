// Copyright 2026 The LEAN Pruning Authors
// Licensed under the Apache License, Version 2.0

#ifndef LEAN_ANALYSIS_HPP
#define LEAN_ANALYSIS_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "lean/network.hpp"
#include "lean/pruners.hpp"

namespace lean {

/// Counting convention used by every estimate and report.
inline constexpr std::string_view kFlopsConvention =
    "2 FLOPs per multiply-accumulate; conv/conv_transposed 2*k^2*H_out*W_out; batchnorm 2*H*W; "
    "avgpool s^2*H_out*W_out; relu, identity_skip and each bias add H*W";

/// FLOPs of one operator on an input_size x input_size network input.
std::uint64_t operator_flops(const NetworkSpec& net, const OperatorDescriptor& op, int input_size);

/// Total FLOPs: every operator plus one add per pixel for each bias.
std::uint64_t flops_estimate(const NetworkSpec& net, int input_size);

/// Trainable parameters: kernel weights, biases, and batchnorm gamma/beta.
std::uint64_t parameter_count(const NetworkSpec& net);

struct Reachability {
  std::set<OperatorId> unreachable_from_input;
  std::set<OperatorId> not_reaching_output;
};

Reachability reachability_check(const NetworkSpec& net);

/// Layer-level connectivity of convolutions: cell (row, col) is set iff a conv runs from a
/// channel of layer `col` into a channel of layer `row`, so feed-forward networks fill the
/// lower triangle. Rows are layer_index values with all input channels on row 0 and all
/// output channels on the last row.
class AdjacencyMatrix {
 public:
  AdjacencyMatrix() = default;
  explicit AdjacencyMatrix(int size) : size_(size), cells_(static_cast<std::size_t>(size) * static_cast<std::size_t>(size), 0) {}

  int size() const { return size_; }
  bool at(int row, int col) const { return cells_[index(row, col)] != 0; }
  void set(int row, int col) { cells_[index(row, col)] = 1; }
  std::size_t active_count() const;

  bool operator==(const AdjacencyMatrix&) const = default;

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(size_) + static_cast<std::size_t>(col);
  }

  int size_ = 0;
  std::vector<std::uint8_t> cells_;
};

/// Throws Error{structure} if some channel has no layer_index.
AdjacencyMatrix adjacency_matrix(const NetworkSpec& net);

/// Mean |row - col| over active cells (0 for an empty matrix).
double mean_band_distance(const AdjacencyMatrix& matrix);

/// `row,col,active` lines for every cell, with a header.
std::string adjacency_csv(const AdjacencyMatrix& matrix);
/// Binary greymap (P5): 255 for active, 0 for pruned.
std::string adjacency_pgm(const AdjacencyMatrix& matrix);

inline constexpr int kReportFormatVersion = 1;

struct PruneReport {
  std::string method;
  double p_ratio_target = 1.0;
  double p_ratio_achieved = 1.0;
  std::map<std::string, std::size_t> retained_by_kind;
  std::map<std::string, std::size_t> pruned_by_kind;
  std::uint64_t flops_before = 0;
  std::uint64_t flops_after = 0;
  /// flops_before / flops_after; absent when nothing remains.
  std::optional<double> flops_reduction_factor;
  std::size_t unreachable_from_input = 0;
  std::size_t not_reaching_output = 0;
  /// Relative path of the step log, if one was written.
  std::optional<std::string> step_log;

  bool operator==(const PruneReport&) const = default;
};

/// Compares a (pruned) network against the network it was derived from.
PruneReport compare_networks(const NetworkSpec& net, const NetworkSpec& baseline);

/// Report for a finished pruning run.
PruneReport make_report(const PruneState& state);

std::string report_json(const PruneReport& report);
PruneReport report_from_json(std::string_view text);

/// Writes report.json and, when layer indices are available, adjacency.csv and
/// adjacency.pgm for `net` into `dir` (created if needed).
void write_report(const PruneReport& report, const NetworkSpec& net, const std::filesystem::path& dir);
void write_report(const PruneState& state, const NetworkSpec& net, const std::filesystem::path& dir);

}  // namespace lean

#endif  // LEAN_ANALYSIS_HPP
