// Copyright 2026 The LEAN Pruning Authors
// Licensed under the Apache License, Version 2.0

#include "lean/analysis.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>
#include <unordered_map>

#include "lean/error.hpp"

namespace lean {

namespace {

std::uint64_t pixels(const NetworkSpec& net, NodeId id, int input_size) {
  const auto* node = net.find_node(id);
  const int scale = node == nullptr ? 1 : node->spatial_scale;
  const auto side = static_cast<std::uint64_t>(input_size / scale);
  return side * side;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

std::map<std::string, std::size_t> count_by_kind(const NetworkSpec& net) {
  std::map<std::string, std::size_t> counts;
  for (const auto& op : net.operators) ++counts[std::string(to_string(op.kind))];
  return counts;
}

}  // namespace

std::uint64_t operator_flops(const NetworkSpec& net, const OperatorDescriptor& op, int input_size) {
  const std::uint64_t in = pixels(net, op.src, input_size);
  const std::uint64_t out = pixels(net, op.dst, input_size);
  switch (op.kind) {
    case OpKind::conv:
    case OpKind::conv_transposed: {
      const auto k = static_cast<std::uint64_t>(op.conv().kernel.size);
      return 2 * k * k * out;
    }
    case OpKind::batchnorm:
      return 2 * in;
    case OpKind::avgpool: {
      const auto s = static_cast<std::uint64_t>(op.pool().stride);
      return s * s * out;
    }
    case OpKind::relu:
    case OpKind::identity_skip:
      return in;
  }
  return 0;
}

std::uint64_t flops_estimate(const NetworkSpec& net, int input_size) {
  std::uint64_t total = 0;
  for (const auto& op : net.operators) total += operator_flops(net, op, input_size);
  for (const auto& b : net.biases) total += pixels(net, b.channel, input_size);
  return total;
}

std::uint64_t parameter_count(const NetworkSpec& net) {
  std::uint64_t total = net.biases.size();
  for (const auto& op : net.operators) {
    if (is_convolution(op.kind)) total += op.conv().kernel.values.size();
    if (op.kind == OpKind::batchnorm) total += 2;
  }
  return total;
}

Reachability reachability_check(const NetworkSpec& net) {
  std::unordered_map<NodeId, std::vector<const OperatorDescriptor*>> out_ops;
  std::unordered_map<NodeId, std::vector<const OperatorDescriptor*>> in_ops;
  for (const auto& op : net.operators) {
    out_ops[op.src].push_back(&op);
    in_ops[op.dst].push_back(&op);
  }
  const auto sweep = [&](NodeRole seed, bool forward) {
    std::set<NodeId> seen;
    std::vector<NodeId> stack;
    for (const auto& n : net.nodes) {
      if (n.role == seed) {
        seen.insert(n.id);
        stack.push_back(n.id);
      }
    }
    while (!stack.empty()) {
      const NodeId u = stack.back();
      stack.pop_back();
      for (const auto* op : (forward ? out_ops : in_ops)[u]) {
        const NodeId v = forward ? op->dst : op->src;
        if (seen.insert(v).second) stack.push_back(v);
      }
    }
    return seen;
  };
  const auto from_input = sweep(NodeRole::input, true);
  const auto to_output = sweep(NodeRole::output, false);

  Reachability r;
  for (const auto& op : net.operators) {
    if (from_input.count(op.src) == 0) r.unreachable_from_input.insert(op.id);
    if (to_output.count(op.dst) == 0) r.not_reaching_output.insert(op.id);
  }
  return r;
}

std::size_t AdjacencyMatrix::active_count() const {
  return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

AdjacencyMatrix adjacency_matrix(const NetworkSpec& net) {
  int max_layer = 0;
  for (const auto& n : net.nodes) {
    if (!n.layer_index) {
      throw Error(ErrorCode::structure, "adjacency_matrix: node " + std::to_string(n.id) + " has no layer_index");
    }
    max_layer = std::max(max_layer, *n.layer_index);
  }
  const int size = std::max(max_layer + 1, 2);
  const auto row_of = [&](NodeId id) {
    const auto* n = net.find_node(id);
    if (n->role == NodeRole::input) return 0;
    if (n->role == NodeRole::output) return size - 1;
    return *n->layer_index;
  };
  AdjacencyMatrix m(size);
  for (const auto& op : net.operators) {
    if (is_convolution(op.kind)) m.set(row_of(op.dst), row_of(op.src));
  }
  return m;
}

double mean_band_distance(const AdjacencyMatrix& matrix) {
  double sum = 0.0;
  std::size_t count = 0;
  for (int r = 0; r < matrix.size(); ++r) {
    for (int c = 0; c < matrix.size(); ++c) {
      if (matrix.at(r, c)) {
        sum += std::abs(r - c);
        ++count;
      }
    }
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

std::string adjacency_csv(const AdjacencyMatrix& matrix) {
  std::string out = "i,j,active\n";
  for (int r = 0; r < matrix.size(); ++r) {
    for (int c = 0; c < matrix.size(); ++c) {
      out += std::to_string(r) + "," + std::to_string(c) + "," + (matrix.at(r, c) ? "1" : "0") + "\n";
    }
  }
  return out;
}

std::string adjacency_pgm(const AdjacencyMatrix& matrix) {
  std::string out = "P5\n" + std::to_string(matrix.size()) + " " + std::to_string(matrix.size()) + "\n255\n";
  for (int r = 0; r < matrix.size(); ++r) {
    for (int c = 0; c < matrix.size(); ++c) out.push_back(static_cast<char>(matrix.at(r, c) ? 255 : 0));
  }
  return out;
}

PruneReport compare_networks(const NetworkSpec& net, const NetworkSpec& baseline) {
  PruneReport report;
  report.method = "comparison";
  const auto before = prunable_conv_ids(baseline).size();
  const auto after = prunable_conv_ids(net).size();
  report.p_ratio_target = 1.0;
  report.p_ratio_achieved = before == 0 ? 1.0 : static_cast<double>(after) / static_cast<double>(before);
  report.retained_by_kind = count_by_kind(net);
  const auto all = count_by_kind(baseline);
  const auto kept_ids = operator_ids(net);
  for (const auto& op : baseline.operators) {
    if (kept_ids.count(op.id) == 0) ++report.pruned_by_kind[std::string(to_string(op.kind))];
  }
  for (const auto& [kind, n] : all) report.pruned_by_kind.try_emplace(kind, 0);
  for (const auto& [kind, n] : all) report.retained_by_kind.try_emplace(kind, 0);
  report.flops_before = flops_estimate(baseline, baseline.input_size);
  report.flops_after = flops_estimate(net, net.input_size);
  if (report.flops_after > 0) {
    report.flops_reduction_factor =
        static_cast<double>(report.flops_before) / static_cast<double>(report.flops_after);
  }
  const auto reach = reachability_check(net);
  report.unreachable_from_input = reach.unreachable_from_input.size();
  report.not_reaching_output = reach.not_reaching_output.size();
  return report;
}

PruneReport make_report(const PruneState& state) {
  PruneReport report = compare_networks(state.network, state.original);
  report.method = std::string(to_string(state.config.method));
  report.p_ratio_target = state.config.p_ratio;
  report.p_ratio_achieved = fraction_remaining(state);
  return report;
}

std::string report_json(const PruneReport& report) {
  nlohmann::json j{{"format_version", kReportFormatVersion},
                   {"flops_convention", std::string(kFlopsConvention)},
                   {"method", report.method},
                   {"p_ratio_target", report.p_ratio_target},
                   {"p_ratio_achieved", report.p_ratio_achieved},
                   {"retained_by_kind", report.retained_by_kind},
                   {"pruned_by_kind", report.pruned_by_kind},
                   {"flops_before", report.flops_before},
                   {"flops_after", report.flops_after},
                   {"flops_reduction_factor",
                    report.flops_reduction_factor ? nlohmann::json(*report.flops_reduction_factor) : nlohmann::json()},
                   {"unreachable_from_input", report.unreachable_from_input},
                   {"not_reaching_output", report.not_reaching_output},
                   {"step_log", report.step_log ? nlohmann::json(*report.step_log) : nlohmann::json()}};
  return j.dump(1) + "\n";
}

PruneReport report_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format_version").get<int>() != kReportFormatVersion) {
      throw Error(ErrorCode::format, "report: unsupported format_version");
    }
    PruneReport r;
    r.method = j.at("method").get<std::string>();
    r.p_ratio_target = j.at("p_ratio_target").get<double>();
    r.p_ratio_achieved = j.at("p_ratio_achieved").get<double>();
    r.retained_by_kind = j.at("retained_by_kind").get<std::map<std::string, std::size_t>>();
    r.pruned_by_kind = j.at("pruned_by_kind").get<std::map<std::string, std::size_t>>();
    r.flops_before = j.at("flops_before").get<std::uint64_t>();
    r.flops_after = j.at("flops_after").get<std::uint64_t>();
    if (!j.at("flops_reduction_factor").is_null()) r.flops_reduction_factor = j.at("flops_reduction_factor").get<double>();
    r.unreachable_from_input = j.at("unreachable_from_input").get<std::size_t>();
    r.not_reaching_output = j.at("not_reaching_output").get<std::size_t>();
    if (!j.at("step_log").is_null()) r.step_log = j.at("step_log").get<std::string>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::format, std::string("report: ") + e.what());
  }
}

void write_report(const PruneReport& report, const NetworkSpec& net, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create directory " + dir.string() + ": " + ec.message());
  write_text(dir / "report.json", report_json(report));
  const bool layered = std::all_of(net.nodes.begin(), net.nodes.end(),
                                   [](const ChannelNode& n) { return n.layer_index.has_value(); });
  if (layered && !net.nodes.empty()) {
    const auto matrix = adjacency_matrix(net);
    write_text(dir / "adjacency.csv", adjacency_csv(matrix));
    write_text(dir / "adjacency.pgm", adjacency_pgm(matrix));
  }
}

void write_report(const PruneState& state, const NetworkSpec& net, const std::filesystem::path& dir) {
  PruneReport report = make_report(state);
  if (!state.step_log.empty()) report.step_log = "steps.jsonl";
  write_report(report, net, dir);
  if (report.step_log) write_text(dir / *report.step_log, step_log_jsonl(state.step_log));
}

}  // namespace lean
