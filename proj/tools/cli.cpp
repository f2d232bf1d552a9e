// Copyright 2026 The LEAN Pruning Authors
// Licensed under the Apache License, Version 2.0

#include "cli.hpp"

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <ostream>
#include <sstream>

#include "lean/analysis.hpp"
#include "lean/container.hpp"
#include "lean/error.hpp"
#include "lean/generators.hpp"
#include "lean/opnorm.hpp"
#include "lean/prune_graph.hpp"
#include "lean/pruners.hpp"

namespace lean::cli {

namespace {

struct Options {
  bool json_errors = false;

  // gen
  std::string arch;
  int depth = 100;
  int classes = 1;
  int in_channels = 1;
  int channels = 4;
  std::uint64_t seed = 0;
  bool prunable_output = false;

  // shared
  std::string net;
  std::string out;
  int n = 64;

  // graph
  std::string format = "json";

  // prune
  std::string method = "lean";
  double ratio = 0.0;
  int steps = 1;
  double var_threshold = 1e-40;

  // report
  std::string baseline;
};

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::io: return kIoFailure;
    case ErrorCode::internal:
    case ErrorCode::contract:
    case ErrorCode::convergence: return kInternal;
    default: return kUsageOrValidation;
  }
}

void write_output(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    return;
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorCode::io, "cannot open " + path + " for writing");
  file.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!file) throw Error(ErrorCode::io, "failed writing " + path);
}

int cmd_gen(const Options& o, std::ostream& out) {
  NetworkSpec net;
  if (o.arch == "msd") {
    MsdOptions msd;
    msd.depth = o.depth;
    msd.in_channels = o.in_channels;
    msd.classes = o.classes;
    msd.seed = o.seed;
    msd.prunable_output = o.prunable_output;
    net = generate_msd(msd);
  } else {
    const auto shape = o.arch == "unet_like" ? TestNetTemplate::unet_like : TestNetTemplate::resnet_like;
    net = generate_test_net(shape, o.depth, o.channels, o.seed);
  }
  save_network(net, o.out);
  out << "wrote " << o.out << ": " << net.nodes.size() << " channels, " << net.operators.size() << " operators, "
      << prunable_conv_ids(net).size() << " prunable convolutions, " << parameter_count(net) << " parameters\n";
  return kOk;
}

int cmd_norms(const Options& o, std::ostream& out) {
  const NetworkSpec net = load_network(o.net);
  NormConfig cfg;
  cfg.n = o.n;
  std::string csv = "operator_id,kind,norm\n";
  char buf[64];
  for (const auto& op : net.operators) {
    double norm = 0.0;
    try {
      norm = operator_norm(op, cfg);
    } catch (const Error& e) {
      throw Error(e.code(), "operator " + std::to_string(op.id) + ": " + e.what());
    }
    std::snprintf(buf, sizeof buf, "%.17g", norm);
    csv += std::to_string(op.id) + "," + std::string(to_string(op.kind)) + "," + buf + "\n";
  }
  write_output(o.out, csv, out);
  return kOk;
}

int cmd_graph(const Options& o, std::ostream& out) {
  const NetworkSpec net = load_network(o.net);
  NormConfig cfg;
  cfg.n = o.n;
  const PruneGraph graph = build_graph(net, cfg);
  write_output(o.out, export_graph(graph, o.format == "dot" ? GraphFormat::dot : GraphFormat::json), out);
  return kOk;
}

int cmd_prune(const Options& o, std::ostream& out) {
  PruneConfig cfg;
  cfg.method = *parse_prune_method(o.method);
  cfg.p_ratio = o.ratio;
  cfg.n_steps = o.steps;
  cfg.var_threshold = o.var_threshold;
  cfg.norm_config.n = o.n;
  cfg.validate();

  const NetworkSpec net = load_network(o.net);
  const auto [pruned, state] = prune_driver(net, cfg);

  const std::filesystem::path dir(o.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::io, "cannot create directory " + dir.string() + ": " + ec.message());
  save_network(pruned, dir / "pruned.json");
  write_report(state, pruned, dir);

  char ratio[32];
  std::snprintf(ratio, sizeof ratio, "%.6f", cfg.step_ratio());
  out << "method " << to_string(cfg.method) << ", step_ratio " << ratio << ", fraction_remaining "
      << fraction_remaining(state) << " (" << state.retained_conv_ids.size() << "/"
      << state.original_prunable_conv_count << " convolutions) -> " << dir.string() << "\n";
  return kOk;
}

int cmd_report(const Options& o, std::ostream& out) {
  const NetworkSpec net = load_network(o.net);
  const NetworkSpec baseline = load_network(o.baseline);
  const PruneReport report = compare_networks(net, baseline);
  write_report(report, net, o.out);
  out << "flops " << report.flops_before << " -> " << report.flops_after << "; unreachable_from_input "
      << report.unreachable_from_input << ", not_reaching_output " << report.not_reaching_output << " -> "
      << o.out << "\n";
  return kOk;
}

void report_error(const Options& o, std::ostream& err, const std::string& code, const std::string& message,
                  int exit_code) {
  if (o.json_errors) {
    err << nlohmann::json{{"error", message}, {"code", code}, {"exit_code", exit_code}}.dump() << "\n";
  } else {
    err << "error: " << message << "\n";
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Channel-graph pruning for convolutional networks", "lean"};
  app.require_subcommand(1);
  app.add_flag("--json-errors", o.json_errors, "Print errors as single-line JSON on stderr");

  auto* gen = app.add_subcommand("gen", "Generate a network container");
  gen->add_option("--arch", o.arch, "Architecture")->required()->check(CLI::IsMember({"msd", "unet_like", "resnet_like"}));
  gen->add_option("--depth", o.depth, "MS-D depth, or scale levels for unet_like/resnet_like")->check(CLI::PositiveNumber);
  gen->add_option("--classes", o.classes, "MS-D output channels")->check(CLI::PositiveNumber);
  gen->add_option("--in-channels", o.in_channels, "MS-D input channels")->check(CLI::PositiveNumber);
  gen->add_option("--channels", o.channels, "Channels per layer for unet_like/resnet_like")->check(CLI::PositiveNumber);
  gen->add_flag("--prunable-output", o.prunable_output, "Allow pruning the MS-D 1x1 output layer");
  gen->add_option("--seed", o.seed, "Seed for weight initialization");
  gen->add_option("--out", o.out, "Manifest path (blob is written alongside)")->required();

  auto* norms = app.add_subcommand("norms", "Per-operator spectral norms as CSV");
  norms->add_option("--net", o.net, "Network manifest")->required();
  norms->add_option("--n", o.n, "Image size for the norm computation")->check(CLI::PositiveNumber);
  norms->add_option("--out", o.out, "CSV path (stdout if omitted)");

  auto* graph = app.add_subcommand("graph", "Export the pruning graph");
  graph->add_option("--net", o.net, "Network manifest")->required();
  graph->add_option("--format", o.format, "dot or json")->check(CLI::IsMember({"dot", "json"}));
  graph->add_option("--n", o.n, "Image size for the norm computation")->check(CLI::PositiveNumber);
  graph->add_option("--out", o.out, "Output path (stdout if omitted)");

  auto* prune = app.add_subcommand("prune", "Run the iterative pruning driver");
  prune->add_option("--net", o.net, "Network manifest")->required();
  prune->add_option("--method", o.method, "lean, magnitude or opnorm")->check(CLI::IsMember({"lean", "magnitude", "opnorm"}));
  prune->add_option("--ratio", o.ratio, "Target fraction of prunable convolutions remaining")->required();
  prune->add_option("--steps", o.steps, "Number of pruning steps");
  prune->add_option("--var-threshold", o.var_threshold, "Batchnorm running-variance redundancy cutoff");
  prune->add_option("--n", o.n, "Image size for the norm computation")->check(CLI::PositiveNumber);
  prune->add_option("--out", o.out, "Output directory")->required();

  auto* report = app.add_subcommand("report", "Compare a network against its baseline");
  report->add_option("--net", o.net, "Network manifest")->required();
  report->add_option("--baseline", o.baseline, "Baseline network manifest")->required();
  report->add_option("--out", o.out, "Output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    report_error(o, err, "usage", e.what(), kUsageOrValidation);
    err << app.help();
    return kUsageOrValidation;
  }

  try {
    if (gen->parsed()) return cmd_gen(o, out);
    if (norms->parsed()) return cmd_norms(o, out);
    if (graph->parsed()) return cmd_graph(o, out);
    if (prune->parsed()) return cmd_prune(o, out);
    if (report->parsed()) return cmd_report(o, out);
  } catch (const Error& e) {
    const int code = exit_code_for(e.code());
    report_error(o, err, std::string(to_string(e.code())), e.what(), code);
    return code;
  } catch (const std::exception& e) {
    report_error(o, err, "internal", e.what(), kInternal);
    return kInternal;
  }
  return kInternal;
}

}  // namespace lean::cli
