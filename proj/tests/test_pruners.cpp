// Copyright 2026 The LEAN Pruning Authors
// Licensed under the Apache License, Version 2.0

#include <gtest/gtest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "lean/analysis.hpp"
#include "lean/generators.hpp"
#include "lean/prune_graph.hpp"
#include "lean/pruners.hpp"

namespace lean {
namespace {

using testing::error_code_of;

GraphEdge edge(OperatorId id, NodeId src, NodeId dst, double w, bool prunable = true, OpKind kind = OpKind::conv) {
  return GraphEdge{id, src, dst, w, prunable, kind, false};
}

std::size_t count_convs(const PruneGraph& g, const std::set<OperatorId>& ids) {
  std::size_t n = 0;
  for (auto id : ids) {
    const auto* e = g.find_edge(id);
    if (e && e->prunable && is_convolution(e->kind)) ++n;
  }
  return n;
}

TEST(KeepCount, RoundsUpWithoutFloatingNoise) {
  EXPECT_EQ(keep_count(0.1, 210), 21u);
  EXPECT_EQ(keep_count(0.5, 5050), 2525u);
  EXPECT_EQ(keep_count(0.101, 100), 11u);
  EXPECT_EQ(keep_count(1.0, 7), 7u);
}

TEST(PruneConfig, StepRatioPaperSchedules) {
  PruneConfig cfg;
  cfg.p_ratio = 0.01;
  cfg.n_steps = 45;
  EXPECT_NEAR(cfg.step_ratio(), 0.9027252, 1e-7);
  for (auto [p, n] : {std::pair{0.01, 45}, std::pair{0.001, 30}, std::pair{0.1, 5}, std::pair{0.5, 1}}) {
    cfg.p_ratio = p;
    cfg.n_steps = n;
    EXPECT_NEAR(std::pow(cfg.step_ratio(), n), p, 1e-12 * p);
  }
}

TEST(PruneConfig, RatioOutsideOpenIntervalRejected) {
  for (double r : {1.5, 1.0, 0.0, -0.2}) {
    PruneConfig cfg;
    cfg.p_ratio = r;
    try {
      cfg.validate();
      FAIL() << r;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::config);
      EXPECT_NE(std::string(e.what()).find("ratio must be in (0,1)"), std::string::npos);
    }
  }
  PruneConfig cfg;
  cfg.n_steps = 0;
  EXPECT_EQ(error_code_of([&] { cfg.validate(); }), ErrorCode::config);
}

TEST(PruneMethod, ParseAndPrint) {
  for (auto m : {PruneMethod::lean, PruneMethod::magnitude, PruneMethod::opnorm})
    EXPECT_EQ(parse_prune_method(to_string(m)), m);
  EXPECT_FALSE(parse_prune_method("random").has_value());
}

TEST(LeanSelect, OneSpanningChainTakenWhole) {
  std::vector<NodeId> nodes;
  std::vector<GraphEdge> edges;
  for (int i = 0; i <= 10; ++i) nodes.push_back(i);
  for (int i = 0; i < 10; ++i) edges.push_back(edge(i, i, i + 1, 1.5));
  PruneGraph g(nodes, edges);
  const LeanSelection sel = lean_select(g, 1.0 - 1e-9);
  EXPECT_EQ(sel.chains_extracted, 1u);
  EXPECT_EQ(sel.retained.size(), 10u);
  EXPECT_EQ(sel.retained_convs, 10u);
}

TEST(LeanSelect, OvershootBoundedByCrossingChain) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> w(0.0, 3.0);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<NodeId> nodes;
    for (int i = 0; i < 10; ++i) nodes.push_back(i);
    std::vector<GraphEdge> edges;
    for (int id = 0; id < 20; ++id) {
      int a = static_cast<int>(rng() % 10), b = static_cast<int>(rng() % 10);
      if (a == b) b = (a + 1) % 10;
      if (a > b) std::swap(a, b);
      edges.push_back(edge(id, a, b, w(rng)));
    }
    PruneGraph g(nodes, edges);
    const LeanSelection sel = lean_select(g, 0.5);
    const std::size_t floor = 10;
    EXPECT_GE(sel.retained_convs, floor);
    EXPECT_LE(sel.retained_convs, floor + sel.max_chain_convs - 1);
    EXPECT_EQ(count_convs(g, sel.retained), sel.retained_convs);
  }
}

TEST(LeanSelect, UnprunableAlwaysRetainedAndNotCounted) {
  // 0 -conv-> 1 -skip-> 2 -conv-> 3, plus a weak side conv 0 -> 3.
  PruneGraph g({0, 1, 2, 3}, {edge(0, 0, 1, 2.0), edge(1, 1, 2, 1.0, false, OpKind::identity_skip),
                              edge(2, 2, 3, 2.0), edge(3, 0, 3, 0.1), edge(4, 1, 3, 1.0, false, OpKind::relu)});
  const LeanSelection sel = lean_select(g, 0.5);
  EXPECT_TRUE(sel.retained.count(1));
  EXPECT_TRUE(sel.retained.count(4));
  EXPECT_EQ(sel.retained_convs, 2u);  // the 0->1->2->3 chain
  EXPECT_FALSE(sel.retained.count(3));
}

TEST(LeanSelect, FirstChainIsTheLongestPath) {
  const NetworkSpec net = generate_test_net(TestNetTemplate::unet_like, 1, 3, 2);
  PruneGraph fresh = build_graph(net, NormConfig{});
  const Chain best = longest_path(fresh);
  PruneGraph g = fresh;
  LeanSelection sel;
  for (const auto& e : g.edges())
    if (!(e.prunable && is_convolution(e.kind))) sel.retained.insert(e.id);
  lean_extend(g, 1, sel);
  EXPECT_EQ(sel.chains_extracted, 1u);
  for (auto id : best.edges) EXPECT_TRUE(g.find_edge(id)->extracted);
}

TEST(LeanSelect, BatchnormNotCountedTowardRatio) {
  const NetworkSpec net = generate_test_net(TestNetTemplate::resnet_like, 1, 2, 0);
  PruneGraph g = build_graph(net, NormConfig{});
  const LeanSelection sel = lean_select(g, 0.3);
  const std::size_t total = prunable_conv_ids(net).size();
  EXPECT_GE(sel.retained_convs, keep_count(0.3, total));
  EXPECT_EQ(count_convs(g, sel.retained), sel.retained_convs);
}

// input(0) -conv-> 1 -bn-> 2 -conv-> output(3), plus input -conv-> output.
NetworkSpec bn_net(float var) {
  NetworkSpec net;
  net.input_size = 8;
  net.nodes = {ChannelNode{0, 0, NodeRole::input, 1}, ChannelNode{1, 1, NodeRole::hidden, 1},
               ChannelNode{2, 2, NodeRole::hidden, 1}, ChannelNode{3, 3, NodeRole::output, 1}};
  Kernel k = Kernel::zeros(3);
  k.at(1, 1) = 1.0f;
  BatchNormParams bn;
  bn.running_var = var;
  net.operators = {make_conv(0, 0, 1, k), make_batchnorm(1, 1, 2, bn), make_conv(2, 2, 3, k), make_conv(3, 0, 3, k)};
  return net;
}

TEST(RedundancyEliminate, FullyRetainedIsFixedPoint) {
  const NetworkSpec net = generate_msd(6, 1, 1, 0);
  std::set<OperatorId> retained = operator_ids(net);
  EXPECT_TRUE(redundancy_eliminate(net, retained, 1e-40).empty());
  EXPECT_EQ(retained, operator_ids(net));
}

TEST(RedundancyEliminate, NodeWithoutInputRemovedWithOutgoingEdges) {
  const NetworkSpec net = bn_net(1.0f);
  std::set<OperatorId> retained = {1, 2, 3};  // conv 0 -> 1 pruned
  const auto removed = redundancy_eliminate(net, retained, 1e-40);
  EXPECT_EQ(removed, (std::set<NodeId>{1, 2}));
  EXPECT_EQ(retained, std::set<OperatorId>{3});
}

TEST(RedundancyEliminate, TinyVarianceBatchnormRemovesConvNode) {
  const NetworkSpec net = bn_net(1e-45f);
  std::set<OperatorId> retained = operator_ids(net);
  const auto removed = redundancy_eliminate(net, retained, 1e-40);
  EXPECT_TRUE(removed.count(1));
  EXPECT_EQ(retained, std::set<OperatorId>{3});
  // A healthy variance is left alone.
  const NetworkSpec ok = bn_net(1e-3f);
  retained = operator_ids(ok);
  EXPECT_TRUE(redundancy_eliminate(ok, retained, 1e-40).empty());
}

TEST(RedundancyEliminate, UnprunableEdgesGoOnlyWithTheirChannel) {
  const NetworkSpec net = generate_test_net(TestNetTemplate::resnet_like, 2, 2, 1);
  std::set<OperatorId> retained;
  for (const auto& op : net.operators)
    if (!op.prunable || op.id % 3 == 0) retained.insert(op.id);
  const auto removed = redundancy_eliminate(net, retained, 1e-40);
  ASSERT_FALSE(removed.empty());
  for (const auto& op : net.operators) {
    if (op.prunable) continue;
    const bool on_removed = removed.count(op.src) || removed.count(op.dst);
    EXPECT_EQ(retained.count(op.id) == 0, on_removed) << op.id;
  }
}

TEST(RedundancyEliminate, DeadHiddenChannelTakesItsOutputEdge) {
  const NetworkSpec net = generate_msd(3, 1, 1, 0);
  // Drop the only conv into hidden channel 1 (input -> layer 1).
  std::set<OperatorId> retained = operator_ids(net);
  for (const auto& op : net.operators)
    if (op.src == 0 && op.dst == 1) retained.erase(op.id);
  const auto removed = redundancy_eliminate(net, retained, 1e-40);
  EXPECT_EQ(removed, std::set<NodeId>{1});
  for (const auto& op : net.operators) {
    if (op.src == 1) EXPECT_FALSE(retained.count(op.id)) << op.id;
  }
  const NetworkSpec pruned = materialize_pruned(net, retained, removed);
  EXPECT_TRUE(validate_network(pruned).empty());
  EXPECT_TRUE(reachability_check(pruned).unreachable_from_input.empty());
}

TEST(ThresholdKeep, HigherScoreWins) {
  NetworkSpec net = testing::chain_net(2);
  const auto kept = threshold_keep(net, {{0, 6.0}, {1, 1.0}}, 1);
  EXPECT_EQ(kept, std::set<OperatorId>{0});
}

TEST(ThresholdKeep, TiesKeepLowerIds) {
  NetworkSpec net = testing::chain_net(6);
  std::map<OperatorId, double> scores;
  for (OperatorId i = 0; i < 6; ++i) scores[i] = 2.0;
  EXPECT_EQ(threshold_keep(net, scores, 3), (std::set<OperatorId>{0, 1, 2}));
  EXPECT_EQ(threshold_keep(net, scores, 3, {1}), (std::set<OperatorId>{0, 2, 3}));
}

TEST(ThresholdSelect, HalfOfTwoFilters) {
  NetworkSpec net = testing::chain_net(2);
  net.operators[0].params = ConvParams{Kernel(3, {1, -2, 0, 3, 0, 0, 0, 0, 0}), 1, 1};
  net.operators[1].params = ConvParams{Kernel(3, {1, 0, 0, 0, 0, 0, 0, 0, 0}), 1, 1};
  EXPECT_EQ(threshold_select(net, 0.5, FilterScore::l1, NormConfig{}), std::set<OperatorId>{0});
}

TEST(ThresholdSelect, L1AndSpectralDisagreeOnRandomWeights) {
  const NetworkSpec net = generate_msd(10, 1, 1, 3);
  const auto by_l1 = threshold_select(net, 0.5, FilterScore::l1, NormConfig{});
  const auto by_norm = threshold_select(net, 0.5, FilterScore::spectral, NormConfig{});
  EXPECT_EQ(by_l1.size(), by_norm.size());
  EXPECT_NE(by_l1, by_norm);
}

TEST(ThresholdSelect, UnprunableAlwaysKept) {
  const NetworkSpec net = generate_test_net(TestNetTemplate::unet_like, 2, 2, 0);
  const auto kept = threshold_select(net, 0.2, FilterScore::spectral, NormConfig{});
  for (const auto& op : net.operators)
    if (!(op.prunable && is_convolution(op.kind))) EXPECT_TRUE(kept.count(op.id));
}

TEST(FractionRemaining, Basics) {
  const NetworkSpec net = generate_msd(100, 1, 1, 0);
  PruneState state;
  state.original_prunable_conv_count = 5050;
  state.retained_conv_ids = prunable_conv_ids(net);
  EXPECT_EQ(fraction_remaining(state), 1.0);
  std::set<OperatorId> half;
  for (auto id : state.retained_conv_ids)
    if (half.size() < 2525) half.insert(id);
  state.retained_conv_ids = half;
  EXPECT_EQ(fraction_remaining(state), 0.5);
}

PruneConfig config(PruneMethod method, double ratio, int steps) {
  PruneConfig cfg;
  cfg.method = method;
  cfg.p_ratio = ratio;
  cfg.n_steps = steps;
  return cfg;
}

TEST(PruneDriver, SingleMagnitudeStepKeepsHalf) {
  const NetworkSpec net = generate_msd(10, 1, 1, 6);
  const auto [pruned, state] = prune_driver(net, config(PruneMethod::magnitude, 0.5, 1));
  ASSERT_EQ(state.step_log.size(), 1u);
  EXPECT_EQ(state.retained_conv_ids.size(), 28u);
  EXPECT_EQ(prunable_conv_ids(pruned).size(), 28u);
  ASSERT_TRUE(state.step_log[0].threshold_used.has_value());
}

TEST(PruneDriver, LeanMsdDepth20) {
  const NetworkSpec net = generate_msd(20, 1, 1, 1);
  const auto [pruned, state] = prune_driver(net, config(PruneMethod::lean, 0.1, 5));
  ASSERT_EQ(state.step_log.size(), 5u);
  const double f = fraction_remaining(state);
  std::size_t max_chain = 0;
  for (const auto& s : state.step_log) max_chain = std::max(max_chain, s.max_chain_convs);
  EXPECT_GE(f, 0.1);
  EXPECT_LE(f, 0.1 + static_cast<double>(max_chain) / 210.0);
  EXPECT_TRUE(reachability_check(pruned).unreachable_from_input.empty());
  EXPECT_TRUE(validate_network(pruned).empty());
}

TEST(PruneDriver, InvariantsAcrossMethodsAndNets) {
  const std::vector<NetworkSpec> nets = {generate_msd(12, 1, 2, 4),
                                         generate_test_net(TestNetTemplate::unet_like, 2, 2, 4),
                                         generate_test_net(TestNetTemplate::resnet_like, 2, 2, 4)};
  for (const auto& net : nets) {
    const auto original_ids = operator_ids(net);
    for (auto method : {PruneMethod::lean, PruneMethod::magnitude, PruneMethod::opnorm}) {
      for (double ratio : {0.05, 0.3, 0.7}) {
        std::vector<NetworkSpec> per_step;
        const auto hook = [&](const NetworkSpec& n, int) {
          per_step.push_back(n);
          return n;
        };
        const auto [pruned, state] = prune_driver(net, config(method, ratio, 3), hook);
        const std::string ctx = net.name + " " + std::string(to_string(method)) + " " + std::to_string(ratio);
        ASSERT_EQ(per_step.size(), 3u) << ctx;
        double previous = 1.0;
        std::set<NodeId> removed;
        for (std::size_t t = 0; t < per_step.size(); ++t) {
          const auto ids = operator_ids(per_step[t]);
          // Conservation: the retained set is a subset of the original; the rest is pruned.
          for (auto id : ids) EXPECT_TRUE(original_ids.count(id)) << ctx;
          // Unprunable safety: only a removed channel takes its unprunable edges along.
          for (const auto& r : state.step_log[t].removed_nodes) removed.insert(r);
          for (const auto& op : net.operators) {
            if (op.prunable || removed.count(op.src) || removed.count(op.dst)) continue;
            EXPECT_TRUE(ids.count(op.id)) << ctx << " step " << t << " op " << op.id;
          }
          // Monotonicity.
          EXPECT_LE(state.step_log[t].fraction_remaining, previous) << ctx;
          previous = state.step_log[t].fraction_remaining;
          EXPECT_TRUE(validate_network(per_step[t]).empty()) << ctx;
        }
        const double target = ratio;
        if (method == PruneMethod::lean) {
          std::size_t max_chain = 0;
          for (const auto& s : state.step_log) max_chain = std::max(max_chain, s.max_chain_convs);
          EXPECT_LE(fraction_remaining(state),
                    target + static_cast<double>(max_chain) / static_cast<double>(state.original_prunable_conv_count))
              << ctx;
          if (net.name == "msd") EXPECT_GE(fraction_remaining(state), target - 1e-12) << ctx;
          // LEAN connectivity: no retained conv is cut off from the inputs.
          const auto reach = reachability_check(pruned);
          for (auto id : reach.unreachable_from_input)
            EXPECT_FALSE(is_convolution(pruned.find_operator(id)->kind)) << ctx << " conv " << id;
        } else {
          EXPECT_EQ(state.retained_conv_ids.size(), keep_count(target, state.original_prunable_conv_count)) << ctx;
          for (const auto& s : state.step_log) EXPECT_TRUE(s.removed_nodes.empty()) << ctx;
        }
      }
    }
  }
}

TEST(PruneDriver, Deterministic) {
  const NetworkSpec net = generate_msd(15, 1, 1, 2);
  for (auto method : {PruneMethod::lean, PruneMethod::magnitude, PruneMethod::opnorm}) {
    const auto a = prune_driver(net, config(method, 0.2, 3));
    const auto b = prune_driver(net, config(method, 0.2, 3));
    EXPECT_EQ(a.first, b.first);
    EXPECT_EQ(a.second.retained_conv_ids, b.second.retained_conv_ids);
    ASSERT_EQ(a.second.step_log.size(), b.second.step_log.size());
    for (std::size_t i = 0; i < a.second.step_log.size(); ++i) {
      auto x = a.second.step_log[i], y = b.second.step_log[i];
      x.wall_ms = y.wall_ms = 0;
      EXPECT_EQ(step_log_jsonl({x}), step_log_jsonl({y}));
    }
  }
}

TEST(PruneDriver, InvalidHookResultAbortsWithStep) {
  const NetworkSpec net = generate_msd(5, 1, 1, 0);
  const auto hook = [](const NetworkSpec& n, int step) {
    NetworkSpec out = n;
    if (step == 1) out.operators.push_back(make_conv(9999, out.nodes.back().id, out.nodes.front().id, Kernel::zeros(1)));
    return out;
  };
  try {
    prune_driver(net, config(PruneMethod::lean, 0.5, 3), hook);
    FAIL() << "expected a validation error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::validation);
    EXPECT_NE(std::string(e.what()).find("step 1"), std::string::npos) << e.what();
  }
}

TEST(PruneDriver, HookSeesEveryStep) {
  const NetworkSpec net = generate_msd(8, 1, 1, 0);
  std::vector<int> steps;
  prune_driver(net, config(PruneMethod::opnorm, 0.3, 4), [&](const NetworkSpec& n, int step) {
    steps.push_back(step);
    return n;
  });
  EXPECT_EQ(steps, (std::vector<int>{0, 1, 2, 3}));
}

TEST(PruneDriver, NearOneRatioKeepsEverything) {
  const NetworkSpec net = generate_msd(10, 1, 1, 1);
  for (auto method : {PruneMethod::lean, PruneMethod::magnitude, PruneMethod::opnorm}) {
    const auto [pruned, state] = prune_driver(net, config(method, 0.99, 1));
    EXPECT_LE(net.operators.size() - pruned.operators.size(), 1u) << to_string(method);
  }
}

TEST(StepLog, JsonLinesSchema) {
  const NetworkSpec net = generate_msd(6, 1, 1, 1);
  const auto [pruned, state] = prune_driver(net, config(PruneMethod::lean, 0.3, 2));
  const std::string text = step_log_jsonl(state.step_log);
  std::istringstream lines(text);
  int count = 0;
  for (std::string line; std::getline(lines, line); ++count) {
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"step", "method", "fraction_remaining", "retained_count", "removed_nodes", "wall_ms",
                            "step_ratio"})
      EXPECT_TRUE(j.contains(key)) << key;
    EXPECT_EQ(j["step"], count);
  }
  EXPECT_EQ(count, 2);
}

}  // namespace
}  // namespace lean
