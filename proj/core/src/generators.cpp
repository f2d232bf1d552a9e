// Copyright 2026 The LEAN Pruning Authors
// Licensed under the Apache License, Version 2.0

#include "lean/generators.hpp"

#include <string>
#include <vector>

#include "lean/error.hpp"
#include "random.hpp"

namespace lean {

namespace {

// Weights are drawn from normal(0, 1/k^2), i.e. standard deviation 1/k.
Kernel random_kernel(detail::NormalSource& rng, int k) {
  Kernel kernel = Kernel::zeros(k);
  const double stddev = 1.0 / k;
  for (auto& v : kernel.values) v = static_cast<float>(rng.normal(0.0, stddev));
  return kernel;
}

class NetBuilder {
 public:
  NetBuilder(std::string name, int input_size, std::uint64_t seed) : rng_(seed) {
    net_.name = std::move(name);
    net_.input_size = input_size;
  }

  NodeId node(int layer, NodeRole role, int scale) {
    const NodeId id = static_cast<NodeId>(net_.nodes.size());
    net_.nodes.push_back(ChannelNode{id, layer, role, scale});
    return id;
  }

  std::vector<NodeId> layer(int layer_index, int count, NodeRole role, int scale) {
    std::vector<NodeId> ids;
    for (int i = 0; i < count; ++i) ids.push_back(node(layer_index, role, scale));
    return ids;
  }

  OperatorId next_op() { return static_cast<OperatorId>(net_.operators.size()); }

  void conv(NodeId src, NodeId dst, int k, int stride = 1, int dilation = 1, bool prunable = true) {
    net_.operators.push_back(make_conv(next_op(), src, dst, random_kernel(rng_, k), stride, dilation, prunable));
  }

  void conv_transposed(NodeId src, NodeId dst, int k, int stride) {
    net_.operators.push_back(make_conv_transposed(next_op(), src, dst, random_kernel(rng_, k), stride));
  }

  void batchnorm(NodeId src, NodeId dst) {
    BatchNormParams bn;
    bn.gamma = static_cast<float>(rng_.normal(1.0, 0.25));
    bn.beta = static_cast<float>(rng_.normal(0.0, 0.1));
    bn.running_mean = static_cast<float>(rng_.normal(0.0, 0.1));
    bn.running_var = static_cast<float>(0.5 + rng_.uniform());
    bn.epsilon = 1e-5f;
    net_.operators.push_back(make_batchnorm(next_op(), src, dst, bn));
  }

  void avgpool(NodeId src, NodeId dst, int stride) { net_.operators.push_back(make_avgpool(next_op(), src, dst, stride)); }
  void relu(NodeId src, NodeId dst) { net_.operators.push_back(make_relu(next_op(), src, dst)); }
  void skip(NodeId src, NodeId dst) { net_.operators.push_back(make_identity_skip(next_op(), src, dst)); }

  void bias(const std::string& owner, NodeId channel) {
    net_.biases.push_back(BiasTerm{owner, channel, static_cast<float>(rng_.normal(0.0, 0.1))});
  }

  /// Dense conv layer from every channel in `from` to every channel in `to`, plus biases.
  void conv_layer(const std::string& owner, const std::vector<NodeId>& from, const std::vector<NodeId>& to, int k,
                  int stride = 1, int dilation = 1) {
    for (NodeId dst : to) {
      for (NodeId src : from) conv(src, dst, k, stride, dilation);
      bias(owner, dst);
    }
  }

  void batchnorm_relu(const std::vector<NodeId>& from, const std::vector<NodeId>& mid, const std::vector<NodeId>& to) {
    for (std::size_t c = 0; c < from.size(); ++c) batchnorm(from[c], mid[c]);
    for (std::size_t c = 0; c < mid.size(); ++c) relu(mid[c], to[c]);
  }

  NetworkSpec finish() {
    net_.canonicalize();
    require_valid(net_, "generator '" + net_.name + "'");
    return std::move(net_);
  }

 private:
  NetworkSpec net_;
  detail::NormalSource rng_;
};

NetworkSpec unet_like(int levels, int channels, std::uint64_t seed, int input_size) {
  NetBuilder b("unet_like", input_size, seed);
  int layer = 0;
  const auto input = b.layer(layer++, 1, NodeRole::input, 1);

  // conv -> batchnorm -> relu, returning the relu outputs.
  const auto block = [&](const std::string& owner, const std::vector<NodeId>& from, int scale, int k) {
    const auto pre = b.layer(layer++, channels, NodeRole::hidden, scale);
    b.conv_layer(owner, from, pre, k);
    const auto normed = b.layer(layer++, channels, NodeRole::hidden, scale);
    const auto act = b.layer(layer++, channels, NodeRole::hidden, scale);
    b.batchnorm_relu(pre, normed, act);
    return act;
  };

  std::vector<std::vector<NodeId>> encoder;
  encoder.push_back(block("enc0.conv", input, 1, 3));
  for (int l = 1; l <= levels; ++l) {
    const int scale = 1 << l;
    const auto pooled = b.layer(layer++, channels, NodeRole::hidden, scale);
    for (int c = 0; c < channels; ++c) b.avgpool(encoder.back()[static_cast<std::size_t>(c)], pooled[static_cast<std::size_t>(c)], 2);
    encoder.push_back(block("enc" + std::to_string(l) + ".conv", pooled, scale, 3));
  }

  auto current = encoder.back();
  for (int l = levels; l >= 1; --l) {
    const int scale = 1 << (l - 1);
    const auto up = b.layer(layer, channels, NodeRole::hidden, scale);
    const auto copies = b.layer(layer++, channels, NodeRole::hidden, scale);
    for (NodeId dst : up) {
      for (NodeId src : current) b.conv_transposed(src, dst, 2, 2);
      b.bias("dec" + std::to_string(l) + ".up", dst);
    }
    const auto& skip_source = encoder[static_cast<std::size_t>(l - 1)];
    for (std::size_t c = 0; c < copies.size(); ++c) b.skip(skip_source[c], copies[c]);
    std::vector<NodeId> concat = up;
    concat.insert(concat.end(), copies.begin(), copies.end());
    current = block("dec" + std::to_string(l) + ".conv", concat, scale, 3);
  }

  const auto output = b.layer(layer, 1, NodeRole::output, 1);
  b.conv_layer("out.conv", current, output, 1);
  return b.finish();
}

NetworkSpec resnet_like(int levels, int channels, std::uint64_t seed, int input_size) {
  NetBuilder b("resnet_like", input_size, seed);
  int layer = 0;
  const auto input = b.layer(layer++, 1, NodeRole::input, 1);

  const auto conv_bn = [&](const std::string& owner, const std::vector<NodeId>& from, int scale, int stride,
                           int dilation) {
    const auto pre = b.layer(layer++, channels, NodeRole::hidden, scale);
    b.conv_layer(owner, from, pre, 3, stride, dilation);
    const auto normed = b.layer(layer++, channels, NodeRole::hidden, scale);
    for (std::size_t c = 0; c < pre.size(); ++c) b.batchnorm(pre[c], normed[c]);
    return normed;
  };
  const auto relu = [&](const std::vector<NodeId>& from, int scale) {
    const auto act = b.layer(layer++, channels, NodeRole::hidden, scale);
    for (std::size_t c = 0; c < from.size(); ++c) b.relu(from[c], act[c]);
    return act;
  };

  auto x = relu(conv_bn("stem.conv", input, 1, 1, 1), 1);
  for (int l = 0; l < levels; ++l) {
    const int scale = 1 << l;
    const std::string prefix = "block" + std::to_string(l);
    if (l > 0) x = relu(conv_bn(prefix + ".down", x, scale, 2, 1), scale);
    const auto mid = relu(conv_bn(prefix + ".conv1", x, scale, 1, 1), scale);
    const int dilation = (l == levels - 1 && levels > 1) ? 2 : 1;
    const auto sum = conv_bn(prefix + ".conv2", mid, scale, 1, dilation);
    for (std::size_t c = 0; c < x.size(); ++c) b.skip(x[c], sum[c]);
    x = relu(sum, scale);
  }

  const auto output = b.layer(layer, 1, NodeRole::output, 1 << (levels - 1));
  b.conv_layer("out.conv", x, output, 1);
  return b.finish();
}

}  // namespace

NetworkSpec generate_msd(const MsdOptions& options) {
  if (options.depth < 1 || options.in_channels < 1 || options.classes < 1) {
    throw Error(ErrorCode::config, "generate_msd: depth, in_channels and classes must be >= 1");
  }
  NetBuilder b("msd", options.input_size, options.seed);
  std::vector<NodeId> earlier = b.layer(0, options.in_channels, NodeRole::input, 1);
  const auto hidden = [&] {
    std::vector<NodeId> ids;
    for (int i = 1; i <= options.depth; ++i) ids.push_back(b.node(i, NodeRole::hidden, 1));
    return ids;
  }();
  const auto outputs = b.layer(options.depth + 1, options.classes, NodeRole::output, 1);

  for (int i = 1; i <= options.depth; ++i) {
    const NodeId dst = hidden[static_cast<std::size_t>(i - 1)];
    const int dilation = 1 + (i % 10);
    for (NodeId src : earlier) b.conv(src, dst, 3, 1, dilation);
    b.bias("layer" + std::to_string(i), dst);
    earlier.push_back(dst);
  }
  for (NodeId dst : outputs) {
    for (NodeId src : earlier) b.conv(src, dst, 1, 1, 1, options.prunable_output);
    b.bias("output", dst);
  }
  return b.finish();
}

NetworkSpec generate_msd(int depth, int in_channels, int classes, std::uint64_t seed) {
  MsdOptions options;
  options.depth = depth;
  options.in_channels = in_channels;
  options.classes = classes;
  options.seed = seed;
  return generate_msd(options);
}

NetworkSpec generate_test_net(TestNetTemplate shape, int scale_levels, int channels, std::uint64_t seed,
                              int input_size) {
  if (scale_levels < 1 || channels < 1) {
    throw Error(ErrorCode::config, "generate_test_net: scale_levels and channels must be >= 1");
  }
  const int coarsest = 1 << scale_levels;
  if (input_size % coarsest != 0) {
    throw Error(ErrorCode::config, "generate_test_net: input_size " + std::to_string(input_size) +
                                       " is not divisible by " + std::to_string(coarsest));
  }
  switch (shape) {
    case TestNetTemplate::unet_like: return unet_like(scale_levels, channels, seed, input_size);
    case TestNetTemplate::resnet_like: return resnet_like(scale_levels, channels, seed, input_size);
  }
  throw Error(ErrorCode::config, "generate_test_net: unknown template");
}

}  // namespace lean
