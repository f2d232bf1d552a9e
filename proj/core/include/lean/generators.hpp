// Copyright 2026 The LEAN Pruning Authors
// Licensed under the Apache License, Version 2.0

#ifndef LEAN_GENERATORS_HPP
#define LEAN_GENERATORS_HPP

#include <cstdint>

#include "lean/network.hpp"

namespace lean {

struct MsdOptions {
  int depth = 100;
  int in_channels = 1;
  int classes = 1;
  std::uint64_t seed = 0;
  /// The 1x1 output layer is excluded from pruning unless this is set.
  bool prunable_output = false;
  int input_size = 64;
};

/// Mixed-scale dense network of width 1: hidden layer i (1-based) holds one channel fed by
/// a 3x3 conv with dilation 1 + (i mod 10) from every earlier channel; each output class
/// channel receives a 1x1 conv from every input and hidden channel.
NetworkSpec generate_msd(const MsdOptions& options);
NetworkSpec generate_msd(int depth, int in_channels, int classes, std::uint64_t seed);

enum class TestNetTemplate { unet_like, resnet_like };

/// Small encoder/decoder (unet_like) or residual (resnet_like) networks exercising every
/// operator kind. Concatenation skips are per-channel identity_skip edges into copy
/// channels consumed by the next conv.
NetworkSpec generate_test_net(TestNetTemplate shape, int scale_levels, int channels,
                              std::uint64_t seed, int input_size = 64);

}  // namespace lean

#endif  // LEAN_GENERATORS_HPP
