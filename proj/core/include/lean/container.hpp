// Copyright 2026 The LEAN Pruning Authors
// Licensed under the Apache License, Version 2.0

#ifndef LEAN_CONTAINER_HPP
#define LEAN_CONTAINER_HPP

#include <filesystem>

#include "lean/network.hpp"

namespace lean {

// On-disk network container: `<name>.json` manifest plus a flat blob of little-endian
// IEEE-754 float32 values. Kernels are row-major; batchnorm operators store
// [gamma, beta, running_mean, running_var, epsilon]; each bias stores one value.
// Every payload is addressed by {offset, count} in floats. Unknown manifest fields are
// rejected.

inline constexpr int kContainerFormatVersion = 1;

/// Reads and validates a container. `path` names the manifest; the blob is resolved
/// relative to it.
NetworkSpec load_network(const std::filesystem::path& path);

/// Writes manifest + blob. Output bytes depend only on the network contents.
/// The blob file is named after the manifest stem with a `.bin` extension.
void save_network(const NetworkSpec& net, const std::filesystem::path& path);

}  // namespace lean

#endif  // LEAN_CONTAINER_HPP
