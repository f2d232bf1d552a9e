// Copyright 2026 The LEAN Pruning Authors
// Licensed under the Apache License, Version 2.0

#ifndef LEAN_TOOLS_CLI_HPP
#define LEAN_TOOLS_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace lean::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsageOrValidation = 1;
inline constexpr int kIoFailure = 2;
inline constexpr int kInternal = 3;

/// Runs one invocation. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace lean::cli

#endif  // LEAN_TOOLS_CLI_HPP
