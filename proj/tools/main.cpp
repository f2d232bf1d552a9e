// Copyright 2026 The LEAN Pruning Authors
// Licensed under the Apache License, Version 2.0

#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return lean::cli::run_cli(args, std::cout, std::cerr);
}
