// Copyright 2026 The LEAN Pruning Authors
// Licensed under the Apache License, Version 2.0

#ifndef LEAN_TESTS_HELPERS_HPP
#define LEAN_TESTS_HELPERS_HPP


#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <sstream>
#include <string>

#include "lean/error.hpp"
#include "lean/network.hpp"

namespace lean::testing {

/// Error code thrown by `f`, or nullopt if it returned normally.
template <class F>
std::optional<ErrorCode> error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::mt19937_64 rng(std::random_device{}());
    path_ = std::filesystem::temp_directory_path() / ("lean_test_" + std::to_string(rng()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

/// input(0) -conv-> 1 -conv-> ... -conv-> output(length), all at scale 1.
inline NetworkSpec chain_net(int length, float weight = 1.0f) {
  NetworkSpec net;
  net.name = "chain";
  net.input_size = 8;
  for (int i = 0; i <= length; ++i) {
    const NodeRole role = i == 0 ? NodeRole::input : (i == length ? NodeRole::output : NodeRole::hidden);
    net.nodes.push_back(ChannelNode{i, i, role, 1});
  }
  for (int i = 0; i < length; ++i) {
    Kernel k = Kernel::zeros(3);
    k.at(1, 1) = weight;
    net.operators.push_back(make_conv(i, i, i + 1, k));
  }
  return net;
}

}  // namespace lean::testing

#endif  // LEAN_TESTS_HELPERS_HPP
