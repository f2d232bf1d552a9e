// Copyright 2026 The LEAN Pruning Authors
// Licensed under the Apache License, Version 2.0

#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include "helpers.hpp"
#include "lean/container.hpp"
#include "lean/generators.hpp"

namespace lean {
namespace {

using testing::error_code_of;
using testing::read_file;
using testing::TempDir;
using testing::write_file;

TEST(Container, SingleEdgeRoundTrip) {
  NetworkSpec net = testing::chain_net(1);
  TempDir dir;
  save_network(net, dir / "one.json");
  EXPECT_EQ(load_network(dir / "one.json"), net);
}

TEST(Container, GeneratedNetworksRoundTrip) {
  TempDir dir;
  for (const auto& net : {generate_msd(7, 2, 3, 11), generate_test_net(TestNetTemplate::unet_like, 2, 2, 11),
                          generate_test_net(TestNetTemplate::resnet_like, 2, 3, 11)}) {
    save_network(net, dir / "net.json");
    EXPECT_EQ(load_network(dir / "net.json"), net) << net.name;
  }
}

TEST(Container, SavingTwiceIsByteIdentical) {
  const NetworkSpec net = generate_test_net(TestNetTemplate::unet_like, 2, 2, 3);
  TempDir dir;
  save_network(net, dir / "a.json");
  save_network(net, dir / "b.json");
  EXPECT_EQ(read_file(dir / "a.bin"), read_file(dir / "b.bin"));
  auto a = read_file(dir / "a.json");
  auto b = read_file(dir / "b.json");
  // Only the blob file name differs.
  const auto pos = b.find("\"b.bin\"");
  ASSERT_NE(pos, std::string::npos);
  b.replace(pos, 7, "\"a.bin\"");
  EXPECT_EQ(a, b);
}

TEST(Container, MsdDepth100Loads) {
  TempDir dir;
  save_network(generate_msd(100, 1, 1, 1), dir / "m.json");
  EXPECT_EQ(prunable_conv_ids(load_network(dir / "m.json")).size(), 5050u);
}

TEST(Container, PrunedNetworkKeepsRetainedSet) {
  const NetworkSpec net = generate_msd(20, 1, 1, 8);
  std::set<OperatorId> retained;
  for (const auto& op : net.operators)
    if (!op.prunable || op.id % 2 == 0) retained.insert(op.id);
  const NetworkSpec pruned = materialize_pruned(net, retained);
  TempDir dir;
  save_network(pruned, dir / "p.json");
  const NetworkSpec loaded = load_network(dir / "p.json");
  EXPECT_EQ(operator_ids(loaded), retained);
  EXPECT_EQ(loaded, pruned);
}

class CorruptContainer : public ::testing::Test {
 protected:
  void SetUp() override {
    save_network(generate_msd(3, 1, 1, 1), dir_ / "n.json");
    manifest_ = nlohmann::json::parse(read_file(dir_ / "n.json"));
  }
  std::optional<ErrorCode> reload() {
    write_file(dir_ / "n.json", manifest_.dump());
    return error_code_of([&] { load_network(dir_ / "n.json"); });
  }
  std::string message() {
    try {
      load_network(dir_ / "n.json");
    } catch (const Error& e) {
      return e.what();
    }
    return {};
  }
  TempDir dir_;
  nlohmann::json manifest_;
};

TEST_F(CorruptContainer, OffsetPastBlobEndIsTruncation) {
  manifest_["operators"][0]["offset"] = 1'000'000;
  EXPECT_EQ(reload(), ErrorCode::truncation);
}

TEST_F(CorruptContainer, ShortBlobIsTruncation) {
  std::string blob = read_file(dir_ / "n.bin");
  blob.resize(blob.size() - 4);
  write_file(dir_ / "n.bin", blob);
  EXPECT_EQ(reload(), ErrorCode::truncation);
}

TEST_F(CorruptContainer, TrailingBlobBytesAreTruncation) {
  write_file(dir_ / "n.bin", read_file(dir_ / "n.bin") + std::string(4, '\0'));
  EXPECT_EQ(reload(), ErrorCode::truncation);
}

TEST_F(CorruptContainer, MissingFieldIsFormatErrorNamingIt) {
  manifest_["operators"][2].erase("stride");
  EXPECT_EQ(reload(), ErrorCode::format);
  EXPECT_NE(message().find("operators[2].stride"), std::string::npos) << message();
}

TEST_F(CorruptContainer, WrongTypeIsFormatError) {
  manifest_["input_size"] = "big";
  EXPECT_EQ(reload(), ErrorCode::format);
}

TEST_F(CorruptContainer, UnknownKindIsFormatError) {
  manifest_["operators"][0]["kind"] = "maxpool";
  EXPECT_EQ(reload(), ErrorCode::format);
}

TEST_F(CorruptContainer, CycleIsValidationError) {
  // Reverse the 1 -> 2 edge, then add a fresh 1 -> 2 edge to close the loop.
  for (auto& op : manifest_["operators"]) {
    if (op["src"] == 1 && op["dst"] == 2) {
      op["src"] = 2;
      op["dst"] = 1;
      break;
    }
  }
  manifest_["operators"].push_back(manifest_["operators"][0]);
  auto& extra = manifest_["operators"].back();
  extra["id"] = manifest_["operators"].size() - 1;
  extra["src"] = 1;
  extra["dst"] = 2;
  EXPECT_EQ(reload(), ErrorCode::validation);
}

TEST_F(CorruptContainer, NotJsonIsFormatError) {
  write_file(dir_ / "n.json", "{not json");
  EXPECT_EQ(error_code_of([&] { load_network(dir_ / "n.json"); }), ErrorCode::format);
}

TEST(Container, MissingFileIsIoError) {
  EXPECT_EQ(error_code_of([] { load_network("/nonexistent/dir/x.json"); }), ErrorCode::io);
}

TEST(Container, UnwritablePathIsIoError) {
  EXPECT_EQ(error_code_of([] { save_network(testing::chain_net(1), "/nonexistent/dir/x.json"); }), ErrorCode::io);
}

}  // namespace
}  // namespace lean
