// Copyright 2026 The LEAN Pruning Authors
// Licensed under the Apache License, Version 2.0

#include "lean/container.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <iterator>
#include <nlohmann/json.hpp>
#include <string>

#include "lean/error.hpp"

namespace lean {

namespace {

using nlohmann::json;

constexpr std::size_t kBatchNormFloats = 5;

[[noreturn]] void format_error(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::format, "manifest field '" + field + "': " + why);
}

void check_keys(const json& obj, const std::string& where, std::initializer_list<const char*> required,
                std::initializer_list<const char*> optional = {}) {
  if (!obj.is_object()) format_error(where, "expected an object");
  for (const char* key : required) {
    if (!obj.contains(key)) format_error(where + "." + key, "missing");
  }
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* key : required) known |= it.key() == key;
    for (const char* key : optional) known |= it.key() == key;
    if (!known) format_error(where + "." + it.key(), "unknown field");
  }
}

std::int64_t get_int(const json& obj, const std::string& where, const char* key) {
  const auto& v = obj.at(key);
  if (!v.is_number_integer()) format_error(where + "." + key, "expected an integer");
  return v.get<std::int64_t>();
}

int get_small_int(const json& obj, const std::string& where, const char* key) {
  const auto v = get_int(obj, where, key);
  if (v < 0 || v > (1 << 30)) format_error(where + "." + key, "out of range");
  return static_cast<int>(v);
}

bool get_bool(const json& obj, const std::string& where, const char* key) {
  const auto& v = obj.at(key);
  if (!v.is_boolean()) format_error(where + "." + key, "expected a boolean");
  return v.get<bool>();
}

std::string get_string(const json& obj, const std::string& where, const char* key) {
  const auto& v = obj.at(key);
  if (!v.is_string()) format_error(where + "." + key, "expected a string");
  return v.get<std::string>();
}

const json& get_array(const json& obj, const std::string& where, const char* key) {
  const auto& v = obj.at(key);
  if (!v.is_array()) format_error(where + "." + key, "expected an array");
  return v;
}

void put_float(std::string& blob, float value) {
  const auto bits = std::bit_cast<std::uint32_t>(value);
  for (int shift = 0; shift < 32; shift += 8) blob.push_back(static_cast<char>((bits >> shift) & 0xFFu));
}

float read_float(const std::string& blob, std::size_t index) {
  std::uint32_t bits = 0;
  for (int b = 0; b < 4; ++b) {
    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(blob[index * 4 + static_cast<std::size_t>(b)]))
            << (8 * b);
  }
  return std::bit_cast<float>(bits);
}

struct Span {
  std::size_t offset;
  std::size_t count;
};

Span get_span(const json& obj, const std::string& where, std::size_t expected_count) {
  const auto offset = get_int(obj, where, "offset");
  const auto count = get_int(obj, where, "count");
  if (offset < 0) format_error(where + ".offset", "must be nonnegative");
  if (count < 0 || static_cast<std::size_t>(count) != expected_count) {
    format_error(where + ".count", "expected " + std::to_string(expected_count) + " values");
  }
  return {static_cast<std::size_t>(offset), static_cast<std::size_t>(count)};
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open " + path.string());
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::io, "failed reading " + path.string());
  return data;
}

void write_file(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  out.flush();
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

}  // namespace

void save_network(const NetworkSpec& input, const std::filesystem::path& path) {
  require_valid(input, "save_network");
  NetworkSpec net = input;
  net.canonicalize();

  const std::string blob_name = path.stem().string() + ".bin";
  std::string blob;
  std::size_t cursor = 0;
  const auto reserve = [&](std::size_t count) {
    const std::size_t at = cursor;
    cursor += count;
    return at;
  };

  json nodes = json::array();
  for (const auto& n : net.nodes) {
    json j{{"id", n.id}, {"role", std::string(to_string(n.role))}, {"spatial_scale", n.spatial_scale}};
    if (n.layer_index) j["layer_index"] = *n.layer_index;
    nodes.push_back(std::move(j));
  }

  json ops = json::array();
  for (const auto& op : net.operators) {
    json j{{"id", op.id},
           {"kind", std::string(to_string(op.kind))},
           {"src", op.src},
           {"dst", op.dst},
           {"prunable", op.prunable}};
    if (const auto* c = std::get_if<ConvParams>(&op.params)) {
      j["kernel_size"] = c->kernel.size;
      j["stride"] = c->stride;
      j["dilation"] = c->dilation;
      j["offset"] = reserve(c->kernel.values.size());
      j["count"] = c->kernel.values.size();
      for (float v : c->kernel.values) put_float(blob, v);
    } else if (const auto* p = std::get_if<PoolParams>(&op.params)) {
      j["stride"] = p->stride;
    } else if (const auto* bn = std::get_if<BatchNormParams>(&op.params)) {
      j["offset"] = reserve(kBatchNormFloats);
      j["count"] = kBatchNormFloats;
      for (float v : {bn->gamma, bn->beta, bn->running_mean, bn->running_var, bn->epsilon}) put_float(blob, v);
    }
    ops.push_back(std::move(j));
  }

  json biases = json::array();
  for (const auto& b : net.biases) {
    biases.push_back({{"owner", b.owner}, {"channel", b.channel}, {"offset", reserve(1)}, {"count", 1}});
    put_float(blob, b.value);
  }

  const json manifest{{"format_version", kContainerFormatVersion},
                      {"name", net.name},
                      {"input_size", net.input_size},
                      {"pruned", net.pruned},
                      {"nodes", std::move(nodes)},
                      {"operators", std::move(ops)},
                      {"biases", std::move(biases)},
                      {"blob", blob_name}};

  write_file(path, manifest.dump(1) + "\n");
  write_file(path.parent_path() / blob_name, blob);
}

NetworkSpec load_network(const std::filesystem::path& path) {
  const std::string text = read_file(path);
  json manifest;
  try {
    manifest = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::format, "manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  check_keys(manifest, "$", {"format_version", "input_size", "nodes", "operators", "biases", "blob"},
             {"name", "pruned"});
  if (get_int(manifest, "$", "format_version") != kContainerFormatVersion) {
    format_error("$.format_version", "unsupported version");
  }

  const std::string blob_name = get_string(manifest, "$", "blob");
  if (blob_name.empty()) format_error("$.blob", "empty blob name");
  const std::string blob = read_file(path.parent_path() / blob_name);
  if (blob.size() % 4 != 0) {
    throw Error(ErrorCode::truncation, "blob " + blob_name + " length " + std::to_string(blob.size()) +
                                           " is not a multiple of 4 bytes");
  }
  const std::size_t blob_floats = blob.size() / 4;
  std::size_t covered = 0;
  const auto check_span = [&](const Span& span, const std::string& where) {
    if (span.offset > blob_floats || span.count > blob_floats - span.offset) {
      throw Error(ErrorCode::truncation, "manifest field '" + where + ".offset' points past the end of blob " +
                                             blob_name + " (" + std::to_string(blob_floats) + " values)");
    }
    covered = std::max(covered, span.offset + span.count);
  };

  NetworkSpec net;
  if (manifest.contains("name")) net.name = get_string(manifest, "$", "name");
  if (manifest.contains("pruned")) net.pruned = get_bool(manifest, "$", "pruned");
  net.input_size = get_small_int(manifest, "$", "input_size");

  const auto& nodes = get_array(manifest, "$", "nodes");
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const std::string where = "nodes[" + std::to_string(i) + "]";
    const auto& j = nodes[i];
    check_keys(j, where, {"id", "role", "spatial_scale"}, {"layer_index"});
    ChannelNode n;
    n.id = get_int(j, where, "id");
    const auto role = parse_node_role(get_string(j, where, "role"));
    if (!role) format_error(where + ".role", "unknown role");
    n.role = *role;
    n.spatial_scale = get_small_int(j, where, "spatial_scale");
    if (j.contains("layer_index")) n.layer_index = get_small_int(j, where, "layer_index");
    net.nodes.push_back(n);
  }

  const auto& ops = get_array(manifest, "$", "operators");
  for (std::size_t i = 0; i < ops.size(); ++i) {
    const std::string where = "operators[" + std::to_string(i) + "]";
    const auto& j = ops[i];
    if (!j.is_object() || !j.contains("kind")) format_error(where + ".kind", "missing");
    const auto kind = parse_op_kind(get_string(j, where, "kind"));
    if (!kind) format_error(where + ".kind", "unknown operator kind");
    switch (*kind) {
      case OpKind::conv:
      case OpKind::conv_transposed:
        check_keys(j, where, {"id", "kind", "src", "dst", "prunable", "kernel_size", "stride", "dilation",
                              "offset", "count"});
        break;
      case OpKind::batchnorm:
        check_keys(j, where, {"id", "kind", "src", "dst", "prunable", "offset", "count"});
        break;
      case OpKind::avgpool:
        check_keys(j, where, {"id", "kind", "src", "dst", "prunable", "stride"});
        break;
      case OpKind::relu:
      case OpKind::identity_skip:
        check_keys(j, where, {"id", "kind", "src", "dst", "prunable"});
        break;
    }
    OperatorDescriptor op;
    op.id = get_int(j, where, "id");
    op.kind = *kind;
    op.src = get_int(j, where, "src");
    op.dst = get_int(j, where, "dst");
    op.prunable = get_bool(j, where, "prunable");
    if (is_convolution(*kind)) {
      ConvParams c;
      const int k = get_small_int(j, where, "kernel_size");
      if (k < 1 || k > 4096) format_error(where + ".kernel_size", "out of range");
      c.stride = get_small_int(j, where, "stride");
      c.dilation = get_small_int(j, where, "dilation");
      const auto span = get_span(j, where, static_cast<std::size_t>(k) * static_cast<std::size_t>(k));
      check_span(span, where);
      c.kernel = Kernel::zeros(k);
      for (std::size_t v = 0; v < span.count; ++v) c.kernel.values[v] = read_float(blob, span.offset + v);
      op.params = std::move(c);
    } else if (*kind == OpKind::batchnorm) {
      const auto span = get_span(j, where, kBatchNormFloats);
      check_span(span, where);
      BatchNormParams bn;
      bn.gamma = read_float(blob, span.offset);
      bn.beta = read_float(blob, span.offset + 1);
      bn.running_mean = read_float(blob, span.offset + 2);
      bn.running_var = read_float(blob, span.offset + 3);
      bn.epsilon = read_float(blob, span.offset + 4);
      op.params = bn;
    } else if (*kind == OpKind::avgpool) {
      op.params = PoolParams{get_small_int(j, where, "stride")};
    }
    net.operators.push_back(std::move(op));
  }

  const auto& biases = get_array(manifest, "$", "biases");
  for (std::size_t i = 0; i < biases.size(); ++i) {
    const std::string where = "biases[" + std::to_string(i) + "]";
    const auto& j = biases[i];
    check_keys(j, where, {"owner", "channel", "offset", "count"});
    BiasTerm b;
    b.owner = get_string(j, where, "owner");
    b.channel = get_int(j, where, "channel");
    const auto span = get_span(j, where, 1);
    check_span(span, where);
    b.value = read_float(blob, span.offset);
    net.biases.push_back(std::move(b));
  }

  if (covered != blob_floats) {
    throw Error(ErrorCode::truncation, "blob " + blob_name + " holds " + std::to_string(blob_floats) +
                                           " values but the manifest references " + std::to_string(covered));
  }

  net.canonicalize();
  require_valid(net, "load_network(" + path.string() + ")");
  return net;
}

}  // namespace lean
