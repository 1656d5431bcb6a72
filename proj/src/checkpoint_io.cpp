// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "prunesearch/checkpoint_io.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <set>

#include "json.hpp"

#include "prunesearch/errors.hpp"
#include "prunesearch/file_util.hpp"

namespace prunesearch {

using nlohmann::json;

namespace {

constexpr std::size_t kHeaderSize = 8 + 4 + 8;

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <typename U>
U get_le(std::string_view in, std::size_t pos) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i)
    v |= static_cast<U>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  return v;
}

json config_to_json(const EncoderConfig& c) {
  return json{{"num_layers", c.num_layers},   {"hidden_size", c.hidden_size},
              {"num_heads", c.num_heads},     {"ffn_size", c.ffn_size},
              {"max_seq_len", c.max_seq_len}, {"vocab_size", c.vocab_size},
              {"num_outputs", c.num_outputs}};
}

EncoderConfig config_from_json(const json& j) {
  EncoderConfig c;
  c.num_layers = j.at("num_layers").get<std::size_t>();
  c.hidden_size = j.at("hidden_size").get<std::size_t>();
  c.num_heads = j.at("num_heads").get<std::size_t>();
  c.ffn_size = j.at("ffn_size").get<std::size_t>();
  c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.num_outputs = j.at("num_outputs").get<std::size_t>();
  return c;
}

}  // namespace

std::string checkpoint_to_bytes(const ModelCheckpoint& model) {
  validate_model(model);
  json tensors = json::array();
  std::uint64_t offset = 0;
  const auto named = named_tensors(model);
  for (const auto& [name, t] : named) {
    tensors.push_back({{"name", name},
                       {"shape", {t->rows(), t->cols()}},
                       {"offset", offset},
                       {"count", t->size()}});
    offset += 4 * t->size();
  }
  const std::string manifest =
      json{{"config", config_to_json(model.config)}, {"tensors", tensors}}.dump();

  std::string out;
  out.reserve(kHeaderSize + manifest.size() + offset);
  out.append(kCheckpointMagic);
  put_le<std::uint32_t>(out, kCheckpointVersion);
  put_le<std::uint64_t>(out, manifest.size());
  out.append(manifest);
  for (const auto& [name, t] : named) {
    for (float v : t->values()) put_le<std::uint32_t>(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

ModelCheckpoint checkpoint_from_bytes(std::string_view bytes) {
  if (bytes.size() < kHeaderSize)
    throw FormatError("checkpoint truncated inside header",
                      static_cast<long long>(bytes.size()));
  if (bytes.substr(0, 8) != kCheckpointMagic)
    throw FormatError("bad checkpoint magic", 0);
  const auto version = get_le<std::uint32_t>(bytes, 8);
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(version),
                      8);
  const auto manifest_len = get_le<std::uint64_t>(bytes, 12);
  if (manifest_len > bytes.size() - kHeaderSize)
    throw FormatError("checkpoint truncated inside manifest",
                      static_cast<long long>(bytes.size()));
  const std::string_view manifest_text = bytes.substr(kHeaderSize, manifest_len);
  const std::size_t payload_start = kHeaderSize + manifest_len;
  const std::string_view payload = bytes.substr(payload_start);

  json manifest;
  try {
    manifest = json::parse(manifest_text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("checkpoint manifest is not valid JSON: ") +
                          e.what(),
                      static_cast<long long>(kHeaderSize + e.byte));
  }

  ModelCheckpoint model;
  try {
    const EncoderConfig config = config_from_json(manifest.at("config"));
    config.validate();
    model = ModelCheckpoint::zeros(config);
  } catch (const json::exception& e) {
    throw FormatError(std::string("bad manifest config: ") + e.what(), kHeaderSize);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("bad manifest config: ") + e.what(), kHeaderSize);
  }

  auto named = named_tensors(model);
  std::set<std::string> seen;
  try {
    for (const auto& entry : manifest.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<std::vector<std::uint64_t>>();
      const auto offset = entry.at("offset").get<std::uint64_t>();
      const auto count = entry.at("count").get<std::uint64_t>();
      if (!seen.insert(name).second)
        throw FormatError("duplicate tensor " + name + " in manifest");
      auto it = std::find_if(named.begin(), named.end(),
                             [&](const auto& t) { return t.name == name; });
      if (it == named.end())
        throw FormatError("manifest lists unknown tensor " + name);
      DenseMatrix& t = *it->tensor;
      if (shape.size() != 2 || shape[0] * shape[1] != count)
        throw FormatError("tensor " + name + ": manifest shape does not match count " +
                          std::to_string(count));
      if (shape[0] != t.rows() || shape[1] != t.cols())
        throw FormatError("tensor " + name + ": shape " + std::to_string(shape[0]) +
                          "x" + std::to_string(shape[1]) +
                          " disagrees with config (expected " + t.shape_string() +
                          ")");
      if (offset > payload.size() || count > (payload.size() - offset) / 4)
        throw FormatError("tensor " + name + " extends past end of payload",
                          static_cast<long long>(payload_start + offset));
      auto values = t.values();
      for (std::size_t i = 0; i < count; ++i)
        values[i] = std::bit_cast<float>(
            get_le<std::uint32_t>(payload, offset + 4 * i));
    }
  } catch (const json::exception& e) {
    throw FormatError(std::string("malformed tensor index: ") + e.what(),
                      kHeaderSize);
  }
  for (const auto& t : named) {
    if (!seen.contains(t.name))
      throw FormatError("checkpoint is missing tensor " + t.name);
  }
  validate_model(model);
  return model;
}

void write_checkpoint(const ModelCheckpoint& model,
                      const std::filesystem::path& path) {
  write_file_atomic(path, checkpoint_to_bytes(model));
}

ModelCheckpoint read_checkpoint(const std::filesystem::path& path) {
  return checkpoint_from_bytes(read_file(path));
}

std::uint64_t checkpoint_checksum(const ModelCheckpoint& model) {
  const std::string bytes = checkpoint_to_bytes(model);
  return fnv1a64(bytes);
}

}  // namespace prunesearch
