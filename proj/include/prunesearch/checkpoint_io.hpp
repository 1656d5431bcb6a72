// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "prunesearch/encoder.hpp"

namespace prunesearch {

// Container layout, all integers little-endian:
//
//   offset 0   8 bytes  magic "PFCKPT01"
//   offset 8   u32      format version (1)
//   offset 12  u64      manifest length in bytes
//   offset 20  manifest UTF-8 JSON:
//                {"config": {num_layers, hidden_size, num_heads, ffn_size,
//                            max_seq_len, vocab_size, num_outputs},
//                 "tensors": [{"name", "shape": [rows, cols],
//                              "offset", "count"}, ...]}
//              "offset" is in bytes from the start of the payload.
//   payload    float32 little-endian, row-major, tensors concatenated.

inline constexpr std::string_view kCheckpointMagic = "PFCKPT01";
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string checkpoint_to_bytes(const ModelCheckpoint& model);
/// Throws FormatError (with byte offset where known) on bad magic, version,
/// truncation, or a manifest that disagrees with the payload or config.
ModelCheckpoint checkpoint_from_bytes(std::string_view bytes);

void write_checkpoint(const ModelCheckpoint& model,
                      const std::filesystem::path& path);
ModelCheckpoint read_checkpoint(const std::filesystem::path& path);

/// FNV-1a of the serialized container.
std::uint64_t checkpoint_checksum(const ModelCheckpoint& model);

}  // namespace prunesearch
