// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace prunesearch {

/// Writes to a sibling temporary file and renames it over `path`, so a
/// failed write never leaves a partial file at the target.
void write_file_atomic(const std::filesystem::path& path,
                       std::span<const char> bytes);
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view text);
inline void write_file_atomic(const std::filesystem::path& path,
                              const std::string& text) {
  write_file_atomic(path, std::string_view(text));
}

/// Whole-file read; throws InputError if the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// 64-bit FNV-1a, used for checkpoint checksums.
std::uint64_t fnv1a64(std::span<const char> bytes);
std::string to_hex(std::uint64_t v);

}  // namespace prunesearch
