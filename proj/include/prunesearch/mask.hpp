// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace prunesearch {

/// Binary keep-mask for one weight matrix; 1 keeps the weight, 0 prunes it.
struct TensorMask {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::uint8_t> keep;

  static TensorMask ones(std::size_t rows, std::size_t cols) {
    return {rows, cols, std::vector<std::uint8_t>(rows * cols, 1)};
  }

  std::size_t pruned_count() const {
    std::size_t n = 0;
    for (auto k : keep) n += (k == 0);
    return n;
  }
  double zero_fraction() const {
    return keep.empty() ? 0.0
                        : static_cast<double>(pruned_count()) /
                              static_cast<double>(keep.size());
  }

  friend bool operator==(const TensorMask&, const TensorMask&) = default;
};

/// Masks keyed by checkpoint tensor name. Tensors without an entry are kept
/// whole.
using PruneMask = std::map<std::string, TensorMask>;

}  // namespace prunesearch
