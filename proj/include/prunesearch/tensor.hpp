// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace prunesearch {

/// Row-major dense matrix.
///
/// `float` is the storage type everywhere in the pipeline. The `double`
/// instantiation exists so the encoder can be re-evaluated at reference
/// precision when checking gradients.
template <typename T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{0})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  /// Takes ownership of `data`; throws DimensionError if its length is not
  /// rows * cols.
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data);

  static Matrix identity(std::size_t n);
  /// Builds a matrix from nested rows; all rows must have equal length.
  static Matrix from_rows(const std::vector<std::vector<T>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  bool all_finite() const noexcept;
  /// "RxC", used in error messages.
  std::string shape_string() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using DenseMatrix = Matrix<float>;

/// Compressed sparse row storage. Construct through to_csr() or from_parts();
/// both enforce the structural invariants.
class SparseMatrixCSR {
 public:
  SparseMatrixCSR() = default;

  /// Validates: row_ptr has rows+1 nondecreasing entries starting at 0 and
  /// ending at values.size(); column indices strictly increase within a row
  /// and are < cols; no stored value is zero.
  static SparseMatrixCSR from_parts(std::size_t rows, std::size_t cols,
                                    std::vector<std::uint32_t> row_ptr,
                                    std::vector<std::uint32_t> col_idx,
                                    std::vector<float> values);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t nnz() const noexcept { return values_.size(); }

  std::span<const std::uint32_t> row_ptr() const noexcept { return row_ptr_; }
  std::span<const std::uint32_t> col_idx() const noexcept { return col_idx_; }
  std::span<const float> values() const noexcept { return values_; }

  friend bool operator==(const SparseMatrixCSR&,
                         const SparseMatrixCSR&) = default;

 private:
  friend SparseMatrixCSR to_csr(const DenseMatrix& a);

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::uint32_t> row_ptr_{0};
  std::vector<std::uint32_t> col_idx_;
  std::vector<float> values_;
};

// Kernels. All products accumulate in double and round once on store.

/// a * b. Throws DimensionError naming both shapes when a.cols != b.rows.
template <typename T>
Matrix<T> dense_matmul(const Matrix<T>& a, const Matrix<T>& b);

/// a * transpose(b).
template <typename T>
Matrix<T> matmul_transposed_b(const Matrix<T>& a, const Matrix<T>& b);

/// transpose(a) * b.
template <typename T>
Matrix<T> matmul_transposed_a(const Matrix<T>& a, const Matrix<T>& b);

template <typename T>
Matrix<T> transpose(const Matrix<T>& a);

/// Drops entries equal to zero (either sign).
SparseMatrixCSR to_csr(const DenseMatrix& a);
DenseMatrix densify(const SparseMatrixCSR& a);

/// csr(a) * b.
DenseMatrix csr_dense_matmul(const SparseMatrixCSR& a, const DenseMatrix& b);

/// a * csr(b). This is the orientation used by sparse inference, where the
/// activations are dense and the pruned weight is the right operand.
DenseMatrix dense_csr_matmul(const DenseMatrix& a, const SparseMatrixCSR& b);

/// Fraction of entries that are exactly zero. Throws DomainError when empty.
double sparsity(const DenseMatrix& a);

template <typename To, typename From>
Matrix<To> matrix_cast(const Matrix<From>& m) {
  std::vector<To> out(m.values().begin(), m.values().end());
  return Matrix<To>(m.rows(), m.cols(), std::move(out));
}

}  // namespace prunesearch
