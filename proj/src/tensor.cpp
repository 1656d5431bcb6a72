// Copyright 2026 The prunesearch Authors.
// SPDX-License-Identifier: Apache-2.0

#include "prunesearch/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "prunesearch/errors.hpp"

namespace prunesearch {

template <typename T>
Matrix<T>::Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw DimensionError("matrix data length " + std::to_string(data_.size()) +
                         " does not match shape " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
}

template <typename T>
Matrix<T> Matrix<T>::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
  return m;
}

template <typename T>
Matrix<T> Matrix<T>::from_rows(const std::vector<std::vector<T>>& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.front().size();
  std::vector<T> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw DimensionError("ragged rows in from_rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

template <typename T>
bool Matrix<T>::all_finite() const noexcept {
  for (T v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template <typename T>
std::string Matrix<T>::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

template class Matrix<float>;
template class Matrix<double>;

namespace {

template <typename A, typename B>
void require_inner(const A& a, const B& b, std::size_t a_inner,
                   std::size_t b_inner, const char* op) {
  if (a_inner != b_inner) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " +
                         std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
}

}  // namespace

template <typename T>
Matrix<T> dense_matmul(const Matrix<T>& a, const Matrix<T>& b) {
  require_inner(a, b, a.cols(), b.rows(), "dense_matmul");
  const std::size_t n = a.rows(), k = a.cols(), m = b.cols();
  Matrix<T> out(n, m);
  std::vector<double> acc(m);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(acc.begin(), acc.end(), 0.0);
    const T* arow = a.data() + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      const T* brow = b.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) acc[j] += av * brow[j];
    }
    T* orow = out.data() + i * m;
    for (std::size_t j = 0; j < m; ++j) orow[j] = static_cast<T>(acc[j]);
  }
  return out;
}

template <typename T>
Matrix<T> matmul_transposed_b(const Matrix<T>& a, const Matrix<T>& b) {
  require_inner(a, b, a.cols(), b.cols(), "matmul_transposed_b");
  const std::size_t n = a.rows(), k = a.cols(), m = b.rows();
  Matrix<T> out(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    const T* arow = a.data() + i * k;
    for (std::size_t j = 0; j < m; ++j) {
      const T* brow = b.data() + j * k;
      double acc = 0.0;
      for (std::size_t p = 0; p < k; ++p)
        acc += static_cast<double>(arow[p]) * brow[p];
      out(i, j) = static_cast<T>(acc);
    }
  }
  return out;
}

template <typename T>
Matrix<T> matmul_transposed_a(const Matrix<T>& a, const Matrix<T>& b) {
  require_inner(a, b, a.rows(), b.rows(), "matmul_transposed_a");
  const std::size_t n = a.cols(), k = a.rows(), m = b.cols();
  std::vector<double> acc(n * m, 0.0);
  for (std::size_t p = 0; p < k; ++p) {
    const T* arow = a.data() + p * n;
    const T* brow = b.data() + p * m;
    for (std::size_t i = 0; i < n; ++i) {
      const double av = arow[i];
      if (av == 0.0) continue;
      double* out = acc.data() + i * m;
      for (std::size_t j = 0; j < m; ++j) out[j] += av * brow[j];
    }
  }
  std::vector<T> data(acc.begin(), acc.end());
  return Matrix<T>(n, m, std::move(data));
}

template <typename T>
Matrix<T> transpose(const Matrix<T>& a) {
  Matrix<T> out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

template Matrix<float> dense_matmul(const Matrix<float>&, const Matrix<float>&);
template Matrix<double> dense_matmul(const Matrix<double>&,
                                     const Matrix<double>&);
template Matrix<float> matmul_transposed_b(const Matrix<float>&,
                                           const Matrix<float>&);
template Matrix<double> matmul_transposed_b(const Matrix<double>&,
                                            const Matrix<double>&);
template Matrix<float> matmul_transposed_a(const Matrix<float>&,
                                           const Matrix<float>&);
template Matrix<double> matmul_transposed_a(const Matrix<double>&,
                                            const Matrix<double>&);
template Matrix<float> transpose(const Matrix<float>&);
template Matrix<double> transpose(const Matrix<double>&);

SparseMatrixCSR SparseMatrixCSR::from_parts(std::size_t rows, std::size_t cols,
                                            std::vector<std::uint32_t> row_ptr,
                                            std::vector<std::uint32_t> col_idx,
                                            std::vector<float> values) {
  if (row_ptr.size() != rows + 1 || row_ptr.front() != 0)
    throw DimensionError("csr: row_ptr must have rows+1 entries starting at 0");
  if (col_idx.size() != values.size() || row_ptr.back() != values.size())
    throw DimensionError("csr: row_ptr[rows] must equal the nonzero count");
  for (std::size_t r = 0; r < rows; ++r) {
    if (row_ptr[r + 1] < row_ptr[r])
      throw DimensionError("csr: row_ptr is not nondecreasing at row " +
                           std::to_string(r));
    for (std::uint32_t p = row_ptr[r]; p < row_ptr[r + 1]; ++p) {
      if (col_idx[p] >= cols)
        throw DimensionError("csr: column index out of range in row " +
                             std::to_string(r));
      if (p > row_ptr[r] && col_idx[p] <= col_idx[p - 1])
        throw DimensionError("csr: column indices not increasing in row " +
                             std::to_string(r));
      if (values[p] == 0.0f)
        throw DomainError("csr: explicit zero stored in row " +
                          std::to_string(r));
    }
  }
  SparseMatrixCSR m;
  m.rows_ = rows;
  m.cols_ = cols;
  m.row_ptr_ = std::move(row_ptr);
  m.col_idx_ = std::move(col_idx);
  m.values_ = std::move(values);
  return m;
}

SparseMatrixCSR to_csr(const DenseMatrix& a) {
  if (a.size() > std::numeric_limits<std::uint32_t>::max())
    throw DimensionError("to_csr: matrix too large for 32-bit indices");
  SparseMatrixCSR m;
  m.rows_ = a.rows();
  m.cols_ = a.cols();
  m.row_ptr_.assign(a.rows() + 1, 0);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto row = a.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (row[c] != 0.0f) {
        m.col_idx_.push_back(static_cast<std::uint32_t>(c));
        m.values_.push_back(row[c]);
      }
    }
    m.row_ptr_[r + 1] = static_cast<std::uint32_t>(m.values_.size());
  }
  return m;
}

DenseMatrix densify(const SparseMatrixCSR& a) {
  DenseMatrix out(a.rows(), a.cols());
  const auto rp = a.row_ptr();
  const auto ci = a.col_idx();
  const auto v = a.values();
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::uint32_t p = rp[r]; p < rp[r + 1]; ++p) out(r, ci[p]) = v[p];
  return out;
}

DenseMatrix csr_dense_matmul(const SparseMatrixCSR& a, const DenseMatrix& b) {
  require_inner(a, b, a.cols(), b.rows(), "csr_dense_matmul");
  const std::size_t m = b.cols();
  DenseMatrix out(a.rows(), m);
  std::vector<double> acc(m);
  const auto rp = a.row_ptr();
  const auto ci = a.col_idx();
  const auto v = a.values();
  for (std::size_t r = 0; r < a.rows(); ++r) {
    std::fill(acc.begin(), acc.end(), 0.0);
    for (std::uint32_t p = rp[r]; p < rp[r + 1]; ++p) {
      const double av = v[p];
      const float* brow = b.data() + static_cast<std::size_t>(ci[p]) * m;
      for (std::size_t j = 0; j < m; ++j) acc[j] += av * brow[j];
    }
    float* orow = out.data() + r * m;
    for (std::size_t j = 0; j < m; ++j) orow[j] = static_cast<float>(acc[j]);
  }
  return out;
}

DenseMatrix dense_csr_matmul(const DenseMatrix& a, const SparseMatrixCSR& b) {
  require_inner(a, b, a.cols(), b.rows(), "dense_csr_matmul");
  const std::size_t m = b.cols(), k = a.cols();
  DenseMatrix out(a.rows(), m);
  const auto rp = b.row_ptr();
  const auto ci = b.col_idx();
  const auto v = b.values();
  // Four rows of `a` share each pass over the CSR entries, which amortizes
  // the index loads. Per-element accumulation order is unchanged.
  constexpr std::size_t kRows = 4;
  std::vector<double> acc(kRows * m);
  for (std::size_t i0 = 0; i0 < a.rows(); i0 += kRows) {
    const std::size_t rows = std::min(kRows, a.rows() - i0);
    std::fill(acc.begin(), acc.end(), 0.0);
    if (rows == kRows) {
      const float* a0 = a.data() + i0 * k;
      double* c0 = acc.data();
      double* c1 = c0 + m;
      double* c2 = c1 + m;
      double* c3 = c2 + m;
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double x0 = a0[kk], x1 = a0[k + kk], x2 = a0[2 * k + kk],
                     x3 = a0[3 * k + kk];
        for (std::uint32_t p = rp[kk]; p < rp[kk + 1]; ++p) {
          const std::uint32_t c = ci[p];
          const double w = v[p];
          c0[c] += x0 * w;
          c1[c] += x1 * w;
          c2[c] += x2 * w;
          c3[c] += x3 * w;
        }
      }
    } else {
      for (std::size_t r = 0; r < rows; ++r) {
        const float* arow = a.data() + (i0 + r) * k;
        double* c = acc.data() + r * m;
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double av = arow[kk];
          for (std::uint32_t p = rp[kk]; p < rp[kk + 1]; ++p) c[ci[p]] += av * v[p];
        }
      }
    }
    for (std::size_t r = 0; r < rows; ++r) {
      float* orow = out.data() + (i0 + r) * m;
      for (std::size_t j = 0; j < m; ++j) orow[j] = static_cast<float>(acc[r * m + j]);
    }
  }
  return out;
}

double sparsity(const DenseMatrix& a) {
  if (a.empty()) throw DomainError("sparsity of an empty matrix");
  std::size_t zeros = 0;
  for (float v : a.values()) zeros += (v == 0.0f);
  return static_cast<double>(zeros) / static_cast<double>(a.size());
}

}  // namespace prunesearch
