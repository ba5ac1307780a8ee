#pragma once

#include <cstddef>

namespace gist::kernels {

/// Strided view of a row-major or transposed matrix operand.
template <typename T>
struct MatrixView {
  const T* data;
  std::size_t row_stride;
  std::size_t col_stride;

  T operator()(std::size_t r, std::size_t c) const { return data[r * row_stride + c * col_stride]; }
};

/// C[m,n] += A[m,k] * B[k,n] where B and C are dense row-major with leading
/// dimensions ldb/ldc. Every C element accumulates its products in ascending k
/// order, independent of blocking.
template <typename T>
void gemm_accumulate(std::size_t m, std::size_t n, std::size_t k, MatrixView<T> a, const T* b,
                     std::size_t ldb, T* c, std::size_t ldc);

}  // namespace gist::kernels
