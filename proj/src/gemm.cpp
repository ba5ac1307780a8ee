#include "gistnet/gemm.hpp"

#include <algorithm>
#include <cstring>
#include <vector>

namespace gist::kernels {

namespace {

// 64-byte vectors; the compiler lowers them to whatever the target offers.
template <typename T>
using Vec [[gnu::vector_size(64)]] = T;

template <typename T>
constexpr std::size_t kLanes = 64 / sizeof(T);

constexpr std::size_t kRows = 8;
constexpr std::size_t kSmallRows = 4;

template <typename T>
inline Vec<T> load(const T* p) {
  Vec<T> v;
  std::memcpy(&v, p, sizeof(v));
  return v;
}

template <typename T>
inline void store(T* p, const Vec<T>& v) {
  std::memcpy(p, &v, sizeof(v));
}

// C[kRows, V*lanes] tile held in registers for the whole k loop. `a` is a
// packed [k, kRows] panel, `b` a packed [k, V*lanes] panel, `c` a dense
// [kRows, V*lanes] block with leading dimension ldc.
template <typename T, std::size_t V>
void tile(std::size_t k, const T* __restrict a, const T* __restrict b, T* __restrict c, std::size_t ldc) {
  constexpr std::size_t L = kLanes<T>;
  Vec<T> acc[kRows][V];
  for (std::size_t r = 0; r < kRows; ++r)
    for (std::size_t v = 0; v < V; ++v) acc[r][v] = load<T>(c + r * ldc + v * L);
  for (std::size_t p = 0; p < k; ++p) {
    Vec<T> bv[V];
    for (std::size_t v = 0; v < V; ++v) bv[v] = load<T>(b + p * V * L + v * L);
    for (std::size_t r = 0; r < kRows; ++r) {
      const T ar = a[p * kRows + r];
      for (std::size_t v = 0; v < V; ++v) acc[r][v] = acc[r][v] + ar * bv[v];
    }
  }
  for (std::size_t r = 0; r < kRows; ++r)
    for (std::size_t v = 0; v < V; ++v) store<T>(c + r * ldc + v * L, acc[r][v]);
}

}  // namespace

// Every C element is loaded once, accumulates a(i,p)*b(p,j) for p = 0..k-1 in
// order, and is stored once, so the result does not depend on tiling. Edge
// tiles go through zero-padded scratch; padding never mixes into valid
// elements.
template <typename T>
void gemm_accumulate(std::size_t m, std::size_t n, std::size_t k, MatrixView<T> a, const T* b,
                     std::size_t ldb, T* c, std::size_t ldc) {
  if (m == 0 || n == 0) return;
  if (m < kSmallRows) {
    // Packing would touch all of B for a handful of rows; stream it instead.
    for (std::size_t i = 0; i < m; ++i) {
      T* __restrict crow = c + i * ldc;
      for (std::size_t p = 0; p < k; ++p) {
        const T ap = a(i, p);
        const T* __restrict brow = b + p * ldb;
        for (std::size_t j = 0; j < n; ++j) crow[j] += ap * brow[j];
      }
    }
    return;
  }
  constexpr std::size_t L = kLanes<T>;
  constexpr std::size_t kWide = 2 * L;
  const std::size_t row_tiles = (m + kRows - 1) / kRows;

  std::vector<T> a_packed(row_tiles * k * kRows, T{0});
  for (std::size_t t = 0; t < row_tiles; ++t) {
    T* dst = a_packed.data() + t * k * kRows;
    for (std::size_t p = 0; p < k; ++p)
      for (std::size_t r = 0; r < kRows && t * kRows + r < m; ++r) dst[p * kRows + r] = a(t * kRows + r, p);
  }

  // Strided strips of B alias the same cache sets when ldb is a large power
  // of two, so each strip is copied into a contiguous panel first.
  std::vector<T> panel(k * kWide);
  T scratch[kRows * kWide];
  for (std::size_t j = 0; j < n;) {
    const std::size_t width = n - j >= kWide ? kWide : L;
    const std::size_t valid = std::min(width, n - j);
    if (valid == kWide) {
      for (std::size_t p = 0; p < k; ++p) {
        store<T>(panel.data() + p * kWide, load<T>(b + p * ldb + j));
        store<T>(panel.data() + p * kWide + L, load<T>(b + p * ldb + j + L));
      }
    } else if (valid == L) {
      for (std::size_t p = 0; p < k; ++p) store<T>(panel.data() + p * L, load<T>(b + p * ldb + j));
    } else {
      for (std::size_t p = 0; p < k; ++p) {
        const T* src = b + p * ldb + j;
        T* dst = panel.data() + p * width;
        std::copy(src, src + valid, dst);
        std::fill(dst + valid, dst + width, T{0});
      }
    }
    for (std::size_t t = 0; t < row_tiles; ++t) {
      const std::size_t i = t * kRows;
      const std::size_t rows = std::min(kRows, m - i);
      const T* ap = a_packed.data() + t * k * kRows;
      const bool full = rows == kRows && valid == width;
      T* target = full ? c + i * ldc + j : scratch;
      const std::size_t ld = full ? ldc : width;
      if (!full) {
        std::fill(scratch, scratch + kRows * kWide, T{0});
        for (std::size_t r = 0; r < rows; ++r)
          std::memcpy(scratch + r * width, c + (i + r) * ldc + j, valid * sizeof(T));
      }
      if (width == kWide)
        tile<T, 2>(k, ap, panel.data(), target, ld);
      else
        tile<T, 1>(k, ap, panel.data(), target, ld);
      if (!full)
        for (std::size_t r = 0; r < rows; ++r)
          std::memcpy(c + (i + r) * ldc + j, scratch + r * width, valid * sizeof(T));
    }
    j += valid;
  }
}

template void gemm_accumulate<float>(std::size_t, std::size_t, std::size_t, MatrixView<float>,
                                     const float*, std::size_t, float*, std::size_t);
template void gemm_accumulate<double>(std::size_t, std::size_t, std::size_t, MatrixView<double>,
                                      const double*, std::size_t, double*, std::size_t);

}  // namespace gist::kernels
