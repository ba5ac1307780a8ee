#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "gistnet/errors.hpp"
#include "gistnet/rng.hpp"

namespace gist {

/// Ordered list of positive extents. Rank is at least one.
class Shape {
 public:
  Shape() : dims_{1} {}
  Shape(std::initializer_list<std::size_t> dims);
  explicit Shape(std::vector<std::size_t> dims);

  std::size_t rank() const { return dims_.size(); }
  std::size_t operator[](std::size_t i) const { return dims_[i]; }
  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t numel() const { return numel_; }

  std::string to_string() const;

  friend bool operator==(const Shape& a, const Shape& b) { return a.dims_ == b.dims_; }

 private:
  void validate();

  std::vector<std::size_t> dims_;
  std::size_t numel_ = 1;
};

enum class DType : std::uint8_t { kFloat32 = 1, kFloat64 = 2 };

template <typename T>
constexpr DType dtype_of();
template <>
constexpr DType dtype_of<float>() { return DType::kFloat32; }
template <>
constexpr DType dtype_of<double>() { return DType::kFloat64; }

/// Dense row-major array with an explicit shape.
///
/// Values are treated as immutable once a tensor is handed to another
/// component; `mutable_values()` exists so kernels can fill freshly created
/// outputs without an extra copy.
template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() : data_(1, T{0}) {}
  BasicTensor(Shape shape, std::vector<T> values);

  static BasicTensor zeros(const Shape& shape) { return full(shape, T{0}); }
  static BasicTensor full(const Shape& shape, T value);

  const Shape& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t rank() const { return shape_.rank(); }
  static constexpr DType dtype() { return dtype_of<T>(); }

  std::span<const T> values() const { return data_; }
  std::span<T> mutable_values() { return data_; }
  const T* data() const { return data_.data(); }
  T* mutable_data() { return data_.data(); }

  T operator[](std::size_t flat) const { return data_[flat]; }
  T& operator[](std::size_t flat) { return data_[flat]; }

  /// Rank-checked element access in row-major order.
  T at(std::initializer_list<std::size_t> index) const;

  BasicTensor reshaped(const Shape& shape) const&;
  BasicTensor reshaped(const Shape& shape) &&;

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return BasicTensor<U>(shape_, std::move(out));
  }

  T sum() const;

  bool all_finite() const;

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

/// Rank-1 tensor owning `values`.
template <typename T>
BasicTensor<T> make_vector(std::vector<T> values) {
  const std::size_t n = values.size();
  return BasicTensor<T>(Shape{n}, std::move(values));
}

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

/// Builds a tensor from a flat row-major sequence. Throws ShapeError when the
/// length does not match the shape.
template <typename T>
BasicTensor<T> tensor_create(const Shape& shape, std::span<const T> values);

/// Matrix product of [m,k] x [k,n]. Each output accumulates in ascending k.
template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor);
template <typename T>
BasicTensor<T> map_unary(const BasicTensor<T>& a, const std::function<T(T)>& fn);

/// Axis-aligned pixel rectangle; x/y index columns/rows.
struct Rect {
  std::int64_t x = 0;
  std::int64_t y = 0;
  std::int64_t w = 0;
  std::int64_t h = 0;

  std::int64_t area() const { return w * h; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

/// Copy of a [C,H,W] tensor with every channel inside `rect` set to `value`.
/// Throws BoundsError unless the rect lies inside the image.
template <typename T>
BasicTensor<T> region_fill(const BasicTensor<T>& image, const Rect& rect, T value);

/// Indices of the k largest entries, descending by value, ties by ascending
/// index.
template <typename T>
std::vector<std::size_t> topk_indices(std::span<const T> values, std::size_t k);
template <typename T>
std::vector<std::size_t> topk_indices(const BasicTensor<T>& v, std::size_t k);

template <typename T>
BasicTensor<T> random_normal(SeededRng& rng, const Shape& shape, double mean, double stddev);

}  // namespace gist
