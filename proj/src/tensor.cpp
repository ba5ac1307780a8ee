#include "gistnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "gistnet/gemm.hpp"

namespace gist {

Shape::Shape(std::initializer_list<std::size_t> dims) : dims_(dims) { validate(); }

Shape::Shape(std::vector<std::size_t> dims) : dims_(std::move(dims)) { validate(); }

void Shape::validate() {
  if (dims_.empty()) throw ShapeError("shape must have rank >= 1");
  numel_ = 1;
  for (std::size_t d : dims_) {
    if (d == 0) throw ShapeError("shape " + to_string() + " has a zero extent");
    if (numel_ > std::numeric_limits<std::uint64_t>::max() / d)
      throw ShapeError("shape " + to_string() + " overflows the element count");
    numel_ *= d;
  }
}

std::string Shape::to_string() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (i) os << ',';
    os << dims_[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != shape_.numel()) {
    throw ShapeError("tensor of shape " + shape_.to_string() + " needs " +
                     std::to_string(shape_.numel()) + " values, got " +
                     std::to_string(data_.size()));
  }
}

template <typename T>
BasicTensor<T> BasicTensor<T>::full(const Shape& shape, T value) {
  return BasicTensor(shape, std::vector<T>(shape.numel(), value));
}

template <typename T>
T BasicTensor<T>::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != shape_.rank())
    throw ShapeError("index rank " + std::to_string(index.size()) + " vs tensor " + shape_.to_string());
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= shape_[axis]) throw BoundsError("index out of range for " + shape_.to_string());
    flat = flat * shape_[axis] + i;
    ++axis;
  }
  return data_[flat];
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(const Shape& shape) const& {
  if (shape.numel() != size())
    throw ShapeError("cannot reshape " + shape_.to_string() + " to " + shape.to_string());
  return BasicTensor(shape, data_);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::reshaped(const Shape& shape) && {
  if (shape.numel() != size())
    throw ShapeError("cannot reshape " + shape_.to_string() + " to " + shape.to_string());
  return BasicTensor(shape, std::move(data_));
}

template <typename T>
T BasicTensor<T>::sum() const {
  T s{0};
  for (T v : data_) s += v;
  return s;
}

template <typename T>
bool BasicTensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
BasicTensor<T> tensor_create(const Shape& shape, std::span<const T> values) {
  return BasicTensor<T>(shape, std::vector<T>(values.begin(), values.end()));
}

template <typename T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: cannot multiply " + a.shape().to_string() + " by " +
                     b.shape().to_string());
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto out = BasicTensor<T>::zeros(Shape{m, n});
  kernels::gemm_accumulate<T>(m, n, k, {a.data(), k, 1}, b.data(), n, out.mutable_data(), n);
  return out;
}

namespace {

template <typename T, typename Fn>
BasicTensor<T> zip(const char* name, const BasicTensor<T>& a, const BasicTensor<T>& b, Fn fn) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(name) + ": shape mismatch " + a.shape().to_string() + " vs " +
                     b.shape().to_string());
  }
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(a[i], b[i]);
  return BasicTensor<T>(a.shape(), std::move(out));
}

}  // namespace

template <typename T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return zip("add", a, b, [](T x, T y) { return x + y; });
}

template <typename T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return zip("sub", a, b, [](T x, T y) { return x - y; });
}

template <typename T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return zip("mul", a, b, [](T x, T y) { return x * y; });
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& a, T factor) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
  return BasicTensor<T>(a.shape(), std::move(out));
}

template <typename T>
BasicTensor<T> map_unary(const BasicTensor<T>& a, const std::function<T(T)>& fn) {
  std::vector<T> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fn(a[i]);
  return BasicTensor<T>(a.shape(), std::move(out));
}

template <typename T>
BasicTensor<T> region_fill(const BasicTensor<T>& image, const Rect& rect, T value) {
  if (image.rank() != 3) throw ShapeError("region_fill expects [C,H,W], got " + image.shape().to_string());
  const auto c = static_cast<std::int64_t>(image.dim(0));
  const auto h = static_cast<std::int64_t>(image.dim(1));
  const auto w = static_cast<std::int64_t>(image.dim(2));
  if (rect.x < 0 || rect.y < 0 || rect.w < 0 || rect.h < 0 || rect.x + rect.w > w ||
      rect.y + rect.h > h) {
    throw BoundsError("region_fill: rect (" + std::to_string(rect.x) + "," + std::to_string(rect.y) +
                      "," + std::to_string(rect.w) + "," + std::to_string(rect.h) +
                      ") outside image " + image.shape().to_string());
  }
  BasicTensor<T> out = image;
  T* data = out.mutable_data();
  for (std::int64_t ch = 0; ch < c; ++ch) {
    for (std::int64_t y = rect.y; y < rect.y + rect.h; ++y) {
      T* row = data + (ch * h + y) * w;
      std::fill(row + rect.x, row + rect.x + rect.w, value);
    }
  }
  return out;
}

template <typename T>
std::vector<std::size_t> topk_indices(std::span<const T> values, std::size_t k) {
  if (k == 0 || k > values.size()) {
    throw ArgumentError("topk_indices: k=" + std::to_string(k) + " with " +
                        std::to_string(values.size()) + " values");
  }
  std::vector<std::size_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto better = [&](std::size_t a, std::size_t b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return a < b;
  };
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), better);
  idx.resize(k);
  return idx;
}

template <typename T>
std::vector<std::size_t> topk_indices(const BasicTensor<T>& v, std::size_t k) {
  if (v.rank() != 1) throw ShapeError("topk_indices expects a rank-1 tensor");
  return topk_indices<T>(v.values(), k);
}

template <typename T>
BasicTensor<T> random_normal(SeededRng& rng, const Shape& shape, double mean, double stddev) {
  if (!(stddev >= 0.0)) throw ArgumentError("random_normal: negative std");
  std::vector<T> out(shape.numel());
  for (auto& v : out) v = static_cast<T>(mean + stddev * rng.normal());
  return BasicTensor<T>(shape, std::move(out));
}

#define GIST_INSTANTIATE(T)                                                                       \
  template class BasicTensor<T>;                                                                  \
  template BasicTensor<T> tensor_create<T>(const Shape&, std::span<const T>);                     \
  template BasicTensor<T> matmul<T>(const BasicTensor<T>&, const BasicTensor<T>&);                \
  template BasicTensor<T> add<T>(const BasicTensor<T>&, const BasicTensor<T>&);                   \
  template BasicTensor<T> sub<T>(const BasicTensor<T>&, const BasicTensor<T>&);                   \
  template BasicTensor<T> mul<T>(const BasicTensor<T>&, const BasicTensor<T>&);                   \
  template BasicTensor<T> scale<T>(const BasicTensor<T>&, T);                                     \
  template BasicTensor<T> map_unary<T>(const BasicTensor<T>&, const std::function<T(T)>&);        \
  template BasicTensor<T> region_fill<T>(const BasicTensor<T>&, const Rect&, T);                  \
  template std::vector<std::size_t> topk_indices<T>(std::span<const T>, std::size_t);            \
  template std::vector<std::size_t> topk_indices<T>(const BasicTensor<T>&, std::size_t);         \
  template BasicTensor<T> random_normal<T>(SeededRng&, const Shape&, double, double);

GIST_INSTANTIATE(float)
GIST_INSTANTIATE(double)

#undef GIST_INSTANTIATE

}  // namespace gist
