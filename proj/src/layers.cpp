#include "gistnet/layers.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gistnet/gemm.hpp"

namespace gist {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

// Output columns [lo, hi) whose input column ox*s + kx - pad lies in [0, in_w).
std::pair<std::size_t, std::size_t> valid_range(std::size_t out_w, std::size_t in_w, std::size_t s, std::size_t kx,
                                                std::ptrdiff_t pad) {
  std::size_t lo = 0;
  while (lo < out_w && static_cast<std::ptrdiff_t>(lo * s + kx) < pad) ++lo;
  std::size_t hi = lo;
  while (hi < out_w && static_cast<std::ptrdiff_t>(hi * s + kx) - pad < static_cast<std::ptrdiff_t>(in_w)) ++hi;
  return {lo, hi};
}

}  // namespace

std::string describe(const LayerSpec& spec) {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const Conv2D& c) {
                   os << "Conv2D(" << c.in_channels << "->" << c.out_channels << ", k=" << c.kernel
                      << ", s=" << c.stride << ", p=" << c.pad << ")";
                 },
                 [&](const Dense& d) { os << "Dense(" << d.in_features << "->" << d.out_features << ")"; },
                 [&](const ReLU&) { os << "ReLU"; },
                 [&](const MaxPool2&) { os << "MaxPool2"; },
                 [&](const Flatten&) { os << "Flatten"; },
                 [&](const Concat2&) { os << "Concat2"; },
                 [&](const SoftmaxCrossEntropy& s) { os << "SoftmaxCrossEntropy(" << s.num_classes << ")"; },
             },
             spec);
  return os.str();
}

bool has_params(const LayerSpec& spec) {
  return std::holds_alternative<Conv2D>(spec) || std::holds_alternative<Dense>(spec);
}

std::pair<Shape, Shape> param_shapes(const LayerSpec& spec) {
  if (const auto* c = std::get_if<Conv2D>(&spec)) {
    return {Shape{c->out_channels, c->in_channels, c->kernel, c->kernel}, Shape{c->out_channels}};
  }
  if (const auto* d = std::get_if<Dense>(&spec)) {
    return {Shape{d->in_features, d->out_features}, Shape{d->out_features}};
  }
  throw ArgumentError(describe(spec) + " has no parameters");
}

std::size_t param_count(const LayerSpec& spec) {
  if (!has_params(spec)) return 0;
  auto [w, b] = param_shapes(spec);
  return w.numel() + b.numel();
}

// ---------------------------------------------------------------------------
// Conv2D via im2col.

template <typename T>
std::pair<BasicTensor<T>, ConvCache<T>> conv2d_forward(const Conv2D& spec, const LayerParams<T>& params,
                                                      const BasicTensor<T>& x) {
  if (x.rank() != 3)
    throw ShapeError("conv2d: input must be [C,H,W], got " + x.shape().to_string());
  if (x.dim(0) != spec.in_channels)
    throw ShapeError("conv2d: expected " + std::to_string(spec.in_channels) +
                                            " input channels, got " + x.shape().to_string());
  const std::size_t in_h = x.dim(1), in_w = x.dim(2);
  if (in_h + 2 * spec.pad < spec.kernel || in_w + 2 * spec.pad < spec.kernel)
    throw ShapeError("conv2d: input " + x.shape().to_string() + " smaller than kernel");
  const std::size_t k = spec.kernel, s = spec.stride;
  const auto pad = static_cast<std::ptrdiff_t>(spec.pad);
  const std::size_t out_h = spec.output_extent(in_h), out_w = spec.output_extent(in_w);
  const std::size_t n = out_h * out_w;
  const std::size_t kk = spec.in_channels * k * k;

  std::vector<T> cols(kk * n, T{0});
  const T* xd = x.data();
  for (std::size_t c = 0; c < spec.in_channels; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        T* row = cols.data() + ((c * k + ky) * k + kx) * n;
        const auto [lo, hi] = valid_range(out_w, in_w, s, kx, pad);
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s + ky) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in_h)) continue;
          const T* src = xd + (c * in_h + static_cast<std::size_t>(iy)) * in_w;
          T* dst = row + oy * out_w;
          const T* from = src + (lo * s + kx - static_cast<std::size_t>(pad));
          if (s == 1) {
            std::copy(from, from + (hi - lo), dst + lo);
          } else {
            for (std::size_t ox = lo; ox < hi; ++ox) dst[ox] = from[(ox - lo) * s];
          }
        }
      }
    }
  }

  std::vector<T> out(spec.out_channels * n, T{0});
  kernels::gemm_accumulate<T>(spec.out_channels, n, kk, {params.weights.data(), kk, 1}, cols.data(), n,
                              out.data(), n);
  for (std::size_t o = 0; o < spec.out_channels; ++o) {
    const T b = params.bias[o];
    T* row = out.data() + o * n;
    for (std::size_t j = 0; j < n; ++j) row[j] += b;
  }
  ConvCache<T> cache{x.shape(), BasicTensor<T>(Shape{kk, n}, std::move(cols)), out_h, out_w};
  return {BasicTensor<T>(Shape{spec.out_channels, out_h, out_w}, std::move(out)), std::move(cache)};
}

template <typename T>
Gradients<T> conv2d_backward(const Conv2D& spec, const LayerParams<T>& params, ConvCache<T>&& cache,
                             const BasicTensor<T>& dy, bool need_dx) {
  const Shape out_shape{spec.out_channels, cache.out_h, cache.out_w};
  if (dy.shape() != out_shape)
    throw ShapeError("conv2d_backward: dy " + dy.shape().to_string() + " vs output " + out_shape.to_string());
  const std::size_t n = cache.out_h * cache.out_w;
  const std::size_t k = spec.kernel, s = spec.stride;
  const std::size_t kk = spec.in_channels * k * k;
  const T* dyd = dy.data();

  std::vector<T> db(spec.out_channels, T{0});
  for (std::size_t o = 0; o < spec.out_channels; ++o) {
    T acc{0};
    for (std::size_t j = 0; j < n; ++j) acc += dyd[o * n + j];
    db[o] = acc;
  }

  // dW^T[q, o] = sum_j cols[q, j] * dy^T[j, o]; transposing dy is much
  // cheaper than transposing the column matrix.
  const std::size_t out_ch = spec.out_channels;
  std::vector<T> dy_t(n * out_ch);
  for (std::size_t o = 0; o < out_ch; ++o)
    for (std::size_t j = 0; j < n; ++j) dy_t[j * out_ch + o] = dyd[o * n + j];
  std::vector<T> dw_t(kk * out_ch, T{0});
  kernels::gemm_accumulate<T>(kk, out_ch, n, {cache.columns.data(), n, 1}, dy_t.data(), out_ch, dw_t.data(),
                              out_ch);
  std::vector<T> dw(out_ch * kk);
  for (std::size_t q = 0; q < kk; ++q)
    for (std::size_t o = 0; o < out_ch; ++o) dw[o * kk + q] = dw_t[q * out_ch + o];

  Gradients<T> grads;
  grads.dweights = BasicTensor<T>(params.weights.shape(), std::move(dw));
  grads.dbias = BasicTensor<T>(Shape{spec.out_channels}, std::move(db));
  if (!need_dx) return grads;

  std::vector<T> dcols(kk * n, T{0});
  kernels::gemm_accumulate<T>(kk, n, spec.out_channels, {params.weights.data(), 1, kk}, dyd, n,
                              dcols.data(), n);
  const std::size_t in_h = cache.input_shape[1], in_w = cache.input_shape[2];
  const auto pad = static_cast<std::ptrdiff_t>(spec.pad);
  std::vector<T> dx(cache.input_shape.numel(), T{0});
  for (std::size_t c = 0; c < spec.in_channels; ++c) {
    for (std::size_t ky = 0; ky < k; ++ky) {
      for (std::size_t kx = 0; kx < k; ++kx) {
        const T* row = dcols.data() + ((c * k + ky) * k + kx) * n;
        const auto [lo, hi] = valid_range(cache.out_w, in_w, s, kx, pad);
        for (std::size_t oy = 0; oy < cache.out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * s + ky) - pad;
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(in_h)) continue;
          T* dst = dx.data() + (c * in_h + static_cast<std::size_t>(iy)) * in_w;
          const T* src = row + oy * cache.out_w;
          T* to = dst + (lo * s + kx - static_cast<std::size_t>(pad));
          for (std::size_t ox = lo; ox < hi; ++ox) to[(ox - lo) * s] += src[ox];
        }
      }
    }
  }
  grads.dx = BasicTensor<T>(cache.input_shape, std::move(dx));
  return grads;
}

// ---------------------------------------------------------------------------
// Dense: y = x^T W + b with W stored [in, out].

template <typename T>
std::pair<BasicTensor<T>, DenseCache<T>> dense_forward(const Dense& spec, const LayerParams<T>& params,
                                                      const BasicTensor<T>& x) {
  if (x.rank() != 1 || x.dim(0) != spec.in_features)
    throw ShapeError("dense: expected input [" + std::to_string(spec.in_features) + "], got " + x.shape().to_string());
  std::vector<T> y(spec.out_features, T{0});
  kernels::gemm_accumulate<T>(1, spec.out_features, spec.in_features, {x.data(), spec.in_features, 1},
                              params.weights.data(), spec.out_features, y.data(), spec.out_features);
  for (std::size_t j = 0; j < spec.out_features; ++j) y[j] += params.bias[j];
  return {BasicTensor<T>(Shape{spec.out_features}, std::move(y)), DenseCache<T>{x}};
}

template <typename T>
Gradients<T> dense_backward(const Dense& spec, const LayerParams<T>& params, DenseCache<T>&& cache,
                            const BasicTensor<T>& dy) {
  if (dy.rank() != 1 || dy.dim(0) != spec.out_features)
    throw ShapeError("dense_backward: dy " + dy.shape().to_string() + " vs [" + std::to_string(spec.out_features) + "]");
  const std::size_t in = spec.in_features, out = spec.out_features;
  const T* x = cache.input.data();
  const T* g = dy.data();
  const T* w = params.weights.data();

  std::vector<T> dw(in * out);
  for (std::size_t i = 0; i < in; ++i) {
    const T xi = x[i];
    T* row = dw.data() + i * out;
    for (std::size_t j = 0; j < out; ++j) row[j] = xi * g[j];
  }
  std::vector<T> dx(in);
  for (std::size_t i = 0; i < in; ++i) {
    const T* row = w + i * out;
    T acc{0};
    for (std::size_t j = 0; j < out; ++j) acc += row[j] * g[j];
    dx[i] = acc;
  }
  Gradients<T> grads;
  grads.dx = BasicTensor<T>(Shape{in}, std::move(dx));
  grads.dweights = BasicTensor<T>(Shape{in, out}, std::move(dw));
  grads.dbias = dy;
  return grads;
}

// ---------------------------------------------------------------------------

template <typename T>
std::pair<BasicTensor<T>, ReluCache<T>> relu_forward(const BasicTensor<T>& x) {
  std::vector<T> y(x.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
  return {BasicTensor<T>(x.shape(), std::move(y)), ReluCache<T>{x}};
}

template <typename T>
BasicTensor<T> relu_backward(ReluCache<T>&& cache, const BasicTensor<T>& dy) {
  if (dy.shape() != cache.input.shape()) throw ShapeError("relu_backward: dy shape mismatch");
  std::vector<T> dx(dy.size());
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = cache.input[i] > T{0} ? dy[i] : T{0};
  return BasicTensor<T>(dy.shape(), std::move(dx));
}

template <typename T>
std::pair<BasicTensor<T>, PoolCache<T>> maxpool2_forward(const BasicTensor<T>& x) {
  if (x.rank() != 3)
    throw ShapeError("maxpool2: input must be [C,H,W], got " + x.shape().to_string());
  const std::size_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 != 0 || w % 2 != 0)
    throw ShapeError("maxpool2: odd spatial extent in " + x.shape().to_string());
  const std::size_t oh = h / 2, ow = w / 2;
  std::vector<T> y(c * oh * ow);
  std::vector<std::size_t> arg(y.size());
  const T* xd = x.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const std::size_t base = (ch * h + 2 * oy) * w + 2 * ox;
        const std::size_t candidates[4] = {base, base + 1, base + w, base + w + 1};
        std::size_t best = candidates[0];
        for (int i = 1; i < 4; ++i)
          if (xd[candidates[i]] > xd[best]) best = candidates[i];
        const std::size_t o = (ch * oh + oy) * ow + ox;
        y[o] = xd[best];
        arg[o] = best;
      }
    }
  }
  return {BasicTensor<T>(Shape{c, oh, ow}, std::move(y)), PoolCache<T>{x.shape(), std::move(arg)}};
}

template <typename T>
BasicTensor<T> maxpool2_backward(PoolCache<T>&& cache, const BasicTensor<T>& dy) {
  if (dy.size() != cache.argmax.size()) throw ShapeError("maxpool2_backward: dy shape mismatch");
  std::vector<T> dx(cache.input_shape.numel(), T{0});
  for (std::size_t o = 0; o < cache.argmax.size(); ++o) dx[cache.argmax[o]] += dy[o];
  return BasicTensor<T>(cache.input_shape, std::move(dx));
}

template <typename T>
std::pair<BasicTensor<T>, FlattenCache> flatten_forward(const BasicTensor<T>& x) {
  return {x.reshaped(Shape{x.size()}), FlattenCache{x.shape()}};
}

template <typename T>
BasicTensor<T> flatten_backward(FlattenCache&& cache, const BasicTensor<T>& dy) {
  return dy.reshaped(cache.input_shape);
}

template <typename T>
std::pair<BasicTensor<T>, ConcatCache> concat2_forward(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 1 || b.rank() != 1)
    throw ShapeError("concat2: inputs must be rank-1, got " + a.shape().to_string() + " and " + b.shape().to_string());
  std::vector<T> y;
  y.reserve(a.size() + b.size());
  y.insert(y.end(), a.values().begin(), a.values().end());
  y.insert(y.end(), b.values().begin(), b.values().end());
  return {make_vector(std::move(y)), ConcatCache{a.size()}};
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> concat2_backward(ConcatCache&& cache, const BasicTensor<T>& dy) {
  if (dy.rank() != 1 || cache.split < 1 || dy.size() <= cache.split)
    throw ShapeError("concat2_backward: bad dy shape");
  auto v = dy.values();
  std::vector<T> da(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(cache.split));
  std::vector<T> db(v.begin() + static_cast<std::ptrdiff_t>(cache.split), v.end());
  return {make_vector(std::move(da)), make_vector(std::move(db))};
}

template <typename T>
BasicTensor<T> softmax(std::span<const T> logits) {
  const T m = *std::max_element(logits.begin(), logits.end());
  std::vector<T> p(logits.size());
  T z{0};
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (auto& v : p) v /= z;
  return make_vector(std::move(p));
}

template <typename T>
std::pair<T, SoftmaxCache<T>> softmax_xent_forward(const BasicTensor<T>& logits, std::size_t label) {
  if (logits.rank() != 1) throw ShapeError("softmax_xent: logits must be rank-1");
  if (label >= logits.size()) {
    throw ArgumentError("softmax_xent: label " + std::to_string(label) + " outside [0," +
                        std::to_string(logits.size()) + ")");
  }
  auto v = logits.values();
  const T m = *std::max_element(v.begin(), v.end());
  T z{0};
  for (T l : v) z += std::exp(l - m);
  const T loss = -(v[label] - m - std::log(z));
  return {loss, SoftmaxCache<T>{softmax<T>(v), label}};
}

template <typename T>
BasicTensor<T> softmax_xent_backward(SoftmaxCache<T>&& cache) {
  BasicTensor<T> d = std::move(cache.probs);
  d[cache.label] -= T{1};
  return d;
}

template <typename T>
LayerParams<T> init_params(const LayerSpec& spec, SeededRng& rng) {
  auto [wshape, bshape] = param_shapes(spec);
  std::size_t fan_in = 0;
  if (const auto* c = std::get_if<Conv2D>(&spec)) fan_in = c->in_channels * c->kernel * c->kernel;
  if (const auto* d = std::get_if<Dense>(&spec)) fan_in = d->in_features;
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  return LayerParams<T>{random_normal<T>(rng, wshape, 0.0, stddev), BasicTensor<T>::zeros(bshape)};
}

#define GIST_INSTANTIATE(T)                                                                                  \
  template std::pair<BasicTensor<T>, ConvCache<T>> conv2d_forward<T>(const Conv2D&, const LayerParams<T>&,    \
                                                                     const BasicTensor<T>&);                 \
  template Gradients<T> conv2d_backward<T>(const Conv2D&, const LayerParams<T>&, ConvCache<T>&&,             \
                                           const BasicTensor<T>&, bool);                                     \
  template std::pair<BasicTensor<T>, DenseCache<T>> dense_forward<T>(const Dense&, const LayerParams<T>&,     \
                                                                     const BasicTensor<T>&);                 \
  template Gradients<T> dense_backward<T>(const Dense&, const LayerParams<T>&, DenseCache<T>&&,              \
                                          const BasicTensor<T>&);                                            \
  template std::pair<BasicTensor<T>, ReluCache<T>> relu_forward<T>(const BasicTensor<T>&);                   \
  template BasicTensor<T> relu_backward<T>(ReluCache<T>&&, const BasicTensor<T>&);                           \
  template std::pair<BasicTensor<T>, PoolCache<T>> maxpool2_forward<T>(const BasicTensor<T>&);               \
  template BasicTensor<T> maxpool2_backward<T>(PoolCache<T>&&, const BasicTensor<T>&);                       \
  template std::pair<BasicTensor<T>, FlattenCache> flatten_forward<T>(const BasicTensor<T>&);                \
  template BasicTensor<T> flatten_backward<T>(FlattenCache&&, const BasicTensor<T>&);                        \
  template std::pair<BasicTensor<T>, ConcatCache> concat2_forward<T>(const BasicTensor<T>&,                  \
                                                                     const BasicTensor<T>&);                 \
  template std::pair<BasicTensor<T>, BasicTensor<T>> concat2_backward<T>(ConcatCache&&,                      \
                                                                         const BasicTensor<T>&);             \
  template BasicTensor<T> softmax<T>(std::span<const T>);                                                    \
  template std::pair<T, SoftmaxCache<T>> softmax_xent_forward<T>(const BasicTensor<T>&, std::size_t);        \
  template BasicTensor<T> softmax_xent_backward<T>(SoftmaxCache<T>&&);                                       \
  template LayerParams<T> init_params<T>(const LayerSpec&, SeededRng&);

GIST_INSTANTIATE(float)
GIST_INSTANTIATE(double)

#undef GIST_INSTANTIATE

}  // namespace gist
