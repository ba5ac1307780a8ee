#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gistnet/rng.hpp"
#include "gistnet/tensor.hpp"

namespace gist {

struct Conv2D {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pad = 1;

  /// Same-style padding (k-1)/2.
  static Conv2D same(std::size_t in_ch, std::size_t out_ch, std::size_t k, std::size_t s = 1) {
    return Conv2D{in_ch, out_ch, k, s, (k - 1) / 2};
  }
  std::size_t output_extent(std::size_t in) const { return (in + 2 * pad - kernel) / stride + 1; }
};

struct Dense {
  std::size_t in_features = 0;
  std::size_t out_features = 0;
};

struct ReLU {};
struct MaxPool2 {};
struct Flatten {};
struct Concat2 {};
struct SoftmaxCrossEntropy {
  std::size_t num_classes = 0;
};

using LayerSpec = std::variant<Conv2D, Dense, ReLU, MaxPool2, Flatten, Concat2, SoftmaxCrossEntropy>;

std::string describe(const LayerSpec& spec);
bool has_params(const LayerSpec& spec);
/// Weight and bias shapes of a parameterized layer.
std::pair<Shape, Shape> param_shapes(const LayerSpec& spec);
std::size_t param_count(const LayerSpec& spec);

template <typename T>
struct LayerParams {
  BasicTensor<T> weights;
  BasicTensor<T> bias;

  std::size_t count() const { return weights.size() + bias.size(); }
};

template <typename T>
struct ConvCache {
  Shape input_shape;
  /// im2col matrix [in_ch*k*k, H'*W'].
  BasicTensor<T> columns;
  std::size_t out_h = 0;
  std::size_t out_w = 0;
};

template <typename T>
struct DenseCache {
  BasicTensor<T> input;
};

template <typename T>
struct ReluCache {
  BasicTensor<T> input;
};

template <typename T>
struct PoolCache {
  Shape input_shape;
  /// Flat input index of each output's argmax.
  std::vector<std::size_t> argmax;
};

struct FlattenCache {
  Shape input_shape;
};

struct ConcatCache {
  std::size_t split = 0;
};

template <typename T>
struct SoftmaxCache {
  BasicTensor<T> probs;
  std::size_t label = 0;
};

template <typename T>
struct Gradients {
  BasicTensor<T> dx;
  BasicTensor<T> dweights;
  BasicTensor<T> dbias;
};

template <typename T>
std::pair<BasicTensor<T>, ConvCache<T>> conv2d_forward(const Conv2D& spec, const LayerParams<T>& params,
                                                      const BasicTensor<T>& x);
/// Consumes the cache. dx is skipped (left default) when `need_dx` is false.
template <typename T>
Gradients<T> conv2d_backward(const Conv2D& spec, const LayerParams<T>& params, ConvCache<T>&& cache,
                             const BasicTensor<T>& dy, bool need_dx = true);

template <typename T>
std::pair<BasicTensor<T>, DenseCache<T>> dense_forward(const Dense& spec, const LayerParams<T>& params,
                                                      const BasicTensor<T>& x);
template <typename T>
Gradients<T> dense_backward(const Dense& spec, const LayerParams<T>& params, DenseCache<T>&& cache,
                            const BasicTensor<T>& dy);

template <typename T>
std::pair<BasicTensor<T>, ReluCache<T>> relu_forward(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> relu_backward(ReluCache<T>&& cache, const BasicTensor<T>& dy);

template <typename T>
std::pair<BasicTensor<T>, PoolCache<T>> maxpool2_forward(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> maxpool2_backward(PoolCache<T>&& cache, const BasicTensor<T>& dy);

template <typename T>
std::pair<BasicTensor<T>, FlattenCache> flatten_forward(const BasicTensor<T>& x);
template <typename T>
BasicTensor<T> flatten_backward(FlattenCache&& cache, const BasicTensor<T>& dy);

template <typename T>
std::pair<BasicTensor<T>, ConcatCache> concat2_forward(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> concat2_backward(ConcatCache&& cache, const BasicTensor<T>& dy);

/// Stable softmax cross-entropy. Returns -log softmax(logits)[label].
template <typename T>
std::pair<T, SoftmaxCache<T>> softmax_xent_forward(const BasicTensor<T>& logits, std::size_t label);
template <typename T>
BasicTensor<T> softmax_xent_backward(SoftmaxCache<T>&& cache);

template <typename T>
BasicTensor<T> softmax(std::span<const T> logits);

/// He-normal weights (std = sqrt(2 / fan_in)), zero biases.
template <typename T>
LayerParams<T> init_params(const LayerSpec& spec, SeededRng& rng);

}  // namespace gist
