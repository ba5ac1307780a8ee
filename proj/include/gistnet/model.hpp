#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "gistnet/layers.hpp"
#include "gistnet/tensor.hpp"

namespace gist {

/// A named layer. Names follow `<stream>.<layer>`, e.g. `fovea.conv1_1`,
/// `periphery.conv5`, `fusion.dense`; checkpoints key tensors by these names.
struct Layer {
  std::string name;
  LayerSpec spec;
};

/// Ordered map from layer name to parameters. Iteration order is layer order.
template <typename T>
class ModelParams {
 public:
  using Entry = std::pair<std::string, LayerParams<T>>;

  void insert(std::string name, LayerParams<T> params);
  bool contains(const std::string& name) const;
  const LayerParams<T>& at(const std::string& name) const;
  LayerParams<T>& at(const std::string& name);

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  std::size_t size() const { return entries_.size(); }

  /// Same keys and shapes, all zeros.
  ModelParams zeros_like() const;
  /// this += factor * other. Keys and shapes must match.
  void add_scaled(const ModelParams& other, T factor);

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    for (const auto& [name, p] : entries_)
      out.insert(name, LayerParams<U>{p.weights.template cast<U>(), p.bias.template cast<U>()});
    return out;
  }

  friend bool operator==(const ModelParams& a, const ModelParams& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    for (std::size_t i = 0; i < a.entries_.size(); ++i) {
      const auto& [na, pa] = a.entries_[i];
      const auto& [nb, pb] = b.entries_[i];
      if (na != nb || !(pa.weights == pb.weights) || !(pa.bias == pb.bias)) return false;
    }
    return true;
  }

 private:
  std::vector<Entry> entries_;
};

struct Sequential {
  Shape input_shape;
  std::vector<Layer> layers;

  /// Output shape after each layer, computed from the specs alone.
  std::vector<Shape> infer_shapes() const;
  Shape output_shape() const;
};

template <typename T>
using LayerCache = std::variant<std::monostate, ConvCache<T>, DenseCache<T>, ReluCache<T>, PoolCache<T>, FlattenCache>;

template <typename T>
struct Trace {
  std::vector<LayerCache<T>> caches;
};

/// Running hash of every ReLU sign pattern and pooling argmax seen in a
/// forward pass. Two passes with equal fingerprints follow the same
/// piecewise-linear region.
struct ActivationPattern {
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  void mix(std::uint64_t v) {
    hash ^= v + 0x9E3779B97F4A7C15ULL + (hash << 6) + (hash >> 2);
  }
};

template <typename T>
BasicTensor<T> run_forward(const Sequential& net, const ModelParams<T>& params, const BasicTensor<T>& x,
                           Trace<T>* trace = nullptr, ActivationPattern* pattern = nullptr);

/// Consumes the trace. Parameter gradients are added into `grads` when it is
/// not null. Returns the input gradient when `need_input_grad`, otherwise a
/// default tensor.
template <typename T>
BasicTensor<T> run_backward(const Sequential& net, const ModelParams<T>& params, Trace<T>&& trace,
                            BasicTensor<T> dy, ModelParams<T>* grads, bool need_input_grad);

// ---------------------------------------------------------------------------
// Configurations.

inline constexpr std::size_t kPoolMarker = 0;

struct FoveaConfig {
  std::size_t channels = 3;
  std::size_t side = 224;
  /// Output channels per conv layer; kPoolMarker entries are 2x2 max-pools.
  std::vector<std::size_t> conv_plan;
  std::size_t kernel = 3;
  std::size_t fc1 = 4096;
  std::size_t fc2 = 1024;
  std::size_t num_classes = 80;

  std::size_t pool_count() const;
  /// VGG-16 trunk on 3x224x224 with fc 4096/1024 and 80 classes.
  static FoveaConfig full_scale();
  /// 3x64x64, plan [16,16,P,32,32,P,64,64,P], fc 256/64, 8 classes.
  static FoveaConfig desk();
  void validate() const;
};

struct PeripheryLayerConfig {
  std::size_t out_channels = 0;
  std::size_t kernel = 5;
  std::size_t stride = 2;
};

struct PeripheryConfig {
  std::size_t channels = 3;
  std::size_t side = 448;
  std::vector<PeripheryLayerConfig> layers;

  /// Eight layers: k=5 for layers 1-5 and k=3 after; stride 2 for layers
  /// 1-6 and stride 1 after.
  static PeripheryConfig with_channels(std::size_t side, const std::vector<std::size_t>& plan);
  /// 448 input, channels [32,128,128,256,256,256,256,256].
  static PeripheryConfig full_scale();
  /// 128 input, channels [8,16,16,32,32,32,32,32].
  static PeripheryConfig desk();
  void validate() const;
};

struct GistNetConfig {
  FoveaConfig fovea;
  PeripheryConfig periphery;

  static GistNetConfig full_scale();
  static GistNetConfig desk();
  /// Multiplies channel widths, fc sizes and input sides by `factor`.
  /// Sides are rounded to the nearest positive multiple of the stream's
  /// downsampling factor; widths round to nearest, minimum 1. Kernel sizes,
  /// strides, layer counts and class count are unchanged.
  GistNetConfig scaled(double factor) const;
  void validate() const;
};

enum class ModelKind { kFovea, kGistNet };

/// Network structure without parameters.
struct Model {
  ModelKind kind = ModelKind::kFovea;
  std::size_t num_classes = 0;
  /// Fovea trunk through fc2 + ReLU.
  Sequential fovea;
  /// Periphery trunk through flatten; empty for fovea-only models.
  Sequential periphery;
  /// `fovea.classifier` or `fusion.dense`.
  Layer head;

  std::vector<Layer> parameterized_layers() const;
  Shape fovea_input_shape() const { return fovea.input_shape; }
  Shape context_input_shape() const { return periphery.input_shape; }
};

Sequential describe_periphery(const PeripheryConfig& cfg);
Model describe_fovea(const FoveaConfig& cfg);
Model describe_gistnet(const GistNetConfig& cfg);

/// Deterministic initialization; each layer draws from stream
/// `stream_id_for(layer name)` under `seed`, so a layer's initial values do
/// not depend on which model contains it.
template <typename T>
ModelParams<T> init_model_params(const std::vector<Layer>& layers, std::uint64_t seed);

template <typename T>
std::pair<Model, ModelParams<T>> build_fovea(const FoveaConfig& cfg, std::uint64_t seed);
template <typename T>
std::pair<Sequential, ModelParams<T>> build_periphery(const PeripheryConfig& cfg, std::uint64_t seed);
template <typename T>
std::pair<Model, ModelParams<T>> build_gistnet(const GistNetConfig& cfg, std::uint64_t seed);

struct ParamRow {
  std::string name;
  std::string layer;
  std::size_t weights = 0;
  std::size_t bias = 0;
  std::size_t total() const { return weights + bias; }
};

struct ParamTable {
  std::vector<ParamRow> rows;
  std::size_t total = 0;
};

ParamTable count_params(const Model& model);
template <typename T>
ParamTable count_params(const ModelParams<T>& params);

// ---------------------------------------------------------------------------
// Forward / backward over whole models.

template <typename T>
struct ModelInput {
  BasicTensor<T> fovea;
  std::optional<BasicTensor<T>> context;
};

template <typename T>
struct ForwardResult {
  BasicTensor<T> logits;
  /// fc2 activation (post-ReLU).
  BasicTensor<T> fovea_embedding;
  /// Periphery flatten output; present for GistNet.
  std::optional<BasicTensor<T>> periphery_embedding;
};

template <typename T>
struct ModelTrace {
  Trace<T> fovea;
  Trace<T> periphery;
  DenseCache<T> head;
  ConcatCache concat;
};

template <typename T>
struct InputGradients {
  BasicTensor<T> fovea;
  std::optional<BasicTensor<T>> context;
};

template <typename T>
ForwardResult<T> forward(const Model& model, const ModelParams<T>& params, const ModelInput<T>& input,
                         ModelTrace<T>* trace = nullptr, ActivationPattern* pattern = nullptr);

/// Backpropagates `dlogits` through a traced forward pass.
template <typename T>
InputGradients<T> backward(const Model& model, const ModelParams<T>& params, ModelTrace<T>&& trace,
                           const BasicTensor<T>& dlogits, ModelParams<T>* grads, bool need_input_grads);

/// Returns (logits, fc2 embedding) of a fovea-only model.
template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> forward_fovea(const Model& model, const ModelParams<T>& params,
                                                        const BasicTensor<T>& image);
/// Returns (logits, periphery embedding) of a GistNet model.
template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> forward_gistnet(const Model& model, const ModelParams<T>& params,
                                                          const BasicTensor<T>& fovea_image,
                                                          const BasicTensor<T>& context_image);

template <typename T>
struct LossResult {
  T loss{};
  BasicTensor<T> logits;
};

/// Softmax cross-entropy loss of one sample; gradients are added into
/// `grads` when it is not null.
template <typename T>
LossResult<T> loss_and_gradients(const Model& model, const ModelParams<T>& params, const ModelInput<T>& input,
                                 std::size_t label, ModelParams<T>* grads, ActivationPattern* pattern = nullptr);

}  // namespace gist
