#include "gistnet/model.hpp"

#include <algorithm>
#include <cmath>

namespace gist {

// ---------------------------------------------------------------------------
// ModelParams

template <typename T>
void ModelParams<T>::insert(std::string name, LayerParams<T> params) {
  if (contains(name)) throw ArgumentError("duplicate parameter entry " + name);
  entries_.emplace_back(std::move(name), std::move(params));
}

template <typename T>
bool ModelParams<T>::contains(const std::string& name) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const Entry& e) { return e.first == name; });
}

template <typename T>
const LayerParams<T>& ModelParams<T>::at(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.first == name) return e.second;
  throw ArgumentError("no parameters named " + name);
}

template <typename T>
LayerParams<T>& ModelParams<T>::at(const std::string& name) {
  for (auto& e : entries_)
    if (e.first == name) return e.second;
  throw ArgumentError("no parameters named " + name);
}

template <typename T>
ModelParams<T> ModelParams<T>::zeros_like() const {
  ModelParams out;
  for (const auto& [name, p] : entries_)
    out.insert(name, LayerParams<T>{BasicTensor<T>::zeros(p.weights.shape()), BasicTensor<T>::zeros(p.bias.shape())});
  return out;
}

template <typename T>
void ModelParams<T>::add_scaled(const ModelParams& other, T factor) {
  if (other.entries_.size() != entries_.size()) throw ShapeError("add_scaled: parameter sets differ");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    auto& [name, p] = entries_[i];
    const auto& [oname, op] = other.entries_[i];
    if (name != oname || !(p.weights.shape() == op.weights.shape()) || !(p.bias.shape() == op.bias.shape()))
      throw ShapeError("add_scaled: mismatch at " + name);
    T* w = p.weights.mutable_data();
    const T* ow = op.weights.data();
    for (std::size_t j = 0; j < p.weights.size(); ++j) w[j] += factor * ow[j];
    T* b = p.bias.mutable_data();
    const T* ob = op.bias.data();
    for (std::size_t j = 0; j < p.bias.size(); ++j) b[j] += factor * ob[j];
  }
}

// ---------------------------------------------------------------------------
// Sequential

std::vector<Shape> Sequential::infer_shapes() const {
  std::vector<Shape> shapes;
  Shape cur = input_shape;
  for (const auto& layer : layers) {
    if (const auto* c = std::get_if<Conv2D>(&layer.spec)) {
      if (cur.rank() != 3 || cur[0] != c->in_channels)
        throw ShapeError(layer.name + ": input " + cur.to_string() + " does not match " + describe(layer.spec));
      cur = Shape{c->out_channels, c->output_extent(cur[1]), c->output_extent(cur[2])};
    } else if (const auto* d = std::get_if<Dense>(&layer.spec)) {
      if (cur.rank() != 1 || cur[0] != d->in_features)
        throw ShapeError(layer.name + ": input " + cur.to_string() + " does not match " + describe(layer.spec));
      cur = Shape{d->out_features};
    } else if (std::holds_alternative<MaxPool2>(layer.spec)) {
      if (cur.rank() != 3 || cur[1] % 2 || cur[2] % 2)
        throw ShapeError(layer.name + ": cannot pool " + cur.to_string());
      cur = Shape{cur[0], cur[1] / 2, cur[2] / 2};
    } else if (std::holds_alternative<Flatten>(layer.spec)) {
      cur = Shape{cur.numel()};
    } else if (!std::holds_alternative<ReLU>(layer.spec)) {
      throw ArgumentError(layer.name + ": " + describe(layer.spec) + " cannot appear in a sequential trunk");
    }
    shapes.push_back(cur);
  }
  return shapes;
}

Shape Sequential::output_shape() const {
  auto shapes = infer_shapes();
  return shapes.empty() ? input_shape : shapes.back();
}

template <typename T>
BasicTensor<T> run_forward(const Sequential& net, const ModelParams<T>& params, const BasicTensor<T>& x,
                           Trace<T>* trace, ActivationPattern* pattern) {
  if (!(x.shape() == net.input_shape))
    throw ShapeError("input " + x.shape().to_string() + " does not match expected " + net.input_shape.to_string());
  if (trace) trace->caches.clear();
  BasicTensor<T> cur = x;
  for (const auto& layer : net.layers) {
    LayerCache<T> cache;
    if (const auto* c = std::get_if<Conv2D>(&layer.spec)) {
      auto [y, cc] = conv2d_forward(*c, params.at(layer.name), cur);
      cur = std::move(y);
      if (trace) cache = std::move(cc);
    } else if (const auto* d = std::get_if<Dense>(&layer.spec)) {
      auto [y, dc] = dense_forward(*d, params.at(layer.name), cur);
      cur = std::move(y);
      if (trace) cache = std::move(dc);
    } else if (std::holds_alternative<ReLU>(layer.spec)) {
      if (pattern) {
        std::uint64_t word = 0;
        std::size_t bit = 0;
        for (T v : cur.values()) {
          word = (word << 1) | (v > T{0} ? 1u : 0u);
          if (++bit == 64) {
            pattern->mix(word);
            word = 0;
            bit = 0;
          }
        }
        pattern->mix(word);
      }
      auto [y, rc] = relu_forward(cur);
      cur = std::move(y);
      if (trace) cache = std::move(rc);
    } else if (std::holds_alternative<MaxPool2>(layer.spec)) {
      auto [y, pc] = maxpool2_forward(cur);
      if (pattern)
        for (auto a : pc.argmax) pattern->mix(a);
      cur = std::move(y);
      if (trace) cache = std::move(pc);
    } else if (std::holds_alternative<Flatten>(layer.spec)) {
      auto [y, fc] = flatten_forward(cur);
      cur = std::move(y);
      if (trace) cache = std::move(fc);
    } else {
      throw ArgumentError(layer.name + ": unsupported layer in sequential trunk");
    }
    if (trace) trace->caches.push_back(std::move(cache));
  }
  return cur;
}

namespace {

template <typename T>
void accumulate(ModelParams<T>* grads, const std::string& name, const Gradients<T>& g) {
  if (!grads) return;
  auto& p = grads->at(name);
  T* w = p.weights.mutable_data();
  const T* dw = g.dweights.data();
  for (std::size_t i = 0; i < p.weights.size(); ++i) w[i] += dw[i];
  T* b = p.bias.mutable_data();
  const T* db = g.dbias.data();
  for (std::size_t i = 0; i < p.bias.size(); ++i) b[i] += db[i];
}

}  // namespace

template <typename T>
BasicTensor<T> run_backward(const Sequential& net, const ModelParams<T>& params, Trace<T>&& trace,
                            BasicTensor<T> dy, ModelParams<T>* grads, bool need_input_grad) {
  if (trace.caches.size() != net.layers.size()) throw ArgumentError("run_backward: trace does not match network");
  for (std::size_t idx = net.layers.size(); idx-- > 0;) {
    const auto& layer = net.layers[idx];
    auto& cache = trace.caches[idx];
    const bool need_dx = need_input_grad || idx > 0;
    if (const auto* c = std::get_if<Conv2D>(&layer.spec)) {
      auto g = conv2d_backward(*c, params.at(layer.name), std::get<ConvCache<T>>(std::move(cache)), dy, need_dx);
      accumulate(grads, layer.name, g);
      dy = std::move(g.dx);
    } else if (const auto* d = std::get_if<Dense>(&layer.spec)) {
      auto g = dense_backward(*d, params.at(layer.name), std::get<DenseCache<T>>(std::move(cache)), dy);
      accumulate(grads, layer.name, g);
      dy = std::move(g.dx);
    } else if (std::holds_alternative<ReLU>(layer.spec)) {
      dy = relu_backward(std::get<ReluCache<T>>(std::move(cache)), dy);
    } else if (std::holds_alternative<MaxPool2>(layer.spec)) {
      dy = maxpool2_backward(std::get<PoolCache<T>>(std::move(cache)), dy);
    } else if (std::holds_alternative<Flatten>(layer.spec)) {
      dy = flatten_backward(std::get<FlattenCache>(std::move(cache)), dy);
    }
    cache = std::monostate{};
  }
  trace.caches.clear();
  return need_input_grad ? dy : BasicTensor<T>{};
}

// ---------------------------------------------------------------------------
// Configurations

std::size_t FoveaConfig::pool_count() const {
  return static_cast<std::size_t>(std::count(conv_plan.begin(), conv_plan.end(), kPoolMarker));
}

FoveaConfig FoveaConfig::full_scale() {
  FoveaConfig cfg;
  cfg.channels = 3;
  cfg.side = 224;
  cfg.conv_plan = {64, 64, kPoolMarker, 128, 128, kPoolMarker, 256, 256, 256, kPoolMarker,
                   512, 512, 512, kPoolMarker, 512, 512, 512, kPoolMarker};
  cfg.kernel = 3;
  cfg.fc1 = 4096;
  cfg.fc2 = 1024;
  cfg.num_classes = 80;
  return cfg;
}

FoveaConfig FoveaConfig::desk() {
  FoveaConfig cfg;
  cfg.channels = 3;
  cfg.side = 64;
  cfg.conv_plan = {16, 16, kPoolMarker, 32, 32, kPoolMarker, 64, 64, kPoolMarker};
  cfg.kernel = 3;
  cfg.fc1 = 256;
  cfg.fc2 = 64;
  cfg.num_classes = 8;
  return cfg;
}

void FoveaConfig::validate() const {
  if (channels == 0 || side == 0) throw ConfigError("fovea: input extents must be positive");
  if (conv_plan.empty() || conv_plan.front() == kPoolMarker)
    throw ConfigError("fovea: conv plan must start with a conv layer");
  if (kernel % 2 == 0) throw ConfigError("fovea: kernel must be odd");
  if (fc1 == 0 || fc2 == 0 || num_classes < 2) throw ConfigError("fovea: fc sizes and class count must be positive");
  const std::size_t div = std::size_t{1} << pool_count();
  if (side % div != 0) {
    throw ConfigError("fovea: input side " + std::to_string(side) + " is not divisible by 2^" +
                      std::to_string(pool_count()));
  }
}

PeripheryConfig PeripheryConfig::with_channels(std::size_t side, const std::vector<std::size_t>& plan) {
  PeripheryConfig cfg;
  cfg.side = side;
  for (std::size_t i = 0; i < plan.size(); ++i)
    cfg.layers.push_back(PeripheryLayerConfig{plan[i], i < 5 ? std::size_t{5} : std::size_t{3},
                                              i < 6 ? std::size_t{2} : std::size_t{1}});
  return cfg;
}

PeripheryConfig PeripheryConfig::full_scale() {
  return with_channels(448, {32, 128, 128, 256, 256, 256, 256, 256});
}

PeripheryConfig PeripheryConfig::desk() { return with_channels(128, {8, 16, 16, 32, 32, 32, 32, 32}); }

void PeripheryConfig::validate() const {
  if (channels == 0) throw ConfigError("periphery: input channels must be positive");
  if (layers.size() != 8) throw ConfigError("periphery: expected 8 conv layers, got " + std::to_string(layers.size()));
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const std::size_t want_k = i < 5 ? 5 : 3;
    const std::size_t want_s = i < 6 ? 2 : 1;
    if (l.out_channels == 0) throw ConfigError("periphery: layer " + std::to_string(i + 1) + " has no channels");
    if (l.kernel != want_k || l.stride != want_s) {
      throw ConfigError("periphery: layer " + std::to_string(i + 1) + " must use k=" + std::to_string(want_k) +
                        ", s=" + std::to_string(want_s));
    }
  }
  if (side == 0 || side % 64 != 0)
    throw ConfigError("periphery: input side " + std::to_string(side) + " is not divisible by 64");
}

GistNetConfig GistNetConfig::full_scale() { return {FoveaConfig::full_scale(), PeripheryConfig::full_scale()}; }

GistNetConfig GistNetConfig::desk() { return {FoveaConfig::desk(), PeripheryConfig::desk()}; }

void GistNetConfig::validate() const {
  fovea.validate();
  periphery.validate();
}

GistNetConfig GistNetConfig::scaled(double factor) const {
  if (!(factor > 0.0)) throw ConfigError("scale factor must be positive");
  auto width = [&](std::size_t v) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(v) * factor)));
  };
  auto side_multiple = [&](std::size_t v, std::size_t div) {
    const double units = std::round(static_cast<double>(v) * factor / static_cast<double>(div));
    return std::max<std::size_t>(1, static_cast<std::size_t>(units)) * div;
  };
  GistNetConfig out = *this;
  for (auto& c : out.fovea.conv_plan)
    if (c != kPoolMarker) c = width(c);
  out.fovea.fc1 = width(fovea.fc1);
  out.fovea.fc2 = width(fovea.fc2);
  out.fovea.side = side_multiple(fovea.side, std::size_t{1} << fovea.pool_count());
  for (auto& l : out.periphery.layers) l.out_channels = width(l.out_channels);
  out.periphery.side = side_multiple(periphery.side, 64);
  return out;
}

// ---------------------------------------------------------------------------
// Structure

namespace {

Sequential fovea_trunk(const FoveaConfig& cfg) {
  cfg.validate();
  Sequential net;
  net.input_shape = Shape{cfg.channels, cfg.side, cfg.side};
  std::size_t in_ch = cfg.channels;
  std::size_t block = 1, index = 1;
  for (std::size_t entry : cfg.conv_plan) {
    if (entry == kPoolMarker) {
      net.layers.push_back({"fovea.pool" + std::to_string(block), MaxPool2{}});
      ++block;
      index = 1;
      continue;
    }
    const std::string suffix = std::to_string(block) + "_" + std::to_string(index);
    net.layers.push_back({"fovea.conv" + suffix, Conv2D::same(in_ch, entry, cfg.kernel, 1)});
    net.layers.push_back({"fovea.relu" + suffix, ReLU{}});
    in_ch = entry;
    ++index;
  }
  net.layers.push_back({"fovea.flatten", Flatten{}});
  const std::size_t grid = cfg.side >> cfg.pool_count();
  const std::size_t flat = in_ch * grid * grid;
  net.layers.push_back({"fovea.fc1", Dense{flat, cfg.fc1}});
  net.layers.push_back({"fovea.relu_fc1", ReLU{}});
  net.layers.push_back({"fovea.fc2", Dense{cfg.fc1, cfg.fc2}});
  net.layers.push_back({"fovea.relu_fc2", ReLU{}});
  return net;
}

}  // namespace

Sequential describe_periphery(const PeripheryConfig& cfg) {
  cfg.validate();
  Sequential net;
  net.input_shape = Shape{cfg.channels, cfg.side, cfg.side};
  std::size_t in_ch = cfg.channels;
  for (std::size_t i = 0; i < cfg.layers.size(); ++i) {
    const auto& l = cfg.layers[i];
    const std::string n = std::to_string(i + 1);
    net.layers.push_back({"periphery.conv" + n, Conv2D::same(in_ch, l.out_channels, l.kernel, l.stride)});
    net.layers.push_back({"periphery.relu" + n, ReLU{}});
    in_ch = l.out_channels;
  }
  net.layers.push_back({"periphery.flatten", Flatten{}});
  return net;
}

Model describe_fovea(const FoveaConfig& cfg) {
  Model m;
  m.kind = ModelKind::kFovea;
  m.num_classes = cfg.num_classes;
  m.fovea = fovea_trunk(cfg);
  m.head = {"fovea.classifier", Dense{cfg.fc2, cfg.num_classes}};
  return m;
}

Model describe_gistnet(const GistNetConfig& cfg) {
  cfg.validate();
  Model m;
  m.kind = ModelKind::kGistNet;
  m.num_classes = cfg.fovea.num_classes;
  m.fovea = fovea_trunk(cfg.fovea);
  m.periphery = describe_periphery(cfg.periphery);
  const std::size_t fused = m.periphery.output_shape().numel() + cfg.fovea.fc2;
  m.head = {"fusion.dense", Dense{fused, cfg.fovea.num_classes}};
  return m;
}

std::vector<Layer> Model::parameterized_layers() const {
  std::vector<Layer> out;
  for (const auto& l : fovea.layers)
    if (has_params(l.spec)) out.push_back(l);
  for (const auto& l : periphery.layers)
    if (has_params(l.spec)) out.push_back(l);
  out.push_back(head);
  return out;
}

template <typename T>
ModelParams<T> init_model_params(const std::vector<Layer>& layers, std::uint64_t seed) {
  ModelParams<T> params;
  for (const auto& l : layers) {
    if (!has_params(l.spec)) continue;
    SeededRng rng(seed, stream_id_for(l.name.c_str()));
    params.insert(l.name, init_params<T>(l.spec, rng));
  }
  return params;
}

template <typename T>
std::pair<Model, ModelParams<T>> build_fovea(const FoveaConfig& cfg, std::uint64_t seed) {
  Model m = describe_fovea(cfg);
  auto params = init_model_params<T>(m.parameterized_layers(), seed);
  return {std::move(m), std::move(params)};
}

template <typename T>
std::pair<Sequential, ModelParams<T>> build_periphery(const PeripheryConfig& cfg, std::uint64_t seed) {
  Sequential net = describe_periphery(cfg);
  auto params = init_model_params<T>(net.layers, seed);
  return {std::move(net), std::move(params)};
}

template <typename T>
std::pair<Model, ModelParams<T>> build_gistnet(const GistNetConfig& cfg, std::uint64_t seed) {
  Model m = describe_gistnet(cfg);
  auto params = init_model_params<T>(m.parameterized_layers(), seed);
  return {std::move(m), std::move(params)};
}

ParamTable count_params(const Model& model) {
  ParamTable table;
  for (const auto& l : model.parameterized_layers()) {
    auto [w, b] = param_shapes(l.spec);
    table.rows.push_back({l.name, describe(l.spec), w.numel(), b.numel()});
    table.total += w.numel() + b.numel();
  }
  return table;
}

template <typename T>
ParamTable count_params(const ModelParams<T>& params) {
  ParamTable table;
  for (const auto& [name, p] : params.entries()) {
    table.rows.push_back({name, p.weights.shape().to_string(), p.weights.size(), p.bias.size()});
    table.total += p.count();
  }
  return table;
}

// ---------------------------------------------------------------------------
// Whole-model passes

template <typename T>
ForwardResult<T> forward(const Model& model, const ModelParams<T>& params, const ModelInput<T>& input,
                         ModelTrace<T>* trace, ActivationPattern* pattern) {
  ForwardResult<T> out;
  out.fovea_embedding = run_forward(model.fovea, params, input.fovea, trace ? &trace->fovea : nullptr, pattern);
  const auto* head = std::get_if<Dense>(&model.head.spec);
  if (model.kind == ModelKind::kFovea) {
    auto [logits, cache] = dense_forward(*head, params.at(model.head.name), out.fovea_embedding);
    out.logits = std::move(logits);
    if (trace) trace->head = std::move(cache);
    return out;
  }
  if (!input.context) throw ShapeError("GistNet forward requires a context input");
  out.periphery_embedding =
      run_forward(model.periphery, params, *input.context, trace ? &trace->periphery : nullptr, pattern);
  // Periphery flatten first, then fovea fc2.
  auto [fused, concat_cache] = concat2_forward(*out.periphery_embedding, out.fovea_embedding);
  auto [logits, cache] = dense_forward(*head, params.at(model.head.name), fused);
  out.logits = std::move(logits);
  if (trace) {
    trace->head = std::move(cache);
    trace->concat = concat_cache;
  }
  return out;
}

template <typename T>
InputGradients<T> backward(const Model& model, const ModelParams<T>& params, ModelTrace<T>&& trace,
                           const BasicTensor<T>& dlogits, ModelParams<T>* grads, bool need_input_grads) {
  const auto* head = std::get_if<Dense>(&model.head.spec);
  auto g = dense_backward(*head, params.at(model.head.name), std::move(trace.head), dlogits);
  accumulate(grads, model.head.name, g);
  InputGradients<T> out;
  if (model.kind == ModelKind::kFovea) {
    out.fovea = run_backward(model.fovea, params, std::move(trace.fovea), std::move(g.dx), grads, need_input_grads);
    return out;
  }
  auto [dperiphery, dfovea] = concat2_backward(std::move(trace.concat), g.dx);
  out.fovea = run_backward(model.fovea, params, std::move(trace.fovea), std::move(dfovea), grads, need_input_grads);
  out.context =
      run_backward(model.periphery, params, std::move(trace.periphery), std::move(dperiphery), grads, need_input_grads);
  return out;
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> forward_fovea(const Model& model, const ModelParams<T>& params,
                                                        const BasicTensor<T>& image) {
  if (model.kind != ModelKind::kFovea) throw ArgumentError("forward_fovea needs a fovea-only model");
  auto r = forward(model, params, ModelInput<T>{image, std::nullopt});
  return {std::move(r.logits), std::move(r.fovea_embedding)};
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> forward_gistnet(const Model& model, const ModelParams<T>& params,
                                                          const BasicTensor<T>& fovea_image,
                                                          const BasicTensor<T>& context_image) {
  if (model.kind != ModelKind::kGistNet) throw ArgumentError("forward_gistnet needs a GistNet model");
  auto r = forward(model, params, ModelInput<T>{fovea_image, context_image});
  return {std::move(r.logits), std::move(*r.periphery_embedding)};
}

template <typename T>
LossResult<T> loss_and_gradients(const Model& model, const ModelParams<T>& params, const ModelInput<T>& input,
                                 std::size_t label, ModelParams<T>* grads, ActivationPattern* pattern) {
  ModelTrace<T> trace;
  auto r = forward(model, params, input, grads ? &trace : nullptr, pattern);
  auto [loss, cache] = softmax_xent_forward(r.logits, label);
  if (grads) {
    auto dlogits = softmax_xent_backward(std::move(cache));
    backward(model, params, std::move(trace), dlogits, grads, false);
  }
  return {loss, std::move(r.logits)};
}

#define GIST_INSTANTIATE(T)                                                                                    \
  template class ModelParams<T>;                                                                               \
  template BasicTensor<T> run_forward<T>(const Sequential&, const ModelParams<T>&, const BasicTensor<T>&,       \
                                         Trace<T>*, ActivationPattern*);                                       \
  template BasicTensor<T> run_backward<T>(const Sequential&, const ModelParams<T>&, Trace<T>&&, BasicTensor<T>, \
                                          ModelParams<T>*, bool);                                              \
  template ModelParams<T> init_model_params<T>(const std::vector<Layer>&, std::uint64_t);                      \
  template std::pair<Model, ModelParams<T>> build_fovea<T>(const FoveaConfig&, std::uint64_t);                 \
  template std::pair<Sequential, ModelParams<T>> build_periphery<T>(const PeripheryConfig&, std::uint64_t);    \
  template std::pair<Model, ModelParams<T>> build_gistnet<T>(const GistNetConfig&, std::uint64_t);             \
  template ParamTable count_params<T>(const ModelParams<T>&);                                                  \
  template ForwardResult<T> forward<T>(const Model&, const ModelParams<T>&, const ModelInput<T>&,              \
                                       ModelTrace<T>*, ActivationPattern*);                                    \
  template InputGradients<T> backward<T>(const Model&, const ModelParams<T>&, ModelTrace<T>&&,                 \
                                         const BasicTensor<T>&, ModelParams<T>*, bool);                        \
  template std::pair<BasicTensor<T>, BasicTensor<T>> forward_fovea<T>(const Model&, const ModelParams<T>&,     \
                                                                      const BasicTensor<T>&);                  \
  template std::pair<BasicTensor<T>, BasicTensor<T>> forward_gistnet<T>(                                       \
      const Model&, const ModelParams<T>&, const BasicTensor<T>&, const BasicTensor<T>&);                      \
  template LossResult<T> loss_and_gradients<T>(const Model&, const ModelParams<T>&, const ModelInput<T>&,      \
                                               std::size_t, ModelParams<T>*, ActivationPattern*);

GIST_INSTANTIATE(float)
GIST_INSTANTIATE(double)

#undef GIST_INSTANTIATE

}  // namespace gist
