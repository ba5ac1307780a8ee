#include "gistnet/gradcheck.hpp"

#include <utility>

namespace gist {

LossFn model_loss_fn(const Model& model, const ModelInput<double>& input, std::size_t label) {
  return [model, input, label](const ModelParams<double>& params, ModelParams<double>* grads) {
    ActivationPattern pattern;
    auto r = loss_and_gradients(model, params, input, label, grads, &pattern);
    return LossEval{r.loss, pattern.hash};
  };
}

LossFn corrupt_layer_gradient(LossFn fn, std::string layer, double factor) {
  return [fn = std::move(fn), layer = std::move(layer), factor](const ModelParams<double>& params,
                                                                 ModelParams<double>* grads) {
    if (!grads) return fn(params, nullptr);
    // Compute this evaluation's gradient separately so only it is scaled.
    ModelParams<double> own = grads->zeros_like();
    LossEval e = fn(params, &own);
    auto& target = own.at(layer);
    for (double& w : target.weights.mutable_values()) w *= factor;
    for (double& b : target.bias.mutable_values()) b *= factor;
    grads->add_scaled(own, 1.0);
    return e;
  };
}

namespace {

Model trunk_model(const std::string& prefix, Shape input, std::vector<Layer> layers, std::size_t classes) {
  Model m;
  m.kind = ModelKind::kFovea;
  m.num_classes = classes;
  m.fovea = Sequential{std::move(input), std::move(layers)};
  const Shape out = m.fovea.output_shape();
  m.head = Layer{prefix + ".head", Dense{out.numel(), classes}};
  return m;
}

GradCheckCase run_case(const std::string& name, const Model& model, const ModelInput<double>& input,
                       std::size_t label, const GradCheckOptions& options, std::uint64_t seed) {
  auto params = init_model_params<double>(model.parameterized_layers(), seed);
  GradCheckOptions opts = options;
  opts.seed = seed;
  return {name, grad_check(model_loss_fn(model, input, label), params, opts)};
}

BasicTensor<double> random_input(SeededRng& rng, const Shape& shape) {
  return random_normal<double>(rng, shape, 0.0, 1.0);
}

}  // namespace

std::vector<GradCheckCase> layer_gradchecks(const GradCheckOptions& options, std::uint64_t seed) {
  std::vector<GradCheckCase> out;
  SeededRng rng(seed, stream_id_for("gradcheck.inputs"));

  {
    // 2x5x5 input, 3 filters, same padding, then flatten into a classifier.
    Model m = trunk_model("conv", Shape{2, 5, 5},
                          {{"conv.conv", Conv2D::same(2, 3, 3)}, {"conv.flatten", Flatten{}}}, 4);
    out.push_back(run_case("conv2d", m, {random_input(rng, Shape{2, 5, 5}), std::nullopt}, 1, options, seed));
  }
  {
    Model m = trunk_model("conv_s2", Shape{2, 6, 6},
                          {{"conv_s2.conv", Conv2D::same(2, 3, 5, 2)}, {"conv_s2.flatten", Flatten{}}}, 4);
    out.push_back(run_case("conv2d_stride2", m, {random_input(rng, Shape{2, 6, 6}), std::nullopt}, 2, options, seed));
  }
  {
    Model m = trunk_model("dense", Shape{8}, {{"dense.fc", Dense{8, 5}}}, 3);
    out.push_back(run_case("dense", m, {random_input(rng, Shape{8}), std::nullopt}, 0, options, seed));
  }
  {
    Model m = trunk_model("relu", Shape{8}, {{"relu.fc", Dense{8, 6}}, {"relu.relu", ReLU{}}}, 4);
    out.push_back(run_case("relu", m, {random_input(rng, Shape{8}), std::nullopt}, 3, options, seed));
  }
  {
    Model m = trunk_model("pool", Shape{2, 4, 4},
                          {{"pool.conv", Conv2D::same(2, 3, 3)},
                           {"pool.pool", MaxPool2{}},
                           {"pool.flatten", Flatten{}}},
                          4);
    out.push_back(run_case("maxpool2", m, {random_input(rng, Shape{2, 4, 4}), std::nullopt}, 1, options, seed));
  }
  {
    // Two streams joined by Concat2 ahead of the fused classifier.
    Model m;
    m.kind = ModelKind::kGistNet;
    m.num_classes = 3;
    m.fovea = Sequential{Shape{3, 4, 4},
                         {{"tiny.fovea.conv", Conv2D::same(3, 2, 3)},
                          {"tiny.fovea.relu", ReLU{}},
                          {"tiny.fovea.pool", MaxPool2{}},
                          {"tiny.fovea.flatten", Flatten{}},
                          {"tiny.fovea.fc", Dense{8, 4}},
                          {"tiny.fovea.relu_fc", ReLU{}}}};
    m.periphery = Sequential{Shape{3, 8, 8},
                             {{"tiny.periphery.conv", Conv2D::same(3, 2, 5, 2)},
                              {"tiny.periphery.relu", ReLU{}},
                              {"tiny.periphery.flatten", Flatten{}}}};
    m.head = Layer{"tiny.fusion", Dense{32 + 4, 3}};
    ModelInput<double> input{random_input(rng, Shape{3, 4, 4}), random_input(rng, Shape{3, 8, 8})};
    out.push_back(run_case("concat2_softmax_xent", m, input, 2, options, seed));
  }
  return out;
}

GradCheckCase gistnet_gradcheck(const GistNetConfig& cfg, const GradCheckOptions& options, std::uint64_t seed) {
  cfg.validate();
  Model m = describe_gistnet(cfg);
  SeededRng rng(seed, stream_id_for("gradcheck.gistnet"));
  ModelInput<double> input{random_normal<double>(rng, m.fovea_input_shape(), 0.5, 0.25),
                           random_normal<double>(rng, m.context_input_shape(), 0.5, 0.25)};
  const std::size_t label = static_cast<std::size_t>(rng.uniform_index(m.num_classes));
  return run_case("gistnet", m, input, label, options, seed);
}

}  // namespace gist
