#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gistnet/model.hpp"
#include "gistnet/optim.hpp"

namespace gist {

/// Single-sample softmax cross-entropy of `model` as a grad_check closure.
/// The region fingerprint covers every ReLU mask and pooling argmax.
LossFn model_loss_fn(const Model& model, const ModelInput<double>& input, std::size_t label);

/// Wraps `fn` so the analytic gradient of `layer` comes back multiplied by
/// `factor`. Used as a negative control for the checker.
LossFn corrupt_layer_gradient(LossFn fn, std::string layer, double factor);

struct GradCheckCase {
  /// Layer type or model under test, e.g. "conv2d" or "gistnet".
  std::string name;
  GradCheckReport report;
};

/// Small float64 networks exercising each layer type: conv2d (both stride
/// patterns), dense, relu, maxpool2, flatten, concat2 and softmax
/// cross-entropy, each ending in a classifier so the loss is scalar.
std::vector<GradCheckCase> layer_gradchecks(const GradCheckOptions& options, std::uint64_t seed);

/// The full fused model under `cfg` on one random sample.
GradCheckCase gistnet_gradcheck(const GistNetConfig& cfg, const GradCheckOptions& options, std::uint64_t seed);

}  // namespace gist
