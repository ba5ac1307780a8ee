#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "gistnet/data.hpp"
#include "gistnet/model.hpp"
#include "gistnet/optim.hpp"

namespace gist {

/// Keeps freed blocks inside the process instead of returning them to the
/// OS; the per-layer buffers of a training step are otherwise re-faulted on
/// every allocation. Call once at startup.
void tune_allocator();

/// How scene samples become network inputs.
struct InputSpec {
  /// Fovea crop margin as a fraction of the larger bbox side.
  double crop_margin = 0.0;
};

/// Fovea crop for every model, plus the masked context for GistNet.
ModelInput<float> prepare_input(const Model& model, const SceneSample& sample, const InputSpec& spec);

struct TrainConfig {
  AdamConfig adam;
  std::size_t batch_size = 32;
  std::size_t epochs = 5;
  /// Stops after this many optimizer steps when non-zero.
  std::size_t max_iterations = 0;
  std::uint64_t seed = 1;
  InputSpec input;

  void validate() const;
};

struct TrainLogRow {
  std::size_t iteration = 0;
  std::size_t epoch = 0;
  double loss = 0.0;
  double batch_accuracy = 0.0;
};

struct TrainResult {
  ModelParams<float> params;
  std::vector<TrainLogRow> log;
  /// Mean loss over the final epoch's batches (0 when nothing ran).
  double final_loss = 0.0;
  std::size_t iterations = 0;
};

/// Called after every optimizer step with the step's log row and the
/// updated parameters.
using StepCallback = std::function<void(const TrainLogRow&, const ModelParams<float>&)>;

/// Minibatch Adam on the mean softmax cross-entropy. Gradients of a batch
/// are summed in sample order, so a run is a pure function of its inputs.
/// Throws NumericError naming the iteration when a loss is not finite.
TrainResult train_model(const Model& model, ModelParams<float> params, const std::vector<SceneSample>& data,
                        const TrainConfig& config, const StepCallback& on_step = {});

/// Logits of every sample, in order.
std::vector<Tensor> predict_logits(const Model& model, const ModelParams<float>& params,
                                   const std::vector<SceneSample>& data, const InputSpec& spec);

}  // namespace gist
