#include "gistnet/train.hpp"

#include <malloc.h>

#include <cmath>

namespace gist {

void tune_allocator() {
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
}

ModelInput<float> prepare_input(const Model& model, const SceneSample& sample, const InputSpec& spec) {
  const Shape fovea = model.fovea_input_shape();
  ModelInput<float> in{crop_minimal_context(sample, fovea[1], spec.crop_margin), std::nullopt};
  if (model.kind == ModelKind::kGistNet) in.context = make_context_input(sample, model.context_input_shape()[1]);
  return in;
}

void TrainConfig::validate() const {
  adam.validate();
  if (batch_size == 0) throw ConfigError("train: batch_size must be at least 1");
  if (input.crop_margin < 0.0) throw ConfigError("train: crop margin must be non-negative");
}

TrainResult train_model(const Model& model, ModelParams<float> params, const std::vector<SceneSample>& data,
                        const TrainConfig& config, const StepCallback& on_step) {
  config.validate();
  TrainResult result;
  AdamState<float> state = AdamState<float>::init(params, config.adam);
  SeededRng order_rng(config.seed, stream_id_for("train.order"));
  ModelParams<float> grads = params.zeros_like();

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.max_iterations && result.iterations >= config.max_iterations) break;
    double epoch_loss = 0.0;
    std::size_t epoch_batches = 0;
    for (const auto& batch : shuffled_batches(data.size(), config.batch_size, order_rng)) {
      if (config.max_iterations && result.iterations >= config.max_iterations) break;
      for (auto& [name, g] : grads.entries()) {
        std::fill(g.weights.mutable_values().begin(), g.weights.mutable_values().end(), 0.0f);
        std::fill(g.bias.mutable_values().begin(), g.bias.mutable_values().end(), 0.0f);
      }
      double loss_sum = 0.0;
      std::size_t correct = 0;
      for (std::size_t idx : batch) {
        const SceneSample& s = data[idx];
        auto r = loss_and_gradients(model, params, prepare_input(model, s, config.input), s.category, &grads);
        if (!std::isfinite(r.loss))
          throw NumericError("non-finite loss at iteration " + std::to_string(result.iterations + 1) + " (epoch " +
                             std::to_string(epoch + 1) + ", sample " + std::to_string(idx) + ")");
        loss_sum += r.loss;
        if (topk_indices(r.logits, 1)[0] == s.category) ++correct;
      }
      const float inv = 1.0f / static_cast<float>(batch.size());
      for (auto& [name, g] : grads.entries()) {
        for (float& v : g.weights.mutable_values()) v *= inv;
        for (float& v : g.bias.mutable_values()) v *= inv;
      }
      adam_update(state, params, grads);
      ++result.iterations;
      TrainLogRow row{result.iterations, epoch + 1, loss_sum / static_cast<double>(batch.size()),
                      static_cast<double>(correct) / static_cast<double>(batch.size())};
      result.log.push_back(row);
      epoch_loss += row.loss;
      ++epoch_batches;
      if (on_step) on_step(row, params);
    }
    if (epoch_batches) result.final_loss = epoch_loss / static_cast<double>(epoch_batches);
  }
  result.params = std::move(params);
  return result;
}

std::vector<Tensor> predict_logits(const Model& model, const ModelParams<float>& params,
                                   const std::vector<SceneSample>& data, const InputSpec& spec) {
  std::vector<Tensor> out;
  out.reserve(data.size());
  for (const auto& s : data) out.push_back(forward(model, params, prepare_input(model, s, spec)).logits);
  return out;
}

}  // namespace gist
