#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gistnet/model.hpp"

namespace gist {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  /// Throws ConfigError unless 0 <= beta < 1, epsilon > 0 and lr >= 0.
  void validate() const;
};

/// Moment estimates for every parameter tensor plus the step count.
template <typename T>
struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  ModelParams<T> m;
  ModelParams<T> v;

  /// Zero moments shaped like `params`, step 0.
  static AdamState init(const ModelParams<T>& params, const AdamConfig& config);
};

/// One bias-corrected Adam update. Returns the new parameters and state;
/// neither input is modified. Throws ShapeError when keys or shapes differ.
template <typename T>
std::pair<ModelParams<T>, AdamState<T>> adam_step(const AdamState<T>& state, const ModelParams<T>& params,
                                                   const ModelParams<T>& grads);

/// Same update applied in place, for training loops that own their buffers.
template <typename T>
void adam_update(AdamState<T>& state, ModelParams<T>& params, const ModelParams<T>& grads);

// ---------------------------------------------------------------------------
// Finite-difference gradient checking.

/// Loss of one evaluation plus a fingerprint of the piecewise-linear region
/// it landed in (0 for smooth functions).
struct LossEval {
  double loss = 0.0;
  std::uint64_t region = 0;
};

/// Evaluates the loss at `params`; when `grads` is not null it must also add
/// the analytic gradient into it (the checker passes zeroed buffers).
using LossFn = std::function<LossEval(const ModelParams<double>& params, ModelParams<double>* grads)>;

struct GradCheckOptions {
  double epsilon = 1e-5;
  double tolerance = 1e-4;
  /// Coordinates checked per tensor; 0 checks every coordinate.
  std::size_t samples_per_tensor = 0;
  std::uint64_t seed = 0;
  /// Redraws allowed per tensor when a perturbation crosses a ReLU or
  /// pooling boundary.
  std::size_t max_redraws = 64;
};

struct GradCheckRow {
  /// `<layer>.weights` or `<layer>.bias`.
  std::string tensor;
  std::size_t checked = 0;
  /// Coordinates skipped because the two perturbed points straddled a kink.
  std::size_t kinks = 0;
  double max_rel_err = 0.0;
  double max_abs_err = 0.0;
  /// Flat index where max_rel_err occurred.
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  double tolerance = 0.0;
  double max_rel_err = 0.0;
  std::vector<GradCheckRow> rows;
  bool passed = true;

  /// Name of the tensor with the largest relative error.
  std::string worst_tensor() const;
};

/// |a - n| / max(|a|, |n|, 1e-12).
double relative_error(double analytic, double numeric);

/// Compares analytic gradients with central differences
/// (L(θ+ε) - L(θ-ε)) / 2ε. Every parameter tensor appears once in the report.
/// Throws NumericError when any evaluated loss is not finite.
GradCheckReport grad_check(const LossFn& fn, const ModelParams<double>& params, const GradCheckOptions& options);

}  // namespace gist
