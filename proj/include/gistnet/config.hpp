#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gistnet/checkpoint.hpp"
#include "gistnet/data.hpp"
#include "gistnet/eval.hpp"
#include "gistnet/model.hpp"
#include "gistnet/train.hpp"

namespace gist {

struct ModelSection {
  /// "gistnet" or "fovea".
  std::string kind = "gistnet";
  /// "desk" or "full".
  std::string base = "desk";
  double scale = 1.0;
  std::size_t num_classes = 8;
};

struct TrainSection {
  TrainConfig config;
  /// Required; there is no default seed.
  std::optional<std::uint64_t> seed;
  /// Only "float32" trains; "float64" is reserved for gradient checks.
  std::string dtype = "float32";
  /// Writes an intermediate checkpoint every this many iterations (0 = never).
  std::size_t checkpoint_every = 0;
};

struct DataSection {
  /// Manifests on disk; when empty the synthetic generator is used in memory.
  std::string train_manifest;
  std::string test_manifest;
  SyntheticConfig synthetic;
};

struct EvalSection {
  std::vector<std::size_t> ks{1, 3, 5};
  std::size_t blur_levels = 40;
  double blur_step = 0.25;
  std::size_t ratio_bins = 8;
  /// Evaluate on at most this many test samples (0 = all).
  std::size_t limit = 0;
  std::size_t embedding_samples = 1000;
  double perplexity = 30.0;
  std::size_t tsne_iterations = 1000;
  ProbeOptions probe;
  std::vector<std::size_t> saliency_samples{0, 1, 2, 3};
};

struct RunConfig {
  ModelSection model;
  TrainSection train;
  DataSection data;
  EvalSection eval;
  std::string output_dir = "out";

  /// Architecture after base selection and scaling.
  GistNetConfig network() const;
  Model describe_model() const;
  /// Digest of the resolved architecture; stored in checkpoints.
  ConfigDigest model_digest() const;
  /// TrainConfig with the seed filled in.
  TrainConfig train_config() const;
  /// Throws ConfigError on invalid values or a missing seed, and IoError when
  /// a referenced manifest does not exist.
  void validate() const;
};

/// Desk defaults, or the full-scale architecture with the step size 1e-6
/// when `preset` is "paper".
RunConfig preset_config(const std::string& preset);

std::string serialize_run_config(const RunConfig& config);

/// Layers, lowest precedence first: the preset, the JSON file (if any), then
/// `key=value` overrides with dotted keys such as `train.seed=7`. Values are
/// parsed as JSON and fall back to plain strings. Unknown keys are errors.
RunConfig resolve_run_config(const std::string& preset, const std::optional<std::filesystem::path>& file,
                             const std::vector<std::string>& overrides);

/// Same, from JSON text instead of a file.
RunConfig parse_run_config(const std::string& text, const std::string& source = "<memory>",
                           const std::string& preset = "desk");

}  // namespace gist
