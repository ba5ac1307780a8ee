#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "gistnet/config.hpp"
#include "gistnet/gradcheck.hpp"

namespace gist {

struct DataBundle {
  std::vector<SceneSample> train;
  std::vector<SceneSample> test;
  std::vector<std::string> category_names;
};

/// Reads the configured manifests, or generates the synthetic splits in
/// memory when no manifest is set. Throws ValidationError when the class
/// count differs from model.num_classes.
DataBundle load_data(const RunConfig& config, bool need_train, bool need_test);

struct GenDataResult {
  std::filesystem::path train_manifest;
  std::filesystem::path test_manifest;
  std::filesystem::path report;
  std::size_t train_count = 0;
  std::size_t test_count = 0;
};

/// Writes `<output>/data/{train,test}_NNNNNN.ppm`, `train.json`, `test.json`
/// and `gen_report.json`.
GenDataResult cmd_gen_data(const RunConfig& config);

struct TrainOutcome {
  std::filesystem::path checkpoint;
  std::filesystem::path log;
  TrainResult result;
};

/// Trains the configured model and writes `<output>/<kind>.gstn` plus
/// `<kind>_train_log.csv`; intermediate checkpoints are
/// `<kind>_iter_NNNNNN.gstn`. Progress lines go to `progress` when set.
TrainOutcome cmd_train(const RunConfig& config, std::ostream* progress = nullptr);

/// The config with model.kind replaced.
RunConfig with_kind(const RunConfig& config, const std::string& kind);

/// Loads a checkpoint for `config`'s model, checking its digest.
ModelParams<float> load_params(const RunConfig& config, const std::filesystem::path& path, bool force);

struct EvalOutcome {
  EvalReport report;
  std::filesystem::path json;
  std::filesystem::path csv;
};

/// Evaluates `checkpoint` on the test split. With a baseline (a fovea-only
/// checkpoint) the report also carries per-category deltas and the count of
/// improved categories.
EvalOutcome cmd_eval(const RunConfig& config, const std::filesystem::path& checkpoint,
                     const std::optional<std::filesystem::path>& baseline, bool force);

struct ExperimentsOutcome {
  std::filesystem::path dir;
  CurveSeries ratio;
  BlurSweep blur;
  ProbeResult probe_fovea;
  ProbeResult probe_periphery;
  TsneResult tsne_periphery;
  double tsne_periphery_centroid = 0.0;
  double gistnet_accuracy = 0.0;
  double fovea_accuracy = 0.0;
};

/// Ratio curve, blur sweep, embedding probes, t-SNE and saliency maps for a
/// GistNet checkpoint against a fovea-only checkpoint. Writes everything
/// under `<output>/experiments`.
ExperimentsOutcome cmd_experiments(const RunConfig& config, const std::filesystem::path& gistnet_checkpoint,
                                   const std::filesystem::path& fovea_checkpoint, bool force,
                                   std::ostream* progress = nullptr);

struct GradcheckOutcome {
  std::vector<GradCheckCase> cases;
  bool passed = true;
  std::filesystem::path report;
};

/// Per-layer checks plus the full fused model of `config` in float64;
/// writes `<output>/gradcheck.json`.
GradcheckOutcome cmd_gradcheck(const RunConfig& config, const GradCheckOptions& options);

}  // namespace gist
