#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gistnet/data.hpp"
#include "gistnet/model.hpp"
#include "gistnet/tensor.hpp"
#include "gistnet/train.hpp"

namespace gist {

// ---------------------------------------------------------------------------
// Accuracy and confidence intervals

/// Whether `label` is among the k largest logits (ties by ascending index).
bool topk_hit(const Tensor& logits, std::size_t label, std::size_t k);

/// Fraction of rows whose label is in their top k. Throws ArgumentError on a
/// length mismatch, an empty input or k larger than the class count.
double topk_accuracy(const std::vector<Tensor>& logits, const std::vector<std::size_t>& labels, std::size_t k);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Wilson score interval for `successes` out of `n` (n >= 1).
Interval wilson_interval(std::size_t successes, std::size_t n, double z = 1.96);

struct CategoryRow {
  std::size_t category = 0;
  std::string name;
  std::size_t n = 0;
  double accuracy = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct CategoryTable {
  std::vector<CategoryRow> rows;
  /// Categories with no samples; they have no row.
  std::vector<std::size_t> empty;
};

/// Per-category top-k accuracy with Wilson intervals at level z.
CategoryTable per_category_ci(const std::vector<Tensor>& logits, const std::vector<std::size_t>& labels,
                              std::size_t num_classes, std::size_t k, double z = 1.96,
                              const std::vector<std::string>& names = {});

struct EvalReport {
  std::size_t n = 0;
  std::size_t num_classes = 0;
  /// Accuracy keyed by k.
  std::map<std::size_t, double> topk;
  /// Top-1 rows.
  std::vector<CategoryRow> per_category;
  std::vector<std::size_t> empty_categories;
  /// Set when compared against a baseline: categories whose top-1 accuracy
  /// rose, and the per-category deltas (this minus baseline).
  std::optional<std::size_t> improved_category_count;
  std::vector<double> category_delta;
};

EvalReport make_report(const std::vector<Tensor>& logits, const std::vector<std::size_t>& labels,
                       std::size_t num_classes, const std::vector<std::size_t>& ks,
                       const std::vector<std::string>& names = {}, double z = 1.96);

/// Fills improved_category_count and category_delta of `report`.
void compare_reports(EvalReport& report, const EvalReport& baseline);

std::string report_json(const EvalReport& report);
/// Columns: category,name,n,accuracy,ci_low,ci_high[,delta].
std::string report_csv(const EvalReport& report);

// ---------------------------------------------------------------------------
// Curves

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
  std::size_t n = 0;
  /// Bin edges for binned curves; equal to x otherwise.
  double x_low = 0.0;
  double x_high = 0.0;
};

struct CurveSeries {
  std::string name;
  std::string x_label;
  std::string y_label;
  std::vector<CurvePoint> points;
};

/// Columns: x,y,n.
std::string curve_csv(const CurveSeries& curve);

/// Bins samples by log10(r) into `num_bins` equal-width bins spanning the
/// observed range; y is the accuracy with context minus the accuracy without
/// it. Runs of bins holding fewer than `min_count` samples are merged into
/// their neighbours. Non-positive ratios are clamped to 1e-6.
CurveSeries ratio_curve(const std::vector<double>& ratios, const std::vector<bool>& hit_context,
                        const std::vector<bool>& hit_minimal, std::size_t num_bins, std::size_t min_count = 10);

// ---------------------------------------------------------------------------
// Model-driven analyses

struct BlurSweep {
  /// GistNet accuracy per sigma.
  CurveSeries gistnet;
  /// Fovea-only accuracy repeated at every sigma.
  CurveSeries baseline;
};

/// Top-k accuracy of a GistNet model with every context input blurred at
/// each level of `schedule`. The fovea stream is evaluated once per sample.
BlurSweep blur_sweep(const Model& model, const ModelParams<float>& params, const std::vector<SceneSample>& data,
                     const BlurSchedule& schedule, double baseline_accuracy, std::size_t k = 1,
                     const InputSpec& spec = {});

/// Channel max of |grad|, min-max normalized to [0,1]; a constant map gives
/// zeros. Input [C,H,W], output [H,W].
Tensor saliency_from_gradient(const Tensor& grad);

struct SaliencyMaps {
  Tensor fovea;
  std::optional<Tensor> context;
};

/// Saliency of the `target` logit with respect to each input stream.
SaliencyMaps saliency_map(const Model& model, const ModelParams<float>& params, const ModelInput<float>& input,
                          std::size_t target);

// ---------------------------------------------------------------------------
// Embedding analyses

enum class EmbeddingSource { kFovea, kPeriphery };

struct EmbeddingSet {
  EmbeddingSource source = EmbeddingSource::kFovea;
  /// [n, d].
  Tensor64 features;
  std::vector<std::size_t> superclass;
  std::vector<std::size_t> category;
};

/// fc2 activations of a fovea-only model on the object crops.
EmbeddingSet fovea_embeddings(const Model& model, const ModelParams<float>& params,
                              const std::vector<SceneSample>& data, const InputSpec& spec = {});
/// Periphery flatten output of a GistNet model on the masked contexts.
EmbeddingSet periphery_embeddings(const Model& model, const ModelParams<float>& params,
                                  const std::vector<SceneSample>& data);

struct Affinities {
  /// Row-conditional probabilities p_{j|i}, [n, n], zero diagonal.
  Tensor64 conditional;
  /// 2^H(P_i) achieved by every row.
  std::vector<double> perplexity;
  /// Binary-search iterations used by every row.
  std::vector<std::size_t> iterations;
};

/// Per-row Gaussian bandwidth search so that 2^H(P_i) matches `perplexity`
/// within `tolerance` * perplexity (entropy in bits), giving up after
/// `max_iterations` halvings.
Affinities perplexity_affinities(const Tensor64& points, double perplexity, double tolerance = 1e-3,
                                 std::size_t max_iterations = 200);

struct TsneOptions {
  double perplexity = 30.0;
  std::size_t iterations = 1000;
  std::size_t exaggeration_iterations = 250;
  double exaggeration = 12.0;
  double learning_rate = 200.0;
  double momentum_initial = 0.5;
  double momentum_final = 0.8;
  std::uint64_t seed = 0;
  /// Allowed KL rise per step after the exaggeration phase.
  double kl_tolerance = 1e-6;
};

struct TsneResult {
  /// [n, 2].
  Tensor64 coords;
  std::vector<double> row_perplexity;
  /// KL(P||Q) after every iteration past the exaggeration phase.
  std::vector<double> kl;
  /// Steps where KL rose by more than the tolerance.
  std::size_t kl_increases = 0;
  /// More than 1% of tracked steps rose.
  bool flagged = false;
};

/// Exact t-SNE to two dimensions. Throws ArgumentError unless
/// 5 <= perplexity <= (n-1)/3 and n <= 5000.
TsneResult tsne_2d(const Tensor64& points, const TsneOptions& options);

/// Fraction of points whose nearest class centroid (in `coords`) is their
/// own class.
double nearest_centroid_accuracy(const Tensor64& coords, const std::vector<std::size_t>& labels);

struct ProbeOptions {
  double train_fraction = 0.7;
  std::size_t epochs = 500;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
};

struct ProbeResult {
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::size_t num_classes = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
};

/// Multinomial logistic regression on standardized features, trained full
/// batch with Adam on a seeded split. Throws ArgumentError with fewer than 2
/// classes or 20 rows.
ProbeResult linear_probe(const Tensor64& features, const std::vector<std::size_t>& labels,
                         const ProbeOptions& options);

// ---------------------------------------------------------------------------
// Plots

/// Line plot of one or more series sharing axes.
std::string svg_line_plot(const std::vector<CurveSeries>& series, const std::string& title);
/// Scatter of [n,2] coordinates; one circle per point, filled by label.
std::string svg_scatter(const Tensor64& coords, const std::vector<std::size_t>& labels, const std::string& title);
/// Grayscale heat map of an [H,W] tensor in [0,1].
std::string svg_heatmap(const Tensor& map, const std::string& title);

}  // namespace gist
