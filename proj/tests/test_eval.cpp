#include <algorithm>
#include <cmath>
#include <numeric>
#include <regex>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "gistnet/eval.hpp"
#include "json.hpp"

using namespace gist;

namespace {

Tensor row(std::vector<float> v) { return make_vector(std::move(v)); }

// Independent Wilson score interval.
std::pair<double, double> wilson_oracle(double successes, double n, double z) {
  const double p = successes / n, z2 = z * z;
  const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z / (1 + z2 / n) * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n));
  return {centre - half, centre + half};
}

// Two Gaussian clusters in d dimensions whose means differ by `offset` in
// every coordinate.
Tensor64 two_clusters(std::size_t n, std::size_t d, double offset, std::uint64_t seed, std::vector<std::size_t>& labels) {
  SeededRng rng(seed);
  Tensor64 x = Tensor64::zeros(Shape{n, d});
  labels.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = i % 2;
    for (std::size_t j = 0; j < d; ++j) x[i * d + j] = rng.normal() + (labels[i] ? offset : 0.0);
  }
  return x;
}

double entropy_bits(const Tensor64& p, std::size_t row_index, std::size_t n) {
  double h = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double v = p[row_index * n + j];
    if (v > 0) h -= v * std::log2(v);
  }
  return h;
}

// Fovea-kind model that is a single dense layer on the flattened input.
Model linear_model(const Shape& input, std::size_t classes) {
  Model m;
  m.kind = ModelKind::kFovea;
  m.num_classes = classes;
  m.fovea.input_shape = input;
  m.fovea.layers = {{"lin.flatten", Flatten{}}};
  m.head = {"lin.head", Dense{input.numel(), classes}};
  return m;
}

std::vector<SceneSample> synthetic_set(std::size_t n, double fidelity = 0.9) {
  SyntheticConfig cfg;
  cfg.fidelity = fidelity;
  std::vector<SceneSample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(synthetic_sample(cfg, "test", i));
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Top-k

TEST(TopkAccuracy, ArgmaxRowIsHit) {
  EXPECT_EQ(topk_accuracy({row({0.1f, 0.9f, 0.0f})}, {1}, 1), 1.0);
  EXPECT_EQ(topk_accuracy({row({0.1f, 0.9f, 0.0f})}, {0}, 1), 0.0);
}

TEST(TopkAccuracy, UniformLogitsTieBreak) {
  // With all-equal logits the top 3 are classes 0..2, so exactly the rows
  // labelled 0, 1 or 2 hit.
  std::vector<Tensor> logits(80, Tensor::zeros(Shape{80}));
  std::vector<std::size_t> labels(80);
  std::iota(labels.begin(), labels.end(), 0);
  EXPECT_DOUBLE_EQ(topk_accuracy(logits, labels, 3), 3.0 / 80.0);
  EXPECT_DOUBLE_EQ(topk_accuracy(logits, labels, 3), 0.0375);
  EXPECT_DOUBLE_EQ(topk_accuracy(logits, labels, 80), 1.0);
}

TEST(TopkAccuracy, Errors) {
  EXPECT_THROW(topk_accuracy({row({1, 2})}, {0, 1}, 1), ArgumentError);
  EXPECT_THROW(topk_accuracy({}, {}, 1), ArgumentError);
  EXPECT_THROW(topk_accuracy({row({1, 2})}, {0}, 3), ArgumentError);
}

TEST(TopkAccuracy, NonDecreasingInK) {
  SeededRng rng(1);
  std::vector<Tensor> logits;
  std::vector<std::size_t> labels;
  for (int i = 0; i < 200; ++i) {
    logits.push_back(random_normal<float>(rng, Shape{10}, 0, 1));
    labels.push_back(rng.uniform_index(10));
  }
  double prev = 0.0;
  for (std::size_t k = 1; k <= 10; ++k) {
    const double a = topk_accuracy(logits, labels, k);
    EXPECT_GE(a, prev);
    prev = a;
  }
  EXPECT_EQ(prev, 1.0);
}

// ---------------------------------------------------------------------------
// Wilson intervals

TEST(Wilson, HalfOfHundred) {
  const Interval i = wilson_interval(50, 100);
  EXPECT_NEAR(i.low, 0.4038, 5e-5);
  EXPECT_NEAR(i.high, 0.5962, 5e-5);
  const auto [lo, hi] = wilson_oracle(50, 100, 1.96);
  EXPECT_NEAR(i.low, lo, 1e-12);
  EXPECT_NEAR(i.high, hi, 1e-12);
}

TEST(Wilson, AllCorrectOfTen) {
  const Interval i = wilson_interval(10, 10);
  EXPECT_DOUBLE_EQ(i.high, 1.0);
  EXPECT_GT(i.low, 0.7);
  EXPECT_NEAR(i.low, wilson_oracle(10, 10, 1.96).first, 1e-12);
}

TEST(Wilson, SingleSampleHasNoDivisionError) {
  const Interval i = wilson_interval(1, 1);
  EXPECT_TRUE(std::isfinite(i.low));
  EXPECT_EQ(i.high, 1.0);
  EXPECT_LT(i.low, 0.5);
}

TEST(Wilson, ContainsEstimateAndStaysInUnitInterval) {
  for (std::size_t n = 1; n <= 60; ++n)
    for (std::size_t s = 0; s <= n; ++s)
      for (double z : {1.0, 1.96, 3.0}) {
        const Interval i = wilson_interval(s, n, z);
        const double p = static_cast<double>(s) / static_cast<double>(n);
        ASSERT_GE(i.low, 0.0);
        ASSERT_LE(i.high, 1.0);
        ASSERT_LE(i.low, p);
        ASSERT_GE(i.high, p);
      }
}

TEST(PerCategory, RowsCountsAndEmptyFlag) {
  // Class 0: 2 of 3 correct. Class 1: 1 of 1. Class 2: no samples.
  const std::vector<Tensor> logits{row({1, 0, 0}), row({1, 0, 0}), row({0, 1, 0}), row({0, 1, 0})};
  const std::vector<std::size_t> labels{0, 0, 0, 1};
  const CategoryTable t = per_category_ci(logits, labels, 3, 1, 1.96, {"a", "b", "c"});
  ASSERT_EQ(t.rows.size(), 2u);
  EXPECT_EQ(t.empty, std::vector<std::size_t>{2});
  EXPECT_EQ(t.rows[0].name, "a");
  EXPECT_EQ(t.rows[0].n, 3u);
  EXPECT_DOUBLE_EQ(t.rows[0].accuracy, 2.0 / 3.0);
  EXPECT_NEAR(t.rows[0].ci_low, wilson_oracle(2, 3, 1.96).first, 1e-12);
  EXPECT_EQ(t.rows[1].n, 1u);
  EXPECT_EQ(t.rows[1].accuracy, 1.0);
  std::size_t total = 0;
  for (const auto& r : t.rows) total += r.n;
  EXPECT_EQ(total, labels.size());
}

// ---------------------------------------------------------------------------
// Reports

TEST(Report, KeysAndCsvColumns) {
  SeededRng rng(2);
  std::vector<Tensor> logits;
  std::vector<std::size_t> labels;
  for (int i = 0; i < 40; ++i) {
    logits.push_back(random_normal<float>(rng, Shape{8}, 0, 1));
    labels.push_back(rng.uniform_index(8));
  }
  const EvalReport r = make_report(logits, labels, 8, {1, 3, 5});
  const auto j = nlohmann::json::parse(report_json(r));
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.at("topk").items()) keys.push_back(k);
  std::sort(keys.begin(), keys.end());
  EXPECT_EQ(keys, (std::vector<std::string>{"1", "3", "5"}));
  EXPECT_DOUBLE_EQ(j.at("topk").at("3").get<double>(), topk_accuracy(logits, labels, 3));
  const std::string csv = report_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "category,name,n,accuracy,ci_low,ci_high");
}

TEST(Report, BaselineComparisonAddsDeltaColumn) {
  const std::vector<std::size_t> labels{0, 0, 1, 1};
  const std::vector<Tensor> good{row({1, 0}), row({1, 0}), row({0, 1}), row({1, 0})};
  const std::vector<Tensor> base{row({0, 1}), row({1, 0}), row({0, 1}), row({1, 0})};
  EvalReport r = make_report(good, labels, 2, {1});
  const EvalReport b = make_report(base, labels, 2, {1});
  compare_reports(r, b);
  ASSERT_TRUE(r.improved_category_count.has_value());
  EXPECT_EQ(*r.improved_category_count, 1u);
  EXPECT_EQ(r.category_delta, (std::vector<double>{0.5, 0.0}));
  const std::string csv = report_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "category,name,n,accuracy,ci_low,ci_high,delta");
  EXPECT_EQ(nlohmann::json::parse(report_json(r)).at("improved_category_count").get<int>(), 1);
}

// ---------------------------------------------------------------------------
// Ratio curve

TEST(RatioCurve, IdenticalResultsGiveZero) {
  SeededRng rng(3);
  std::vector<double> ratios;
  std::vector<bool> hits;
  for (int i = 0; i < 300; ++i) {
    ratios.push_back(std::pow(10.0, rng.uniform(-0.5, 2.0)));
    hits.push_back(rng.bernoulli(0.6));
  }
  const CurveSeries c = ratio_curve(ratios, hits, hits, 8);
  ASSERT_FALSE(c.points.empty());
  for (const auto& p : c.points) EXPECT_EQ(p.y, 0.0);
}

TEST(RatioCurve, BinsPartitionRangeAndMergeSmallOnes) {
  SeededRng rng(4);
  std::vector<double> ratios;
  std::vector<bool> a, b;
  for (int i = 0; i < 500; ++i) {
    // Skewed so the upper bins are sparse.
    ratios.push_back(std::pow(10.0, 3.0 * std::pow(rng.uniform(), 4.0)));
    a.push_back(rng.bernoulli(0.7));
    b.push_back(rng.bernoulli(0.5));
  }
  const CurveSeries c = ratio_curve(ratios, a, b, 10, 10);
  const auto [mn, mx] = std::minmax_element(ratios.begin(), ratios.end());
  ASSERT_FALSE(c.points.empty());
  EXPECT_NEAR(c.points.front().x_low, std::log10(*mn), 1e-12);
  EXPECT_NEAR(c.points.back().x_high, std::log10(*mx), 1e-12);
  std::size_t total = 0;
  for (std::size_t i = 0; i < c.points.size(); ++i) {
    const auto& p = c.points[i];
    EXPECT_GE(p.n, 10u);
    EXPECT_LE(p.x_low, p.x);
    EXPECT_LE(p.x, p.x_high);
    if (i) {
      EXPECT_DOUBLE_EQ(p.x_low, c.points[i - 1].x_high);
      EXPECT_GT(p.x, c.points[i - 1].x);
    }
    total += p.n;
  }
  EXPECT_EQ(total, ratios.size());
}

TEST(RatioCurve, BinValuesMatchDirectCount) {
  // Two well-separated groups with two bins: y per bin is a difference of
  // hit rates computed by hand.
  std::vector<double> ratios;
  std::vector<bool> ctx, min;
  for (int i = 0; i < 20; ++i) {
    ratios.push_back(1.0);
    ctx.push_back(i < 10);
    min.push_back(i < 5);
  }
  for (int i = 0; i < 20; ++i) {
    ratios.push_back(100.0);
    ctx.push_back(i < 18);
    min.push_back(i < 2);
  }
  const CurveSeries c = ratio_curve(ratios, ctx, min, 2);
  ASSERT_EQ(c.points.size(), 2u);
  EXPECT_DOUBLE_EQ(c.points[0].y, 10.0 / 20 - 5.0 / 20);
  EXPECT_DOUBLE_EQ(c.points[1].y, 18.0 / 20 - 2.0 / 20);
  EXPECT_DOUBLE_EQ(c.points[0].x, 0.5);
  EXPECT_DOUBLE_EQ(c.points[1].x, 1.5);
}

TEST(RatioCurve, SingleValueGivesSinglePoint) {
  const std::vector<double> ratios(30, 5.0);
  const std::vector<bool> a(30, true), b(30, false);
  const CurveSeries c = ratio_curve(ratios, a, b, 8);
  ASSERT_EQ(c.points.size(), 1u);
  EXPECT_EQ(c.points[0].n, 30u);
  EXPECT_EQ(c.points[0].y, 1.0);
}

TEST(CurveCsv, Columns) {
  CurveSeries c;
  c.points = {{1.0, 0.5, 3, 1.0, 1.0}};
  EXPECT_EQ(curve_csv(c), "x,y,n\n1,0.5,3\n");
}

// ---------------------------------------------------------------------------
// Blur sweep and saliency

TEST(BlurSweep, FortyPointsAndUnblurredMatchesDirect) {
  auto [m, params] = build_gistnet<float>(GistNetConfig::desk(), 3);
  const auto data = synthetic_set(12);
  const BlurSchedule schedule = BlurSchedule::linear(128);
  const BlurSweep s = blur_sweep(m, params, data, schedule, 0.3);
  ASSERT_EQ(s.gistnet.points.size(), 40u);
  ASSERT_EQ(s.baseline.points.size(), 40u);
  for (std::size_t j = 0; j < 40; ++j) {
    EXPECT_EQ(s.gistnet.points[j].x, schedule.levels[j]);
    EXPECT_EQ(s.baseline.points[j].y, 0.3);
  }
  std::vector<std::size_t> labels;
  for (const auto& d : data) labels.push_back(d.category);
  EXPECT_EQ(s.gistnet.points[0].y, topk_accuracy(predict_logits(m, params, data, InputSpec{}), labels, 1));
}

TEST(Saliency, ConstantGradientGivesZeros) {
  EXPECT_EQ(saliency_from_gradient(Tensor::zeros(Shape{3, 4, 5})), Tensor::zeros(Shape{4, 5}));
  EXPECT_EQ(saliency_from_gradient(Tensor::full(Shape{3, 4, 5}, 2.0f)), Tensor::zeros(Shape{4, 5}));
}

TEST(Saliency, ChannelMaxAndMinMax) {
  const Tensor g(Shape{2, 1, 3}, {1, -4, 0, -2, 3, 1});
  // channel max of |g| = [2, 4, 1] -> min-max [1/3, 1, 0]
  const Tensor s = saliency_from_gradient(g);
  EXPECT_NEAR(s[0], 1.0 / 3.0, 1e-7);
  EXPECT_EQ(s[1], 1.0f);
  EXPECT_EQ(s[2], 0.0f);
}

TEST(Saliency, LinearModelIsNormalizedAbsWeights) {
  const Shape input{3, 4, 5};
  const Model m = linear_model(input, 4);
  auto params = init_model_params<float>(m.parameterized_layers(), 11);
  SeededRng rng(5);
  const ModelInput<float> in{random_normal<float>(rng, input, 0, 1), std::nullopt};
  const std::size_t target = 2;
  const auto maps = saliency_map(m, params, in, target);
  EXPECT_FALSE(maps.context.has_value());
  // d logit_t / d x = W[:, t]; reduce by channel max of |.| and min-max normalise.
  const Tensor& w = params.at("lin.head").weights;
  std::vector<double> red(20, 0.0);
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t p = 0; p < 20; ++p) red[p] = std::max(red[p], std::abs(static_cast<double>(w[(c * 20 + p) * 4 + target])));
  const auto [lo, hi] = std::minmax_element(red.begin(), red.end());
  for (std::size_t p = 0; p < 20; ++p) EXPECT_NEAR(maps.fovea[p], (red[p] - *lo) / (*hi - *lo), 1e-6);

  // Shifting the biases of the other classes does not move the map.
  auto shifted = params;
  for (std::size_t k = 0; k < 4; ++k)
    if (k != target) shifted.at("lin.head").bias[k] += 3.5f;
  EXPECT_EQ(saliency_map(m, shifted, in, target).fovea, maps.fovea);
}

TEST(Saliency, FusedModelGivesOneMapPerStream) {
  auto [m, params] = build_gistnet<float>(GistNetConfig::desk(), 2);
  const auto data = synthetic_set(1);
  const auto maps = saliency_map(m, params, prepare_input(m, data[0], InputSpec{}), 1);
  EXPECT_EQ(maps.fovea.shape(), (Shape{64, 64}));
  ASSERT_TRUE(maps.context.has_value());
  EXPECT_EQ(maps.context->shape(), (Shape{128, 128}));
  for (float v : maps.context->values()) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 1.0f);
  }
}

// ---------------------------------------------------------------------------
// Embeddings

TEST(Embeddings, ShapesAndLabels) {
  const auto data = synthetic_set(6);
  auto [f, fp] = build_fovea<float>(FoveaConfig::desk(), 1);
  auto [g, gp] = build_gistnet<float>(GistNetConfig::desk(), 1);
  const EmbeddingSet a = fovea_embeddings(f, fp, data);
  const EmbeddingSet b = periphery_embeddings(g, gp, data);
  EXPECT_EQ(a.features.shape(), (Shape{6, 64}));
  EXPECT_EQ(b.features.shape(), (Shape{6, 128}));
  EXPECT_EQ(a.source, EmbeddingSource::kFovea);
  EXPECT_EQ(b.source, EmbeddingSource::kPeriphery);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(a.superclass[i], static_cast<std::size_t>(data[i].scene_superclass));
    EXPECT_EQ(b.category[i], data[i].category);
  }
  EXPECT_TRUE(a.features.all_finite());
}

// ---------------------------------------------------------------------------
// t-SNE

TEST(Tsne, CalibrationWithinTolerance) {
  std::vector<std::size_t> labels;
  const Tensor64 x = two_clusters(100, 10, 10.0, 1, labels);
  for (double perp : {5.0, 15.0, 30.0}) {
    const Affinities a = perplexity_affinities(x, perp);
    for (std::size_t i = 0; i < 100; ++i) {
      const double achieved = std::exp2(entropy_bits(a.conditional, i, 100));
      EXPECT_LE(std::abs(achieved - perp), 1e-3 * perp) << "row " << i;
      EXPECT_NEAR(a.perplexity[i], achieved, 1e-9);
      EXPECT_EQ(a.conditional[i * 100 + i], 0.0);
    }
  }
}

TEST(Tsne, IdenticalPointsGiveUniformAffinities) {
  const Tensor64 x = Tensor64::full(Shape{3, 4}, 1.5);
  const Affinities a = perplexity_affinities(x, 5.0);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_TRUE(std::isfinite(a.conditional[i * 3 + j]));
      EXPECT_NEAR(a.conditional[i * 3 + j], i == j ? 0.0 : 0.5, 1e-12);
    }
  for (std::size_t it : a.iterations) EXPECT_EQ(it, 200u);
}

TEST(Tsne, PerplexityRangeChecked) {
  std::vector<std::size_t> labels;
  const Tensor64 x = two_clusters(40, 3, 5.0, 2, labels);
  TsneOptions o;
  o.perplexity = 4.0;
  EXPECT_THROW(tsne_2d(x, o), ArgumentError);
  o.perplexity = 13.5;  // (40 - 1) / 3 = 13
  EXPECT_THROW(tsne_2d(x, o), ArgumentError);
}

TEST(Tsne, TwoClustersSeparateAndKlDecreases) {
  for (std::uint64_t seed : {1u, 2u}) {
    std::vector<std::size_t> labels;
    const Tensor64 x = two_clusters(100, 10, 10.0, 40 + seed, labels);
    TsneOptions o;
    o.seed = seed;
    const TsneResult r = tsne_2d(x, o);
    EXPECT_EQ(r.coords.shape(), (Shape{100, 2}));
    EXPECT_TRUE(r.coords.all_finite());
    EXPECT_GE(nearest_centroid_accuracy(r.coords, labels), 0.95);
    EXPECT_EQ(r.kl.size(), 750u);
    EXPECT_EQ(r.kl_increases, 0u);
    EXPECT_FALSE(r.flagged);
    for (std::size_t t = 1; t < r.kl.size(); ++t) EXPECT_LE(r.kl[t], r.kl[t - 1] + 1e-6) << "step " << t;
  }
}

TEST(Tsne, DeterministicGivenSeed) {
  std::vector<std::size_t> labels;
  const Tensor64 x = two_clusters(60, 5, 6.0, 9, labels);
  TsneOptions o;
  o.perplexity = 10;
  o.iterations = 300;
  o.seed = 4;
  EXPECT_EQ(tsne_2d(x, o).coords, tsne_2d(x, o).coords);
}

TEST(NearestCentroid, HandExample) {
  const Tensor64 c(Shape{4, 2}, {0, 0, 0, 1, 10, 10, 0, 0.2});
  EXPECT_DOUBLE_EQ(nearest_centroid_accuracy(c, {0, 0, 1, 1}), 0.75);
}

// ---------------------------------------------------------------------------
// Linear probe

TEST(Probe, SeparableBlobs) {
  SeededRng rng(6);
  const std::size_t n = 200;
  Tensor64 x = Tensor64::zeros(Shape{n, 2});
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = i % 2;
    x[i * 2] = 0.5 * rng.normal() + (labels[i] ? 4.0 : -4.0);
    x[i * 2 + 1] = 0.5 * rng.normal();
  }
  const ProbeResult r = linear_probe(x, labels, ProbeOptions{});
  EXPECT_GE(r.test_accuracy, 0.95);
  EXPECT_GE(r.train_accuracy, 0.95);
  EXPECT_EQ(r.n_train + r.n_test, n);
  EXPECT_EQ(r.n_train, 140u);
  EXPECT_EQ(r.num_classes, 2u);
}

TEST(Probe, ShuffledLabelsAtChance) {
  for (std::size_t classes : {2u, 4u}) {
    SeededRng rng(7 + classes);
    const std::size_t n = 1000, d = 6;
    Tensor64 x = random_normal<double>(rng, Shape{n, d}, 0, 1);
    std::vector<std::size_t> labels(n);
    for (auto& l : labels) l = rng.uniform_index(classes);
    const ProbeResult r = linear_probe(x, labels, ProbeOptions{});
    EXPECT_NEAR(r.test_accuracy, 1.0 / static_cast<double>(classes), 0.1) << classes << " classes";
  }
}

TEST(Probe, DeterministicAndValidated) {
  std::vector<std::size_t> labels;
  const Tensor64 x = two_clusters(60, 3, 1.0, 5, labels);
  const ProbeResult a = linear_probe(x, labels, ProbeOptions{});
  const ProbeResult b = linear_probe(x, labels, ProbeOptions{});
  EXPECT_EQ(a.train_accuracy, b.train_accuracy);
  EXPECT_EQ(a.test_accuracy, b.test_accuracy);
  EXPECT_THROW(linear_probe(x, std::vector<std::size_t>(60, 1), ProbeOptions{}), ArgumentError);
  const Tensor64 small = two_clusters(10, 3, 1.0, 5, labels);
  EXPECT_THROW(linear_probe(small, labels, ProbeOptions{}), ArgumentError);
}

// ---------------------------------------------------------------------------
// Plots

TEST(Svg, ScatterHasOnePointPerRowCodedByLabel) {
  const Tensor64 c(Shape{5, 2}, {0, 0, 1, 1, 2, 0, 3, 3, -1, 2});
  const std::string svg = svg_scatter(c, {0, 1, 1, 0, 1}, "t");
  const std::regex point("<circle[^>]*class=\"point label-([01])\"");
  std::size_t zeros = 0, ones = 0;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), point); it != std::sregex_iterator(); ++it)
    ((*it)[1] == "0" ? zeros : ones)++;
  EXPECT_EQ(zeros, 2u);
  EXPECT_EQ(ones, 3u);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_NE(svg.find("</svg>"), std::string::npos);
}

TEST(Svg, LineAndHeatmapWellFormed) {
  CurveSeries c;
  c.name = "a&b";
  c.points = {{0, 0.1, 1, 0, 0}, {1, 0.4, 1, 1, 1}};
  const std::string line = svg_line_plot({c}, "x < y");
  EXPECT_NE(line.find("<polyline"), std::string::npos);
  EXPECT_EQ(line.find("x < y"), std::string::npos);
  EXPECT_NE(line.find("x &lt; y"), std::string::npos);
  const std::string heat = svg_heatmap(Tensor::full(Shape{3, 4}, 0.5f), "h");
  std::size_t rects = 0;
  for (std::size_t p = heat.find("<rect"); p != std::string::npos; p = heat.find("<rect", p + 1)) ++rects;
  EXPECT_GE(rects, 12u);
}
