#include <cmath>
#include <limits>
#include <set>
#include <string>

#include <gtest/gtest.h>

#include "gistnet/gradcheck.hpp"
#include "gistnet/optim.hpp"

using namespace gist;

namespace {

ModelParams<double> scalar_params(double w, double b = 0.0) {
  ModelParams<double> p;
  p.insert("theta", LayerParams<double>{Tensor64(Shape{1}, {w}), Tensor64(Shape{1}, {b})});
  return p;
}

// Bias-corrected Adam on one scalar, written out longhand.
struct ScalarAdam {
  double lr, b1, b2, eps;
  double m = 0.0, v = 0.0;
  int t = 0;
  double step(double theta, double g) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mh = m / (1 - std::pow(b1, t));
    const double vh = v / (1 - std::pow(b2, t));
    return theta - lr * mh / (std::sqrt(vh) + eps);
  }
};

ModelParams<double> random_params(SeededRng& rng) {
  ModelParams<double> p;
  p.insert("a", LayerParams<double>{random_normal<double>(rng, Shape{3, 2}, 0, 1), random_normal<double>(rng, Shape{2}, 0, 1)});
  p.insert("b", LayerParams<double>{random_normal<double>(rng, Shape{4}, 0, 1), random_normal<double>(rng, Shape{1}, 0, 1)});
  return p;
}

}  // namespace

TEST(Adam, ZeroGradientLeavesParams) {
  const auto p = scalar_params(0.5, -1.0);
  const auto state = AdamState<double>::init(p, AdamConfig{});
  const auto [np, ns] = adam_step(state, p, p.zeros_like());
  EXPECT_EQ(np, p);
  EXPECT_EQ(ns.step, 1u);
}

TEST(Adam, FirstStepHandValue) {
  const auto p = scalar_params(0.5);
  AdamConfig cfg;
  cfg.learning_rate = 0.001;
  const auto state = AdamState<double>::init(p, cfg);
  const auto [np, ns] = adam_step(state, p, scalar_params(0.1));
  EXPECT_NEAR(np.at("theta").weights[0], 0.499, 1e-6);
}

TEST(Adam, MatchesScalarReferenceOverSteps) {
  AdamConfig cfg;
  cfg.learning_rate = 0.01;
  auto p = scalar_params(0.5, 2.0);
  auto state = AdamState<double>::init(p, cfg);
  ScalarAdam rw{cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon};
  ScalarAdam rb = rw;
  double w = 0.5, b = 2.0;
  for (int i = 0; i < 3; ++i) {
    std::tie(p, state) = adam_step(state, p, scalar_params(0.3, -0.7));
    w = rw.step(w, 0.3);
    b = rb.step(b, -0.7);
    EXPECT_NEAR(p.at("theta").weights[0], w, 1e-12) << "step " << i + 1;
    EXPECT_NEAR(p.at("theta").bias[0], b, 1e-12) << "step " << i + 1;
  }
  EXPECT_EQ(state.step, 3u);
}

TEST(Adam, ZeroLearningRateIsIdentity) {
  SeededRng rng(1);
  AdamConfig cfg;
  cfg.learning_rate = 0.0;
  auto p = random_params(rng);
  const auto original = p;
  auto state = AdamState<double>::init(p, cfg);
  for (int i = 0; i < 5; ++i) std::tie(p, state) = adam_step(state, p, random_params(rng));
  EXPECT_EQ(p, original);
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
  AdamConfig cfg;
  auto p = scalar_params(0.0, 0.0);
  auto state = AdamState<double>::init(p, cfg);
  const auto g = scalar_params(0.37, -4.0);
  for (int i = 0; i < 999; ++i) adam_update(state, p, g);
  const auto before = p;
  adam_update(state, p, g);
  const double dw = p.at("theta").weights[0] - before.at("theta").weights[0];
  const double db = p.at("theta").bias[0] - before.at("theta").bias[0];
  EXPECT_LT(dw, 0.0);
  EXPECT_GT(db, 0.0);
  EXPECT_NEAR(std::abs(dw), cfg.learning_rate, 0.01 * cfg.learning_rate);
  EXPECT_NEAR(std::abs(db), cfg.learning_rate, 0.01 * cfg.learning_rate);
}

TEST(Adam, StateIndependentOfParameterValues) {
  SeededRng rng(2);
  const auto p1 = random_params(rng);
  const auto p2 = random_params(rng);
  const auto g = random_params(rng);
  const auto s = AdamState<double>::init(p1, AdamConfig{});
  const auto [a, sa] = adam_step(s, p1, g);
  const auto [b, sb] = adam_step(s, p2, g);
  EXPECT_EQ(sa.m, sb.m);
  EXPECT_EQ(sa.v, sb.v);
}

TEST(Adam, InPlaceMatchesPure) {
  SeededRng rng(3);
  auto p = random_params(rng);
  auto state = AdamState<double>::init(p, AdamConfig{});
  auto q = p;
  auto qs = state;
  for (int i = 0; i < 4; ++i) {
    const auto g = random_params(rng);
    std::tie(p, state) = adam_step(state, p, g);
    adam_update(qs, q, g);
  }
  EXPECT_EQ(p, q);
}

TEST(Adam, ShapeMismatchIsShapeError) {
  const auto p = scalar_params(1.0);
  ModelParams<double> bad;
  bad.insert("theta", LayerParams<double>{Tensor64::zeros(Shape{2}), Tensor64::zeros(Shape{1})});
  EXPECT_THROW(adam_step(AdamState<double>::init(p, AdamConfig{}), p, bad), ShapeError);
}

TEST(Adam, InvalidConfig) {
  AdamConfig c;
  c.beta1 = 1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = AdamConfig{};
  c.epsilon = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
}

// ---------------------------------------------------------------------------
// Gradient checking

TEST(GradCheck, QuadraticIsExact) {
  const LossFn fn = [](const ModelParams<double>& p, ModelParams<double>* g) {
    const double t = p.at("theta").weights[0];
    if (g) g->at("theta").weights[0] += 2 * t;
    return LossEval{t * t, 0};
  };
  const auto report = grad_check(fn, scalar_params(3.0), GradCheckOptions{});
  ASSERT_EQ(report.rows.size(), 2u);
  EXPECT_EQ(report.rows[0].tensor, "theta.weights");
  EXPECT_NEAR(report.rows[0].worst_analytic, 6.0, 1e-9);
  EXPECT_NEAR(report.rows[0].worst_numeric, 6.0, 1e-9);
  EXPECT_TRUE(report.passed);
}

TEST(GradCheck, RelativeErrorDefinition) {
  EXPECT_NEAR(relative_error(1.0, 1.1), 0.1 / 1.1, 1e-15);
  EXPECT_DOUBLE_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(1e-14, 0.0), 1e-14 / 1e-12);
}

TEST(GradCheck, RandomDenseLayerPasses) {
  const Model m = [] {
    Model model;
    model.kind = ModelKind::kFovea;
    model.num_classes = 5;
    model.fovea.input_shape = Shape{8};
    model.head = {"dense", Dense{8, 5}};
    return model;
  }();
  const auto params = init_model_params<double>(m.parameterized_layers(), 4);
  SeededRng rng(4);
  const ModelInput<double> in{random_normal<double>(rng, Shape{8}, 0, 1), std::nullopt};
  const auto report = grad_check(model_loss_fn(m, in, 2), params, GradCheckOptions{});
  EXPECT_TRUE(report.passed);
  EXPECT_LE(report.max_rel_err, 1e-4);
}

TEST(GradCheck, NonFiniteLossIsNumericError) {
  const LossFn fn = [](const ModelParams<double>&, ModelParams<double>*) {
    return LossEval{std::numeric_limits<double>::quiet_NaN(), 0};
  };
  EXPECT_THROW(grad_check(fn, scalar_params(1.0), GradCheckOptions{}), NumericError);
}

TEST(GradCheck, EveryLayerTypePasses) {
  GradCheckOptions opt;
  for (const auto& c : layer_gradchecks(opt, 11)) {
    EXPECT_TRUE(c.report.passed) << c.name << " " << c.report.max_rel_err;
    EXPECT_LE(c.report.max_rel_err, 1e-4) << c.name;
  }
}

TEST(GradCheck, LayerCasesCoverEveryType) {
  std::set<std::string> names;
  for (const auto& c : layer_gradchecks(GradCheckOptions{}, 1)) names.insert(c.name);
  for (const char* t : {"conv2d", "conv2d_stride2", "dense", "relu", "maxpool2", "concat2_softmax_xent"})
    EXPECT_TRUE(names.count(t)) << t;
}

TEST(GradCheck, DeskGistNetPassesAndListsEveryTensorOnce) {
  GradCheckOptions opt;
  opt.samples_per_tensor = 20;
  const auto c = gistnet_gradcheck(GistNetConfig::desk(), opt, 13);
  EXPECT_TRUE(c.report.passed) << c.report.worst_tensor() << " " << c.report.max_rel_err;
  EXPECT_LE(c.report.max_rel_err, 1e-4);
  std::multiset<std::string> seen;
  for (const auto& row : c.report.rows) seen.insert(row.tensor);
  const Model m = describe_gistnet(GistNetConfig::desk());
  EXPECT_EQ(seen.size(), 2 * m.parameterized_layers().size());
  for (const auto& l : m.parameterized_layers()) {
    EXPECT_EQ(seen.count(l.name + ".weights"), 1u) << l.name;
    EXPECT_EQ(seen.count(l.name + ".bias"), 1u) << l.name;
  }
}

TEST(GradCheck, CorruptedBackwardFailsNamingLayer) {
  const GistNetConfig cfg = GistNetConfig::desk();
  const Model m = describe_gistnet(cfg);
  const auto params = init_model_params<double>(m.parameterized_layers(), 2);
  SeededRng rng(6);
  const ModelInput<double> in{random_normal<double>(rng, m.fovea_input_shape(), 0.5, 0.2),
                              random_normal<double>(rng, m.context_input_shape(), 0.5, 0.2)};
  GradCheckOptions opt;
  opt.samples_per_tensor = 8;
  const auto report = grad_check(corrupt_layer_gradient(model_loss_fn(m, in, 1), "periphery.conv4", 1.5), params, opt);
  EXPECT_FALSE(report.passed);
  EXPECT_EQ(report.worst_tensor().rfind("periphery.conv4", 0), 0u) << report.worst_tensor();
  for (const auto& row : report.rows)
    if (row.tensor.rfind("periphery.conv4", 0) != 0) {
      EXPECT_TRUE(row.passed) << row.tensor;
    }
}
