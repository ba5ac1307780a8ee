#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "gistnet/train.hpp"

using namespace gist;

namespace {

std::vector<SceneSample> tiny_data(std::size_t n, std::uint64_t seed = 3) {
  SyntheticConfig cfg;
  cfg.seed = seed;
  std::vector<SceneSample> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(synthetic_sample(cfg, "train", i));
  return out;
}

TrainConfig quick_config() {
  TrainConfig c;
  c.batch_size = 8;
  c.epochs = 1;
  c.seed = 5;
  return c;
}

}  // namespace

TEST(PrepareInput, ShapesPerModelKind) {
  const auto data = tiny_data(1);
  const Model fovea = describe_fovea(FoveaConfig::desk());
  const Model gist = describe_gistnet(GistNetConfig::desk());
  const auto a = prepare_input(fovea, data[0], InputSpec{});
  EXPECT_EQ(a.fovea.shape(), (Shape{3, 64, 64}));
  EXPECT_FALSE(a.context.has_value());
  const auto b = prepare_input(gist, data[0], InputSpec{});
  EXPECT_EQ(b.fovea, a.fovea);
  ASSERT_TRUE(b.context.has_value());
  EXPECT_EQ(*b.context, make_context_input(data[0], 128));
  EXPECT_EQ(b.fovea, crop_minimal_context(data[0], 64, 0.0));
}

TEST(Train, ZeroEpochsReturnsInitialization) {
  auto [m, params] = build_gistnet<float>(GistNetConfig::desk(), 1);
  TrainConfig c = quick_config();
  c.epochs = 0;
  const TrainResult r = train_model(m, params, tiny_data(10), c);
  EXPECT_EQ(r.params, params);
  EXPECT_EQ(r.iterations, 0u);
  EXPECT_TRUE(r.log.empty());
  EXPECT_EQ(r.final_loss, 0.0);
}

TEST(Train, MaxIterationsStopsEarly) {
  auto [m, params] = build_fovea<float>(FoveaConfig::desk(), 1);
  TrainConfig c = quick_config();
  c.epochs = 10;
  c.max_iterations = 3;
  std::size_t calls = 0;
  const TrainResult r = train_model(m, params, tiny_data(40), c, [&](const TrainLogRow&, const ModelParams<float>&) {
    ++calls;
  });
  EXPECT_EQ(r.iterations, 3u);
  EXPECT_EQ(r.log.size(), 3u);
  EXPECT_EQ(calls, 3u);
  EXPECT_EQ(r.log.back().iteration, 3u);
}

TEST(Train, ShortFinalBatchAndLogRows) {
  auto [m, params] = build_fovea<float>(FoveaConfig::desk(), 1);
  TrainConfig c = quick_config();
  c.epochs = 2;
  const TrainResult r = train_model(m, params, tiny_data(20), c);
  EXPECT_EQ(r.iterations, 6u);  // ceil(20/8) per epoch
  for (const auto& row : r.log) {
    EXPECT_TRUE(std::isfinite(row.loss));
    EXPECT_GE(row.batch_accuracy, 0.0);
    EXPECT_LE(row.batch_accuracy, 1.0);
  }
  EXPECT_EQ(r.log.front().epoch, 1u);
  EXPECT_EQ(r.log.back().epoch, 2u);
}

TEST(Train, SameConfigAndSeedIsBitwiseDeterministic) {
  auto [m, params] = build_gistnet<float>(GistNetConfig::desk(), 2);
  const auto data = tiny_data(24);
  const TrainResult a = train_model(m, params, data, quick_config());
  const TrainResult b = train_model(m, params, data, quick_config());
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.final_loss, b.final_loss);
  EXPECT_LE(std::abs(a.final_loss - b.final_loss), 1e-10 * std::abs(a.final_loss));
  TrainConfig other = quick_config();
  other.seed = 6;
  EXPECT_FALSE(train_model(m, params, data, other).params == a.params);
}

TEST(Train, NonFiniteLossNamesIteration) {
  auto [m, params] = build_fovea<float>(FoveaConfig::desk(), 1);
  params.at("fovea.classifier").bias[0] = std::numeric_limits<float>::infinity();
  try {
    train_model(m, params, tiny_data(8), quick_config());
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("iteration 1"), std::string::npos) << e.what();
  }
}

TEST(Train, InvalidConfig) {
  auto [m, params] = build_fovea<float>(FoveaConfig::desk(), 1);
  TrainConfig c = quick_config();
  c.batch_size = 0;
  EXPECT_THROW(train_model(m, params, tiny_data(4), c), ConfigError);
}

TEST(Train, LossFallsOnRepeatedBatch) {
  auto [m, params] = build_fovea<float>(FoveaConfig::desk(), 4);
  TrainConfig c = quick_config();
  c.epochs = 15;
  const TrainResult r = train_model(m, params, tiny_data(8), c);
  EXPECT_LT(r.log.back().loss, 0.5 * r.log.front().loss);
}

TEST(Predict, LogitsPerSampleInOrder) {
  auto [m, params] = build_gistnet<float>(GistNetConfig::desk(), 7);
  const auto data = tiny_data(5);
  const auto logits = predict_logits(m, params, data, InputSpec{});
  ASSERT_EQ(logits.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i)
    EXPECT_EQ(logits[i], forward(m, params, prepare_input(m, data[i], InputSpec{})).logits);
}
