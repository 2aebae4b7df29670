#include <gtest/gtest.h>

#include <algorithm>
#include <set>

#include "dfcnn/synth.hpp"
#include "dfcnn/training.hpp"
#include "test_util.hpp"

using namespace dfcnn;

namespace {

std::vector<std::size_t> slice_sizes(const std::vector<FoldSpec>& folds) {
  std::vector<std::size_t> out;
  for (const auto& f : folds) out.push_back(f.opacity.size());
  return out;
}

Dataset tiny_dataset(int per_class, int size, std::uint64_t seed) {
  SynthOptions o;
  o.per_class = per_class;
  o.size = size;
  o.seed = seed;
  return Dataset::from_images(synth_generate(o));
}

}  // namespace

TEST(MakeFolds, KaggleCounts) {
  const auto folds = make_folds(1082, 3110, 3);
  EXPECT_EQ(slice_sizes(folds), (std::vector<std::size_t>{1036, 1036, 1038}));
  for (const auto& f : folds) EXPECT_EQ(f.normal.size(), 1082u);
  EXPECT_EQ(folds[0].opacity.front(), 0u);
  EXPECT_EQ(folds[1].opacity.front(), 1036u);
  EXPECT_EQ(folds[2].opacity.front(), 2072u);
  EXPECT_EQ(folds[2].opacity.back(), 3109u);
}

TEST(MakeFolds, SmallCounts) {
  EXPECT_EQ(slice_sizes(make_folds(10, 9, 3)), (std::vector<std::size_t>{3, 3, 3}));
  EXPECT_EQ(slice_sizes(make_folds(5, 7, 3)), (std::vector<std::size_t>{2, 2, 3}));
  EXPECT_THROW(make_folds(5, 2, 3), Error);
  EXPECT_THROW(make_folds(0, 2, 1), Error);
}

TEST(MakeFolds, PartitionPropertyOverRandomCounts) {
  Rng rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n_opacity = 1 + rng.below(500);
    const std::size_t k = 1 + rng.below(n_opacity < 12 ? n_opacity : 12);
    const std::size_t n_normal = 1 + rng.below(50);
    const auto folds = make_folds(n_normal, n_opacity, k);
    ASSERT_EQ(folds.size(), k);
    std::vector<int> seen(n_opacity, 0);
    for (const auto& f : folds) {
      EXPECT_EQ(f.normal.size(), n_normal);
      for (std::size_t i : f.opacity) ++seen[i];
    }
    EXPECT_TRUE(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
  }
}

TEST(Adam, ZeroGradientAtStepOneLeavesParametersUnchanged) {
  ParameterSet<double> params;
  params.add("w", TensorD({1, 1, 1, 3}, std::vector<double>{1.0, -2.0, 0.5}));
  const auto before = params[0].value;
  auto state = AdamState<double>::zeros_like(params);
  std::vector<TensorD> grads = {TensorD({1, 1, 1, 3})};
  adam_step<double>(params, grads, state, TrainConfig{});
  EXPECT_EQ(params[0].value, before);
  EXPECT_EQ(state.step, 1u);
}

TEST(Adam, FirstStepWithUnitGradient) {
  ParameterSet<double> params;
  params.add("w", TensorD({1, 1, 1, 1}, 0.0));
  auto state = AdamState<double>::zeros_like(params);
  std::vector<TensorD> grads = {TensorD({1, 1, 1, 1}, 1.0)};
  adam_step<double>(params, grads, state, TrainConfig{});
  // m_hat = v_hat = 1 after bias correction.
  EXPECT_NEAR(params[0].value[0], -1.5e-3 / (1.0 + 1e-8), 1e-15);
  const double after_one = params[0].value[0];
  adam_step<double>(params, grads, state, TrainConfig{});
  EXPECT_LT(params[0].value[0], after_one);
  EXPECT_LT(after_one, 0.0);
}

TEST(Adam, StepOneMagnitudeBoundedByLearningRate) {
  Rng rng(5);
  ParameterSet<double> params;
  params.add("w", testutil::random_tensor<double>({1, 4, 4, 4}, rng));
  const auto before = params[0].value;
  auto state = AdamState<double>::zeros_like(params);
  std::vector<TensorD> grads = {testutil::random_tensor<double>({1, 4, 4, 4}, rng, -100, 100)};
  TrainConfig cfg;
  adam_step<double>(params, grads, state, cfg);
  for (std::size_t i = 0; i < before.size(); ++i) {
    const double delta = std::abs(params[0].value[i] - before[i]);
    EXPECT_LE(delta, cfg.learning_rate * (1 + 1e-12));
    EXPECT_GT(delta, 0.0);
  }
}

TEST(Adam, ShapeMismatchThrows) {
  ParameterSet<float> params;
  params.add("w", TensorF({1, 1, 1, 2}));
  auto state = AdamState<float>::zeros_like(params);
  std::vector<TensorF> grads = {TensorF({1, 1, 1, 3})};
  EXPECT_THROW(adam_step<float>(params, grads, state, TrainConfig{}), ShapeError);
}

TEST(Train, StepCountAndTrace) {
  auto net = build_network<float>(NetworkConfig::scaled({2, 4}, 8), 1);
  const Dataset data = tiny_dataset(2, 8, 3);
  AdamState<float> state;
  TrainConfig cfg;
  cfg.epochs = 1;
  const auto fold = make_folds(2, 2, 1).front();
  const auto result = train(net, state, fold, data, data, cfg);
  EXPECT_EQ(result.steps, 2u);
  EXPECT_EQ(state.step, 2u);
  ASSERT_EQ(result.trace.size(), 1u);
  EXPECT_EQ(result.trace[0].epoch, 1);
  EXPECT_TRUE(result.trace[0].val_acc.has_value());
  EXPECT_TRUE(result.trace[0].val_apt.has_value());
}

TEST(Train, ShortLastBatchIsKept) {
  auto net = build_network<float>(NetworkConfig::scaled({2}, 4), 1);
  const Dataset data = tiny_dataset(3, 4, 3);
  AdamState<float> state;
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  const auto result = train(net, state, make_folds(3, 3, 1).front(), data, Dataset{}, cfg);
  EXPECT_EQ(result.steps, 4u);  // 6 samples -> batches of 4 and 2, twice
  EXPECT_FALSE(result.trace[0].val_acc.has_value());
}

TEST(Train, ZeroLearningRateKeepsParameters) {
  auto net = build_network<float>(NetworkConfig::scaled({2, 4}, 8), 1);
  const auto before = net.params;
  const Dataset data = tiny_dataset(2, 8, 3);
  AdamState<float> state;
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.learning_rate = 0.0;
  train(net, state, make_folds(2, 2, 1).front(), data, data, cfg);
  for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(net.params[i].value, before[i].value);
}

TEST(Train, DeterministicUnderSeedIn64Bit) {
  const Dataset data = tiny_dataset(3, 8, 4);
  auto run = [&] {
    auto net = build_network<double>(NetworkConfig::scaled({2, 4}, 8), 9);
    AdamState<double> state;
    TrainConfig cfg;
    cfg.epochs = 2;
    cfg.seed = 11;
    auto res = train(net, state, make_folds(3, 3, 1).front(), data, data, cfg);
    return std::make_pair(res.trace, net.params[0].value);
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Train, ParametersWithNonzeroGradientChange) {
  auto net = build_network<double>(NetworkConfig::scaled({2, 4}, 8), 1);
  const Dataset data = tiny_dataset(1, 8, 3);
  std::vector<std::size_t> idx = {0, 1};
  const TensorD x = data.batch(idx).cast<double>();
  std::vector<TensorD> grads;
  loss_and_gradients<double>(net, x, {0.0, 1.0}, grads);
  const auto before = net.params;
  auto state = AdamState<double>::zeros_like(net.params);
  adam_step<double>(net.params, grads, state, TrainConfig{});
  for (std::size_t k = 0; k < grads.size(); ++k) {
    for (std::size_t i = 0; i < grads[k].size(); ++i) {
      if (grads[k][i] != 0.0) EXPECT_NE(net.params[k].value[i], before[k].value[i]);
    }
  }
}

TEST(Train, RejectsMismatchedImageSize) {
  auto net = build_network<float>(NetworkConfig::scaled({2}, 4), 1);
  const Dataset data = tiny_dataset(2, 8, 3);
  AdamState<float> state;
  EXPECT_THROW(train(net, state, make_folds(2, 2, 1).front(), data, data, TrainConfig{}),
               ShapeError);
}
