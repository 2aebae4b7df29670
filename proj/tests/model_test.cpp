#include <gtest/gtest.h>

#include "dfcnn/model.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dfcnn;
using dfcnn::testutil::random_tensor;

namespace {

// Default-schedule total from the per-layer spreadsheet, computed offline.
constexpr std::int64_t kDefaultParamCount = 7686017;

}  // namespace

TEST(NetworkConfig, DefaultScheduleIsValid) {
  const auto cfg = NetworkConfig::standard();
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_TRUE(cfg.is_full_architecture());
  EXPECT_EQ(cfg.blocks.size(), 7u);
  EXPECT_EQ(cfg.blocks.front(), (BlockSetting{32, 2}));
}

TEST(NetworkConfig, RejectsInvalidSchedules) {
  auto cfg = NetworkConfig::standard();
  cfg.blocks[2].f = 63;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = NetworkConfig::standard();
  cfg.blocks[3].f = 40;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = NetworkConfig::standard();
  cfg.input_size = 200;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = NetworkConfig::standard();
  cfg.blocks.clear();
  EXPECT_THROW(cfg.validate(), Error);
}

TEST(CountParams, SingleConv) {
  ParameterSet<float> params;
  Rng rng(1);
  const auto layer = add_conv(params, "c", 3, 1, 3, 4, rng);
  EXPECT_EQ(params.element_count(), 112u);
  EXPECT_EQ(layer.param_count(), 112u);
}

TEST(CountParams, DefaultScheduleMatchesSpreadsheet) {
  const auto net = build_network<float>(NetworkConfig::standard(), 0);
  const auto oracle_count =
      oracle::count(oracle::network_layers({32, 48, 64, 96, 128, 128, 128}, 256, true, true));
  EXPECT_EQ(oracle_count, kDefaultParamCount);
  EXPECT_EQ(static_cast<std::int64_t>(count_params(net)), oracle_count);
  EXPECT_GE(count_params(net), 6'200'000u);
  EXPECT_LE(count_params(net), 8'400'000u);
}

TEST(CountParams, AblationsShrinkTheModelAndMatchSpreadsheet) {
  const std::vector<int> filters = {32, 48, 64, 96, 128, 128, 128};
  const std::size_t full = count_params(build_network<float>(NetworkConfig::standard(), 0));
  for (bool p2 : {false, true}) {
    for (bool p3 : {false, true}) {
      auto cfg = NetworkConfig::standard();
      cfg.flags = {p2, p3};
      const auto net = build_network<float>(cfg, 0);
      EXPECT_EQ(static_cast<std::int64_t>(count_params(net)),
                oracle::count(oracle::network_layers(filters, 256, p2, p3)));
      if (!(p2 && p3)) EXPECT_LT(count_params(net), full);
    }
  }
}

TEST(CountParams, InvariantToSeed) {
  const auto cfg = NetworkConfig::scaled({8, 12, 16}, 16);
  EXPECT_EQ(count_params(build_network<float>(cfg, 1)), count_params(build_network<float>(cfg, 99)));
}

TEST(BuildNetwork, WiringAndSpatialSchedule) {
  const auto net = build_network<float>(NetworkConfig::standard(), 0);
  ASSERT_EQ(net.blocks.size(), 7u);
  const int sizes[] = {128, 64, 32, 16, 8, 4, 2};
  for (std::size_t k = 0; k < net.blocks.size(); ++k) {
    EXPECT_EQ(net.layers[2 * k].output.h, sizes[k]) << "block " << k + 1;
    if (k + 1 < net.blocks.size()) {
      EXPECT_EQ(net.blocks[k + 1].x_channels, 2 * net.blocks[k].f);
      EXPECT_EQ(net.blocks[k + 1].xs_channels, net.blocks[k].f / 2);
    }
  }
  EXPECT_EQ(net.blocks.back().y_channels(), 256);
  EXPECT_EQ(net.blocks.back().ys_channels(), 64);
  EXPECT_EQ(net.head_width(), 256 + 2 * 2 * 64);
}

TEST(BuildNetwork, SameSeedIsBitIdentical) {
  const auto cfg = NetworkConfig::scaled({8, 12, 16}, 16);
  const auto a = build_network<float>(cfg, 5);
  const auto b = build_network<float>(cfg, 5);
  const auto c = build_network<float>(cfg, 6);
  ASSERT_EQ(a.params.size(), b.params.size());
  bool any_diff = false;
  for (std::size_t i = 0; i < a.params.size(); ++i) {
    EXPECT_EQ(a.params[i].value, b.params[i].value);
    EXPECT_EQ(a.params[i].name, b.params[i].name);
    any_diff |= a.params[i].value != c.params[i].value;
  }
  EXPECT_TRUE(any_diff);
}

TEST(BuildNetwork, BiasesStartAtZeroAndWeightsWithinGlorotBound) {
  const auto net = build_network<double>(NetworkConfig::scaled({4, 8}, 8), 3);
  for (const auto& p : net.params) {
    if (p.name.ends_with(".bias")) {
      for (double v : p.value.data()) EXPECT_EQ(v, 0.0);
    } else {
      const Shape& s = p.value.shape();
      const double fan_in = static_cast<double>(s.n * s.h * s.w);
      const double fan_out = static_cast<double>(s.n * s.h * s.c);
      const double bound = std::sqrt(6.0 / (fan_in + fan_out));
      for (double v : p.value.data()) EXPECT_LE(std::abs(v), bound) << p.name;
    }
  }
}

TEST(Predict, OutputsAreProbabilitiesAndDeterministic) {
  const auto net = build_network<float>(NetworkConfig::scaled({4, 8}, 8), 2);
  Rng rng(3);
  TensorF batch = random_tensor<float>({3, 8, 8, 3}, rng, 0.0, 1.0);
  // Duplicate row 0 into row 2.
  std::copy(batch.data().begin(), batch.data().begin() + 8 * 8 * 3,
            batch.data().begin() + 2 * 8 * 8 * 3);
  const auto p = predict(net, batch);
  ASSERT_EQ(p.size(), 3u);
  for (float v : p) {
    EXPECT_GT(v, 0.0f);
    EXPECT_LT(v, 1.0f);
  }
  EXPECT_EQ(p[0], p[2]);
  EXPECT_EQ(predict(net, batch), p);
  EXPECT_THROW(predict(net, TensorF({1, 16, 16, 3})), ShapeError);
}

TEST(Predict, HeadWithoutYsBranchStillRuns) {
  auto cfg = NetworkConfig::scaled({4, 8}, 8);
  cfg.flags = {true, false};
  const auto net = build_network<float>(cfg, 2);
  EXPECT_FALSE(net.head_conv.has_value());
  EXPECT_EQ(net.head_width(), net.blocks.back().y_channels());
  Rng rng(4);
  EXPECT_EQ(predict(net, random_tensor<float>({2, 8, 8, 3}, rng)).size(), 2u);
}

TEST(Summary, TableListsLayersAndTotal) {
  const auto net = build_network<float>(NetworkConfig::standard(), 0);
  const std::string table = summary_table(net);
  EXPECT_NE(table.find("block1.y"), std::string::npos);
  EXPECT_NE(table.find("(128, 128, 64)"), std::string::npos);
  EXPECT_NE(table.find("head.conv_ys"), std::string::npos);
  EXPECT_NE(table.find(std::to_string(kDefaultParamCount)), std::string::npos);
  std::size_t sum = 0;
  for (const auto& l : net.layers) sum += l.params;
  EXPECT_EQ(sum, count_params(net));
}
