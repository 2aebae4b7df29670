#include <gtest/gtest.h>

#include "dfcnn/blocks.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace dfcnn;
using dfcnn::testutil::max_abs_diff;
using dfcnn::testutil::random_tensor;

namespace {

template <typename T>
struct BlockFixture {
  ParameterSet<T> params;
  Rng rng{42};
};

}  // namespace

TEST(ProConv, OutputShapes) {
  BlockFixture<float> fx;
  const auto pc = add_pro_conv(fx.params, "pc", 3, 32, {}, fx.rng);
  Tape<float> tape;
  const auto bound = fx.params.bind(tape);
  const Var x = tape.leaf(random_tensor<float>({1, 8, 8, 3}, fx.rng));
  const auto out = pro_conv(tape, x, pc, bound);
  EXPECT_EQ(tape.value(out.p1).shape(), (Shape{1, 8, 8, 32}));
  EXPECT_EQ(tape.value(*out.p2).shape(), (Shape{1, 8, 8, 16}));
  EXPECT_EQ(tape.value(*out.p3).shape(), (Shape{1, 8, 8, 16}));
}

TEST(ProConv, ZeroInputZeroBiasGivesZeros) {
  BlockFixture<float> fx;
  const auto pc = add_pro_conv(fx.params, "pc", 3, 8, {}, fx.rng);
  Tape<float> tape;
  const auto bound = fx.params.bind(tape);
  const auto out = pro_conv(tape, tape.leaf(TensorF({1, 6, 6, 3})), pc, bound);
  for (Var v : {out.p1, *out.p2, *out.p3}) {
    for (float value : tape.value(v).data()) EXPECT_EQ(value, 0.0f);
  }
}

TEST(ProConv, MatchesOracleComposition) {
  BlockFixture<double> fx;
  const auto pc = add_pro_conv(fx.params, "pc", 2, 4, {}, fx.rng);
  for (auto& p : fx.params) p.value = random_tensor<double>(p.value.shape(), fx.rng, -0.5, 0.5);
  const auto x = random_tensor<double>({1, 4, 4, 2}, fx.rng);

  Tape<double> tape;
  const auto bound = fx.params.bind(tape);
  const auto out = pro_conv(tape, tape.leaf(x), pc, bound);

  auto layer = [&](const TensorD& in, const ConvLayer& l) {
    return oracle::relu(oracle::direct_conv(in, fx.params[l.weight].value,
                                            fx.params[l.bias].value, l.dilation));
  };
  const auto p1 = layer(layer(layer(x, pc.chain[0]), pc.chain[1]), pc.chain[2]);
  EXPECT_LT(max_abs_diff(tape.value(out.p1), p1), 1e-6);
  EXPECT_LT(max_abs_diff(tape.value(*out.p2), layer(x, *pc.pointwise)), 1e-6);
  EXPECT_LT(max_abs_diff(tape.value(*out.p3), layer(x, *pc.dilated)), 1e-6);
  EXPECT_EQ(pc.dilated->kernel, 5);
  EXPECT_EQ(pc.dilated->dilation, 2);
  EXPECT_EQ(pc.pointwise->kernel, 1);
}

TEST(ProConv, RejectsOddFilterCountAndChannelMismatch) {
  BlockFixture<float> fx;
  EXPECT_THROW(add_pro_conv(fx.params, "pc", 3, 7, {}, fx.rng), ShapeError);
  const auto pc = add_pro_conv(fx.params, "pc", 3, 4, {}, fx.rng);
  Tape<float> tape;
  const auto bound = fx.params.bind(tape);
  EXPECT_THROW(pro_conv(tape, tape.leaf(TensorF({1, 4, 4, 2})), pc, bound), ShapeError);
}

TEST(DFBlock, ChannelLawOnExample) {
  BlockFixture<float> fx;
  const auto df = add_df_block(fx.params, "b", 6, 2, 32, 2, {}, fx.rng);
  Tape<float> tape;
  const auto bound = fx.params.bind(tape);
  const Var x = tape.leaf(random_tensor<float>({1, 16, 16, 6}, fx.rng));
  const Var xs = tape.leaf(random_tensor<float>({1, 16, 16, 2}, fx.rng));
  const auto out = df_block(tape, x, xs, df, bound);
  EXPECT_EQ(tape.value(out.y).shape(), (Shape{1, 8, 8, 64}));
  EXPECT_EQ(tape.value(out.y_s).shape(), (Shape{1, 8, 8, 16}));
}

TEST(DFBlock, FirstBlockOnFullResolutionImage) {
  BlockFixture<float> fx;
  const auto df = add_df_block(fx.params, "b", 3, 0, 32, 2, {}, fx.rng);
  Tape<float> tape;
  const auto bound = fx.params.bind(tape);
  const Var x = tape.leaf(random_tensor<float>({1, 256, 256, 3}, fx.rng, 0.0, 1.0));
  const Var xs = tape.leaf(TensorF({1, 256, 256, 0}));
  const auto out = df_block(tape, x, xs, df, bound);
  EXPECT_EQ(tape.value(out.y).shape(), (Shape{1, 128, 128, 64}));
  EXPECT_EQ(tape.value(out.y_s).shape(), (Shape{1, 128, 128, 16}));
}

TEST(DFBlock, ZeroWeightsWithUnitPoolGiveZeros) {
  BlockFixture<float> fx;
  const auto df = add_df_block(fx.params, "b", 3, 2, 4, 1, {}, fx.rng);
  for (auto& p : fx.params) p.value.fill(0.0f);
  Tape<float> tape;
  const auto bound = fx.params.bind(tape);
  const auto out = df_block(tape, tape.leaf(random_tensor<float>({1, 5, 5, 3}, fx.rng)),
                            tape.leaf(random_tensor<float>({1, 5, 5, 2}, fx.rng)), df, bound);
  EXPECT_EQ(tape.value(out.y), TensorF({1, 5, 5, 8}));
  EXPECT_EQ(tape.value(out.y_s), TensorF({1, 5, 5, 2}));
}

TEST(DFBlock, AblationChannelLaws) {
  struct Expect {
    PathwayFlags flags;
    int y;
    int ys;
  };
  for (const auto& e : {Expect{{false, true}, 48, 16}, Expect{{true, false}, 48, 0},
                        Expect{{false, false}, 32, 0}, Expect{{true, true}, 64, 16}}) {
    BlockFixture<float> fx;
    const auto df = add_df_block(fx.params, "b", 3, 0, 32, 2, e.flags, fx.rng);
    Tape<float> tape;
    const auto bound = fx.params.bind(tape);
    const auto out = df_block_ablated(tape, tape.leaf(random_tensor<float>({1, 8, 8, 3}, fx.rng)),
                                      tape.leaf(TensorF({1, 8, 8, 0})), df, bound,
                                      e.flags.use_p2, e.flags.use_p3);
    EXPECT_EQ(tape.value(out.y).c(), e.y);
    EXPECT_EQ(tape.value(out.y_s).c(), e.ys);
    EXPECT_EQ(tape.value(out.y_s).h(), 4);
  }
}

TEST(DFBlock, ChannelLawsPropertyOverFilterCounts) {
  for (int f : {2, 4, 8, 16, 32}) {
    for (bool p2 : {false, true}) {
      for (bool p3 : {false, true}) {
        const PathwayFlags flags{p2, p3};
        BlockFixture<float> fx;
        const auto df = add_df_block(fx.params, "b", 5, p3 ? 3 : 0, f, 2, flags, fx.rng);
        Tape<float> tape;
        const auto bound = fx.params.bind(tape);
        const auto out = df_block(tape, tape.leaf(random_tensor<float>({1, 4, 4, 5}, fx.rng)),
                                  tape.leaf(random_tensor<float>({1, 4, 4, p3 ? 3 : 0}, fx.rng)),
                                  df, bound);
        const int expect_y = f + (p2 ? f / 2 : 0) + (p3 ? f / 2 : 0);
        EXPECT_EQ(tape.value(out.y).shape(), (Shape{1, 2, 2, expect_y}));
        EXPECT_EQ(tape.value(out.y_s).shape(), (Shape{1, 2, 2, p3 ? f / 2 : 0}));
        EXPECT_EQ(df.y_channels(), expect_y);
      }
    }
  }
}

TEST(DFBlock, BothPathwaysOffOnZeroInputIsPureBiasPropagation) {
  BlockFixture<double> fx;
  const auto df = add_df_block(fx.params, "b", 2, 0, 4, 2, {false, false}, fx.rng);
  Tape<double> tape;
  const auto bound = fx.params.bind(tape);
  for (auto& p : fx.params) {
    if (p.name.ends_with(".bias")) p.value.fill(0.1);
  }
  const auto out = df_block(tape, tape.leaf(TensorD({1, 4, 4, 2})),
                            tape.leaf(TensorD({1, 4, 4, 0})), df, bound);
  // Zero input: every conv output at pixel (i, j) is bias plus the weights
  // applied to the constant field of the previous layer, clipped by padding.
  // Recompute the same chain with the oracle.
  auto layer = [&](const TensorD& in, const ConvLayer& l) {
    return oracle::relu(oracle::direct_conv(in, fx.params[l.weight].value,
                                            fx.params[l.bias].value, l.dilation));
  };
  TensorD h({1, 4, 4, 2});
  for (const auto& l : df.first.chain) h = layer(h, l);
  for (const auto& l : df.second.chain) h = layer(h, l);
  EXPECT_LT(max_abs_diff(tape.value(out.y), maxpool2d(h, 2)), 1e-12);
  EXPECT_EQ(tape.value(out.y_s).c(), 0);
  // Pinned first value of the first conv: ReLU(bias) = 0.1.
  TensorD first = layer(TensorD({1, 4, 4, 2}), df.first.chain[0]);
  EXPECT_DOUBLE_EQ(first[0], 0.1);
}

TEST(DFBlock, SpatialMismatchAndDivisibilityErrors) {
  BlockFixture<float> fx;
  const auto df = add_df_block(fx.params, "b", 3, 0, 4, 2, {}, fx.rng);
  Tape<float> tape;
  const auto bound = fx.params.bind(tape);
  EXPECT_THROW(df_block(tape, tape.leaf(TensorF({1, 4, 4, 3})), tape.leaf(TensorF({1, 2, 2, 0})),
                        df, bound),
               ShapeError);
  EXPECT_THROW(df_block(tape, tape.leaf(TensorF({1, 5, 5, 3})), tape.leaf(TensorF({1, 5, 5, 0})),
                        df, bound),
               ShapeError);
  EXPECT_THROW(df_block_ablated(tape, tape.leaf(TensorF({1, 4, 4, 3})),
                                tape.leaf(TensorF({1, 4, 4, 0})), df, bound, false, true),
               Error);
}

TEST(DFBlock, EveryConvParameterReceivesGradient) {
  BlockFixture<double> fx;
  const auto df = add_df_block(fx.params, "b", 3, 2, 4, 2, {}, fx.rng);
  Tape<double> tape;
  const auto bound = fx.params.bind(tape);
  const auto out = df_block(tape, tape.leaf(random_tensor<double>({2, 6, 6, 3}, fx.rng)),
                            tape.leaf(random_tensor<double>({2, 6, 6, 2}, fx.rng, 0.0, 1.0)),
                            df, bound);
  const Var loss = tape.sum(tape.concat_channels({out.y, out.y_s}));
  tape.backward(loss);
  for (std::size_t i = 0; i < fx.params.size(); ++i) {
    const TensorD g = tape.grad(bound[i]);
    bool nonzero = false;
    for (double v : g.data()) nonzero |= v != 0.0;
    EXPECT_TRUE(nonzero) << fx.params[i].name;
  }
}
