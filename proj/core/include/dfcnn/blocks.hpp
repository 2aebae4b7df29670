#pragma once

// Process-convolution and dual-feedback units as graph builders over a Tape.

#include <array>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include "dfcnn/autodiff.hpp"
#include "dfcnn/params.hpp"

namespace dfcnn {

/// A convolution whose weight and bias live in a ParameterSet.
struct ConvLayer {
  std::size_t weight = 0;
  std::size_t bias = 0;
  int kernel = 1;
  int dilation = 1;
  int in_channels = 0;
  int out_channels = 0;

  [[nodiscard]] std::size_t param_count() const {
    return static_cast<std::size_t>(kernel) * kernel * in_channels * out_channels +
           static_cast<std::size_t>(out_channels);
  }
};

/// Which auxiliary pathways a dual-feedback block carries. The p1 chain is
/// always present.
struct PathwayFlags {
  bool use_p2 = true;
  bool use_p3 = true;
  friend bool operator==(const PathwayFlags&, const PathwayFlags&) = default;
};

/// p1: three 3x3 convs (f each), p2: 1x1 conv (f/2), p3: 5x5 dilation-2 conv (f/2).
struct ProConvParams {
  int f = 0;
  int in_channels = 0;
  std::array<ConvLayer, 3> chain{};
  std::optional<ConvLayer> pointwise;
  std::optional<ConvLayer> dilated;
};

struct DFParams {
  int f = 0;
  int m = 1;
  int x_channels = 0;
  int xs_channels = 0;
  PathwayFlags flags;
  ProConvParams first;
  ProConvParams second;

  /// Channels of x_c1 = concat(x_s, p1_1, p2_1).
  [[nodiscard]] int xc1_channels() const;
  [[nodiscard]] int y_channels() const;
  [[nodiscard]] int ys_channels() const;
};

/// Output channel laws of a dual-feedback block with filter count f.
[[nodiscard]] int df_y_channels(int f, PathwayFlags flags);
[[nodiscard]] int df_ys_channels(int f, PathwayFlags flags);

template <typename T>
ConvLayer add_conv(ParameterSet<T>& params, const std::string& name, int kernel, int dilation,
                   int in_channels, int out_channels, Rng& rng);

template <typename T>
ProConvParams add_pro_conv(ParameterSet<T>& params, const std::string& prefix,
                           int in_channels, int f, PathwayFlags flags, Rng& rng);

template <typename T>
DFParams add_df_block(ParameterSet<T>& params, const std::string& prefix, int x_channels,
                      int xs_channels, int f, int m, PathwayFlags flags, Rng& rng);

/// conv + ReLU using parameters bound on the tape.
template <typename T>
Var conv_relu(Tape<T>& tape, Var input, const ConvLayer& layer, std::span<const Var> bound);

struct ProConvOutputs {
  Var p1;
  std::optional<Var> p2;
  std::optional<Var> p3;
};

template <typename T>
ProConvOutputs pro_conv(Tape<T>& tape, Var input, const ProConvParams& params,
                        std::span<const Var> bound, PathwayFlags flags = {});

struct DFOutputs {
  Var y;
  Var y_s;
};

template <typename T>
DFOutputs df_block(Tape<T>& tape, Var x, Var x_s, const DFParams& params,
                   std::span<const Var> bound);

/// df_block with explicit pathway flags. Dropping p2 changes Pro_Conv2's
/// input width, so the flags must match those the block was built with
/// (add_df_block); a mismatch throws.
template <typename T>
DFOutputs df_block_ablated(Tape<T>& tape, Var x, Var x_s, const DFParams& params,
                           std::span<const Var> bound, bool use_p2, bool use_p3);

}  // namespace dfcnn
