#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dfcnn/autodiff.hpp"
#include "dfcnn/blocks.hpp"
#include "dfcnn/params.hpp"

namespace dfcnn {

struct BlockSetting {
  int f = 32;
  int m = 2;
  friend bool operator==(const BlockSetting&, const BlockSetting&) = default;
};

struct NetworkConfig {
  std::vector<BlockSetting> blocks = {{32, 2}, {48, 2}, {64, 2}, {96, 2},
                                      {128, 2}, {128, 2}, {128, 2}};
  PathwayFlags flags;
  int input_size = 256;
  int input_channels = 3;
  int head_conv_kernel = 3;
  int dense_width = 64;

  /// Seven blocks, f = (32, 48, 64, 96, 128, 128, 128), m = 2, 256x256x3 input.
  static NetworkConfig standard() { return {}; }
  /// m = 2 blocks with the given filter counts over a square input.
  static NetworkConfig scaled(const std::vector<int>& filters, int input_size);

  /// Throws Error unless blocks are non-empty, f even and non-decreasing,
  /// m >= 1 and the product of all m divides input_size.
  void validate() const;
  /// True for the full seven-block layout whose first block is (32, 2).
  [[nodiscard]] bool is_full_architecture() const;

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

struct DenseLayer {
  std::size_t weight = 0;
  std::size_t bias = 0;
  int in = 0;
  int out = 0;
};

/// One row of the architecture summary.
struct LayerInfo {
  std::string name;
  Shape output;
  std::size_t params = 0;
};

template <typename T>
class Network {
 public:
  NetworkConfig config;
  ParameterSet<T> params;
  std::vector<DFParams> blocks;
  std::optional<ConvLayer> head_conv;
  DenseLayer hidden;
  DenseLayer output;
  std::vector<LayerInfo> layers;

  /// Width of concat(global_avg_pool(y), flatten(conv(y_s))).
  [[nodiscard]] int head_width() const { return hidden.in; }

  /// Records the forward pass on `tape` and returns the (n, 1, 1, 1) sigmoid
  /// probabilities. `bound` must come from params.bind(tape).
  Var forward(Tape<T>& tape, Var input, std::span<const Var> bound) const;

  template <typename U>
  [[nodiscard]] Network<U> cast() const {
    Network<U> out;
    out.config = config;
    out.params = params.template cast<U>();
    out.blocks = blocks;
    out.head_conv = head_conv;
    out.hidden = hidden;
    out.output = output;
    out.layers = layers;
    return out;
  }
};

/// Builds the network with deterministic Glorot-uniform weights and zero biases.
template <typename T>
Network<T> build_network(const NetworkConfig& config, std::uint64_t seed);

template <typename T>
std::size_t count_params(const Network<T>& network) {
  return network.params.element_count();
}

/// Probability of opacity per batch item. Batch must be (n, S, S, C) with S
/// and C from the config.
template <typename T>
std::vector<T> predict(const Network<T>& network, const Tensor<T>& batch);

/// Plain-text table of layer name, output shape and parameter count.
template <typename T>
std::string summary_table(const Network<T>& network);

inline constexpr double kDecisionThreshold = 0.5;

}  // namespace dfcnn
