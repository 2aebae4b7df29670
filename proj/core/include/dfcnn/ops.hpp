#pragma once

// Forward and adjoint kernels for the primitive operations. Every function is a
// pure function of its arguments; the tape in autodiff.hpp wires them together.

#include <cstdint>
#include <span>
#include <vector>

#include "dfcnn/tensor.hpp"

namespace dfcnn {

/// A 2-D convolution layer: weights (k, k, in, out), bias (1, 1, 1, out),
/// dilation N, zero "same" padding of (k-1)*N/2 on every side.
template <typename T>
struct ConvSpec {
  int kernel = 1;
  int dilation = 1;
  int in_channels = 0;
  int out_channels = 0;
  Tensor<T> weights;
  Tensor<T> bias;

  /// Zero-initialized spec with correctly shaped weights and bias.
  static ConvSpec make(int kernel, int dilation, int in_channels, int out_channels);

  /// Throws ShapeError unless the spec satisfies its invariants.
  void validate() const;

  [[nodiscard]] int receptive_extent() const { return (kernel - 1) * dilation + 1; }

 private:
  void validate_geometry() const;
};

[[nodiscard]] Shape conv_weight_shape(int kernel, int in_channels, int out_channels);
[[nodiscard]] Shape bias_shape(int channels);

/// Checks the weight/bias pair and returns the kernel size.
template <typename T>
int check_conv_params(const Shape& x, const Tensor<T>& weights, const Tensor<T>& bias,
                      int dilation);

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias,
                 int dilation);

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const ConvSpec<T>& spec) {
  spec.validate();
  return conv2d(x, spec.weights, spec.bias, spec.dilation);
}

/// Accumulates d(loss)/d(x), d(loss)/d(weights), d(loss)/d(bias) given dy.
/// Any of the output pointers may be null.
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& weights, int dilation,
                     const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dweights,
                     Tensor<T>* dbias);

/// Non-overlapping m x m max pooling with stride m. `argmax`, when given,
/// receives the flat input offset of every output element.
template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& x, int m, std::vector<std::size_t>* argmax = nullptr);

template <typename T>
void maxpool2d_backward(const std::vector<std::size_t>& argmax, const Tensor<T>& dy,
                        Tensor<T>& dx);

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> parts);

/// Channels [begin, begin + count) of x.
template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::int64_t begin, std::int64_t count);

/// out = x . W + b where x is (n, 1, 1, in), W is (1, 1, in, out), b is (1, 1, 1, out).
template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias);

template <typename T>
void dense_backward(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& dy,
                    Tensor<T>* dx, Tensor<T>* dweights, Tensor<T>* dbias);

/// (n, h, w, c) -> (n, 1, 1, h*w*c) in storage order.
template <typename T>
Tensor<T> flatten(const Tensor<T>& x) {
  return x.reshaped({x.n(), 1, 1, x.h() * x.w() * x.c()});
}

/// Mean over the spatial axes: (n, h, w, c) -> (n, 1, 1, c).
template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x);

template <typename T>
Tensor<T> relu(const Tensor<T>& x);

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x);

inline constexpr double kBceClamp = 1e-7;

/// Mean binary cross-entropy with probabilities clamped to [eps, 1 - eps].
/// Labels must be exactly 0 or 1.
template <typename T>
T bce_loss(std::span<const T> probabilities, std::span<const T> labels);

/// d(mean BCE)/dp for each probability, zero where the clamp is active.
template <typename T>
std::vector<T> bce_loss_grad(std::span<const T> probabilities, std::span<const T> labels);

}  // namespace dfcnn
