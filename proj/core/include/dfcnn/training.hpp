#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "dfcnn/data_io.hpp"
#include "dfcnn/evaluation.hpp"
#include "dfcnn/model.hpp"

namespace dfcnn {

/// Training subset of the imbalance-aware k-fold scheme: every normal image
/// plus the k-th floor-division slice of the opacity images. Indices are
/// positions within each class's dataset order.
struct FoldSpec {
  int index = 1;  // 1-based
  std::vector<std::size_t> normal;
  std::vector<std::size_t> opacity;
};

/// Slice k covers [q*(k-1), q*k) with q = n_opacity / k_folds; the final fold
/// also takes the remainder.
std::vector<FoldSpec> make_folds(std::size_t n_normal, std::size_t n_opacity,
                                 std::size_t k_folds);

struct TrainConfig {
  double learning_rate = 1.5e-3;
  int batch_size = 2;
  int epochs = 30;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t seed = 0;
  bool shuffle = true;

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Adam first/second moments, one tensor per parameter, plus the step count.
template <typename T>
struct AdamState {
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
  std::uint64_t step = 0;

  static AdamState zeros_like(const ParameterSet<T>& params);
};

/// One bias-corrected Adam update; increments state.step first.
template <typename T>
void adam_step(ParameterSet<T>& params, std::span<const Tensor<T>> grads, AdamState<T>& state,
               const TrainConfig& config);

/// Forward + backward on one batch. Returns the batch loss and fills `grads`.
template <typename T>
T loss_and_gradients(const Network<T>& network, const Tensor<T>& batch,
                     const std::vector<T>& labels, std::vector<Tensor<T>>& grads);

template <typename T>
std::vector<double> predict_dataset(const Network<T>& network, const Dataset& data,
                                    std::size_t batch_size = 8);

template <typename T>
MetricsReport evaluate(const Network<T>& network, const Dataset& data,
                       std::size_t batch_size = 8);

struct TrainResult {
  std::vector<TraceRow> trace;
  std::uint64_t steps = 0;
  /// Mean training loss of the untouched network; set when requested.
  std::optional<double> initial_loss;
};

struct TrainHooks {
  std::function<void(const TraceRow&)> on_epoch;
  bool record_initial_loss = false;
};

/// Trains on the fold's samples of `train_set`, evaluating `val_set` after
/// every epoch. The last batch of an epoch may be short.
template <typename T>
TrainResult train(Network<T>& network, AdamState<T>& state, const FoldSpec& fold,
                  const Dataset& train_set, const Dataset& val_set, const TrainConfig& config,
                  const TrainHooks& hooks = {});

}  // namespace dfcnn
