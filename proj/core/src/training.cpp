#include "dfcnn/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dfcnn {

std::vector<FoldSpec> make_folds(std::size_t n_normal, std::size_t n_opacity,
                                 std::size_t k_folds) {
  if (n_normal == 0 || n_opacity == 0 || k_folds == 0) {
    throw Error("make_folds: counts and fold number must be positive");
  }
  if (k_folds > n_opacity) {
    throw Error("make_folds: " + std::to_string(k_folds) + " folds exceed " +
                std::to_string(n_opacity) + " opacity images");
  }
  const std::size_t slice = n_opacity / k_folds;
  std::vector<FoldSpec> folds;
  for (std::size_t k = 1; k <= k_folds; ++k) {
    FoldSpec fold;
    fold.index = static_cast<int>(k);
    fold.normal.resize(n_normal);
    std::iota(fold.normal.begin(), fold.normal.end(), std::size_t{0});
    const std::size_t begin = slice * (k - 1);
    const std::size_t end = k == k_folds ? n_opacity : slice * k;
    for (std::size_t i = begin; i < end; ++i) fold.opacity.push_back(i);
    folds.push_back(std::move(fold));
  }
  return folds;
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0)) throw Error("learning rate must be >= 0");
  if (batch_size < 1) throw Error("batch size must be >= 1");
  if (epochs < 0) throw Error("epochs must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw Error("Adam betas must lie in [0, 1)");
  }
  if (!(epsilon > 0.0)) throw Error("Adam epsilon must be positive");
}

template <typename T>
AdamState<T> AdamState<T>::zeros_like(const ParameterSet<T>& params) {
  AdamState state;
  for (const auto& p : params) {
    state.m.emplace_back(p.value.shape());
    state.v.emplace_back(p.value.shape());
  }
  return state;
}

template <typename T>
void adam_step(ParameterSet<T>& params, std::span<const Tensor<T>> grads, AdamState<T>& state,
               const TrainConfig& config) {
  if (grads.size() != params.size() || state.m.size() != params.size() ||
      state.v.size() != params.size()) {
    throw ShapeError("adam_step: parameter, gradient and moment counts differ");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const T b1 = static_cast<T>(config.beta1);
  const T b2 = static_cast<T>(config.beta2);
  const T correction1 = static_cast<T>(1.0 - std::pow(config.beta1, t));
  const T correction2 = static_cast<T>(1.0 - std::pow(config.beta2, t));
  const T lr = static_cast<T>(config.learning_rate);
  const T eps = static_cast<T>(config.epsilon);
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<T>& p = params[k].value;
    const Tensor<T>& g = grads[k];
    Tensor<T>& m = state.m[k];
    Tensor<T>& v = state.v[k];
    if (g.shape() != p.shape() || m.shape() != p.shape() || v.shape() != p.shape()) {
      throw ShapeError("adam_step: shape mismatch for " + params[k].name);
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = b1 * m[i] + (T{1} - b1) * g[i];
      v[i] = b2 * v[i] + (T{1} - b2) * g[i] * g[i];
      const T m_hat = m[i] / correction1;
      const T v_hat = v[i] / correction2;
      p[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

template <typename T>
T loss_and_gradients(const Network<T>& network, const Tensor<T>& batch,
                     const std::vector<T>& labels, std::vector<Tensor<T>>& grads) {
  Tape<T> tape;
  const std::vector<Var> bound = network.params.bind(tape);
  const Var probs = network.forward(tape, tape.leaf(batch), bound);
  const Var loss = tape.bce_loss(probs, labels);
  tape.backward(loss);
  grads.clear();
  for (Var v : bound) grads.push_back(tape.grad(v));
  return tape.value(loss)[0];
}

template <typename T>
std::vector<double> predict_dataset(const Network<T>& network, const Dataset& data,
                                    std::size_t batch_size) {
  std::vector<double> out;
  out.reserve(data.size());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    idx.clear();
    for (std::size_t i = start; i < std::min(data.size(), start + batch_size); ++i) idx.push_back(i);
    const Tensor<T> batch = data.batch(idx).template cast<T>();
    for (T p : predict(network, batch)) out.push_back(static_cast<double>(p));
  }
  return out;
}

template <typename T>
MetricsReport evaluate(const Network<T>& network, const Dataset& data,
                       std::size_t batch_size) {
  const std::vector<double> probs = predict_dataset(network, data, batch_size);
  std::vector<int> labels(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) labels[i] = data.label(i);
  return make_report(confusion(probs, labels, kDecisionThreshold), count_params(network));
}

namespace {

std::vector<std::size_t> fold_samples(const FoldSpec& fold, const Dataset& data) {
  const std::vector<std::size_t> normals = data.indices_of(kNormal);
  const std::vector<std::size_t> opacities = data.indices_of(kOpacity);
  std::vector<std::size_t> out;
  for (std::size_t i : fold.normal) {
    if (i >= normals.size()) throw Error("fold refers to missing normal image " + std::to_string(i));
    out.push_back(normals[i]);
  }
  for (std::size_t i : fold.opacity) {
    if (i >= opacities.size()) {
      throw Error("fold refers to missing opacity image " + std::to_string(i));
    }
    out.push_back(opacities[i]);
  }
  return out;
}

template <typename T>
std::vector<T> labels_of(const Dataset& data, std::span<const std::size_t> idx) {
  std::vector<T> labels;
  for (std::size_t i : idx) labels.push_back(static_cast<T>(data.label(i)));
  return labels;
}

}  // namespace

template <typename T>
TrainResult train(Network<T>& network, AdamState<T>& state, const FoldSpec& fold,
                  const Dataset& train_set, const Dataset& val_set, const TrainConfig& config,
                  const TrainHooks& hooks) {
  config.validate();
  std::vector<std::size_t> order = fold_samples(fold, train_set);
  if (order.empty()) throw Error("fold " + std::to_string(fold.index) + " is empty");
  if (train_set.image_size() != network.config.input_size ||
      (val_set.size() > 0 && val_set.image_size() != network.config.input_size)) {
    throw ShapeError("dataset image size does not match the network input size " +
                     std::to_string(network.config.input_size));
  }
  if (state.m.size() != network.params.size()) state = AdamState<T>::zeros_like(network.params);

  TrainResult result;
  const std::size_t batch = static_cast<std::size_t>(config.batch_size);
  std::vector<Tensor<T>> grads;

  if (hooks.record_initial_loss) {
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      const Tensor<T> x = train_set.batch(idx).template cast<T>();
      const std::vector<T> probs = predict(network, x);
      total += static_cast<double>(bce_loss<T>(probs, labels_of<T>(train_set, idx))) *
               static_cast<double>(idx.size());
    }
    result.initial_loss = total / static_cast<double>(order.size());
  }

  Rng rng(config.seed);
  const double params_millions = static_cast<double>(count_params(network)) / 1e6;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    if (config.shuffle) rng.shuffle(order.begin(), order.end());
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      std::span<const std::size_t> idx(order.data() + start, end - start);
      const Tensor<T> x = train_set.batch(idx).template cast<T>();
      const T loss = loss_and_gradients(network, x, labels_of<T>(train_set, idx), grads);
      total += static_cast<double>(loss) * static_cast<double>(idx.size());
      adam_step<T>(network.params, grads, state, config);
      ++result.steps;
    }
    TraceRow row;
    row.epoch = epoch;
    row.train_loss = total / static_cast<double>(order.size());
    if (val_set.size() > 0) {
      const MetricsReport report = evaluate(network, val_set);
      row.val_acc = report.metrics.acc;
      row.val_sen = report.metrics.sen;
      row.val_spe = report.metrics.spe;
      row.val_f1 = report.metrics.f1;
      if (row.val_acc) row.val_apt = apt(*row.val_acc, params_millions);
    }
    result.trace.push_back(row);
    if (hooks.on_epoch) hooks.on_epoch(row);
  }
  return result;
}

#define DFCNN_INSTANTIATE_TRAINING(T)                                                     \
  template struct AdamState<T>;                                                          \
  template void adam_step(ParameterSet<T>&, std::span<const Tensor<T>>, AdamState<T>&,   \
                          const TrainConfig&);                                           \
  template T loss_and_gradients(const Network<T>&, const Tensor<T>&,                    \
                                const std::vector<T>&, std::vector<Tensor<T>>&);         \
  template std::vector<double> predict_dataset(const Network<T>&, const Dataset&,        \
                                               std::size_t);                             \
  template MetricsReport evaluate(const Network<T>&, const Dataset&, std::size_t);       \
  template TrainResult train(Network<T>&, AdamState<T>&, const FoldSpec&, const Dataset&, \
                             const Dataset&, const TrainConfig&, const TrainHooks&);

DFCNN_INSTANTIATE_TRAINING(float)
DFCNN_INSTANTIATE_TRAINING(double)

#undef DFCNN_INSTANTIATE_TRAINING

}  // namespace dfcnn
