#pragma once

// Reverse-mode differentiation over a linear tape of recorded primitive ops.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dfcnn/ops.hpp"
#include "dfcnn/tensor.hpp"

namespace dfcnn {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

template <typename T>
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// A leaf owned by the tape (inputs, constants). Gradients are still
  /// accumulated for it, which is what the gradient checker relies on.
  Var leaf(Tensor<T> value) { return push(std::move(value), nullptr, {}, "leaf"); }

  /// A leaf referencing external storage. `value` must outlive the tape.
  Var parameter(const Tensor<T>& value) {
    Var v = push(Tensor<T>{}, nullptr, {}, "parameter");
    nodes_[v.id].external = &value;
    return v;
  }

  Var conv2d(Var x, Var weights, Var bias, int dilation) {
    Tensor<T> y = dfcnn::conv2d(value(x), value(weights), value(bias), dilation);
    return push(std::move(y),
                [x, weights, bias, dilation](Tape& t, const Tensor<T>& g) {
                  Tensor<T>& dx = t.grad_buffer(x);
                  Tensor<T>& dw = t.grad_buffer(weights);
                  Tensor<T>& db = t.grad_buffer(bias);
                  conv2d_backward(t.value(x), t.value(weights), dilation, g, &dx, &dw, &db);
                },
                {x, weights, bias}, "conv2d");
  }

  Var maxpool2d(Var x, int m) {
    auto argmax = std::make_shared<std::vector<std::size_t>>();
    Tensor<T> y = dfcnn::maxpool2d(value(x), m, argmax.get());
    return push(std::move(y),
                [x, argmax](Tape& t, const Tensor<T>& g) {
                  maxpool2d_backward(*argmax, g, t.grad_buffer(x));
                },
                {x}, "maxpool2d");
  }

  Var concat_channels(std::span<const Var> parts) {
    std::vector<const Tensor<T>*> values;
    for (Var p : parts) values.push_back(&value(p));
    Tensor<T> y = dfcnn::concat_channels<T>(values);
    std::vector<Var> inputs(parts.begin(), parts.end());
    return push(std::move(y),
                [inputs](Tape& t, const Tensor<T>& g) {
                  std::int64_t begin = 0;
                  for (Var p : inputs) {
                    const std::int64_t c = t.value(p).c();
                    if (c > 0) {
                      Tensor<T> part = slice_channels(g, begin, c);
                      Tensor<T>& buf = t.grad_buffer(p);
                      for (std::size_t i = 0; i < part.size(); ++i) buf[i] += part[i];
                    }
                    begin += c;
                  }
                },
                inputs, "concat");
  }

  Var concat_channels(std::initializer_list<Var> parts) {
    return concat_channels(std::span<const Var>(parts.begin(), parts.size()));
  }

  Var dense(Var x, Var weights, Var bias) {
    Tensor<T> y = dfcnn::dense(value(x), value(weights), value(bias));
    return push(std::move(y),
                [x, weights, bias](Tape& t, const Tensor<T>& g) {
                  dense_backward(t.value(x), t.value(weights), g, &t.grad_buffer(x),
                                 &t.grad_buffer(weights), &t.grad_buffer(bias));
                },
                {x, weights, bias}, "dense");
  }

  Var flatten(Var x) {
    return push(dfcnn::flatten(value(x)),
                [x](Tape& t, const Tensor<T>& g) {
                  Tensor<T>& buf = t.grad_buffer(x);
                  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
                },
                {x}, "flatten");
  }

  Var global_avg_pool(Var x) {
    return push(dfcnn::global_avg_pool(value(x)),
                [x](Tape& t, const Tensor<T>& g) {
                  Tensor<T>& buf = t.grad_buffer(x);
                  const Shape& s = buf.shape();
                  const T scale = T{1} / static_cast<T>(s.h * s.w);
                  for (std::int64_t b = 0; b < s.n; ++b)
                    for (std::int64_t i = 0; i < s.h; ++i)
                      for (std::int64_t j = 0; j < s.w; ++j)
                        for (std::int64_t c = 0; c < s.c; ++c)
                          buf(b, i, j, c) += g(b, 0, 0, c) * scale;
                },
                {x}, "global_avg_pool");
  }

  Var relu(Var x) {
    return push(dfcnn::relu(value(x)),
                [x](Tape& t, const Tensor<T>& g) {
                  const Tensor<T>& in = t.value(x);
                  Tensor<T>& buf = t.grad_buffer(x);
                  for (std::size_t i = 0; i < g.size(); ++i)
                    if (in[i] > T{0}) buf[i] += g[i];
                },
                {x}, "relu");
  }

  Var sigmoid(Var x) {
    Var y = push(dfcnn::sigmoid(value(x)), nullptr, {x}, "sigmoid");
    nodes_[y.id].backward = [x, y](Tape& t, const Tensor<T>& g) {
      const Tensor<T>& s = t.value(y);
      Tensor<T>& buf = t.grad_buffer(x);
      for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i] * s[i] * (T{1} - s[i]);
    };
    return y;
  }

  /// Scalar sum of every element.
  Var sum(Var x) {
    T total{};
    for (T v : value(x).data()) total += v;
    return push(Tensor<T>({1, 1, 1, 1}, total),
                [x](Tape& t, const Tensor<T>& g) {
                  Tensor<T>& buf = t.grad_buffer(x);
                  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[0];
                },
                {x}, "sum");
  }

  /// Mean binary cross-entropy between the elements of `probabilities` and
  /// `labels` (one label per element).
  Var bce_loss(Var probabilities, std::vector<T> labels) {
    const T loss = dfcnn::bce_loss<T>(value(probabilities).data(), labels);
    return push(Tensor<T>({1, 1, 1, 1}, loss),
                [probabilities, labels = std::move(labels)](Tape& t, const Tensor<T>& g) {
                  std::vector<T> d = bce_loss_grad<T>(t.value(probabilities).data(), labels);
                  Tensor<T>& buf = t.grad_buffer(probabilities);
                  for (std::size_t i = 0; i < d.size(); ++i) buf[i] += g[0] * d[i];
                },
                {probabilities}, "bce_loss");
  }

  [[nodiscard]] const Tensor<T>& value(Var v) const {
    const Node& node = nodes_.at(v.id);
    return node.external ? *node.external : node.value;
  }

  /// Gradient of the last backward() target with respect to `v`; all zeros
  /// when `v` does not influence it.
  [[nodiscard]] Tensor<T> grad(Var v) const {
    const Node& node = nodes_.at(v.id);
    if (node.has_grad) return node.grad;
    return Tensor<T>(value(v).shape());
  }

  /// Propagates d(loss)/d(node) to every node recorded before `loss`.
  void backward(Var loss) {
    if (value(loss).size() != 1) {
      throw ShapeError("backward needs a scalar loss, got " + value(loss).shape().str());
    }
    for (Node& node : nodes_) {
      node.has_grad = false;
      node.grad = Tensor<T>{};
    }
    grad_buffer(loss)[0] = T{1};
    visits_ = 0;
    for (std::size_t id = loss.id + 1; id-- > 0;) {
      ++visits_;
      Node& node = nodes_[id];
      if (!node.has_grad || !node.backward) continue;
      node.backward(*this, node.grad);
    }
  }

  [[nodiscard]] std::size_t size() const { return nodes_.size(); }
  [[nodiscard]] const std::string& op_name(Var v) const { return nodes_.at(v.id).op; }
  [[nodiscard]] std::span<const Var> inputs(Var v) const { return nodes_.at(v.id).inputs; }
  /// Nodes visited by the most recent backward().
  [[nodiscard]] std::size_t last_backward_visits() const { return visits_; }

 private:
  using BackwardFn = std::function<void(Tape&, const Tensor<T>&)>;

  struct Node {
    Tensor<T> value;
    const Tensor<T>* external = nullptr;
    Tensor<T> grad;
    bool has_grad = false;
    BackwardFn backward;
    std::vector<Var> inputs;
    std::string op;
  };

  Var push(Tensor<T> value, BackwardFn backward, std::vector<Var> inputs, std::string op) {
    for (Var in : inputs) {
      if (in.id >= nodes_.size()) throw Error("tape: input refers to an unrecorded value");
    }
    nodes_.push_back(Node{std::move(value), nullptr, Tensor<T>{}, false, std::move(backward),
                          std::move(inputs), std::move(op)});
    return Var{nodes_.size() - 1};
  }

  Tensor<T>& grad_buffer(Var v) {
    Node& node = nodes_[v.id];
    if (!node.has_grad) {
      node.grad = Tensor<T>(value(v).shape());
      node.has_grad = true;
    }
    return node.grad;
  }

  std::vector<Node> nodes_;
  std::size_t visits_ = 0;
};

}  // namespace dfcnn
