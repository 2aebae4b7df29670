#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "dfcnn/autodiff.hpp"
#include "dfcnn/tensor.hpp"

namespace dfcnn {

/// Seeded generator used for initialization, shuffling and synthetic data.
/// Values are derived from raw 64-bit draws so results are identical on every
/// standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  /// Standard normal via Box-Muller.
  double normal();

  template <typename It>
  void shuffle(It first, It last) {
    for (auto n = last - first; n > 1; --n) {
      auto j = static_cast<decltype(n)>(below(static_cast<std::uint64_t>(n)));
      std::swap(first[n - 1], first[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
};

/// Ordered, named collection of trainable tensors. Order is the declaration
/// order and is what checkpoints serialize.
template <typename T>
class ParameterSet {
 public:
  std::size_t add(std::string name, Tensor<T> value) {
    items_.push_back({std::move(name), std::move(value)});
    return items_.size() - 1;
  }

  [[nodiscard]] std::size_t size() const { return items_.size(); }
  [[nodiscard]] Parameter<T>& operator[](std::size_t i) { return items_[i]; }
  [[nodiscard]] const Parameter<T>& operator[](std::size_t i) const { return items_[i]; }
  [[nodiscard]] auto begin() const { return items_.begin(); }
  [[nodiscard]] auto end() const { return items_.end(); }
  [[nodiscard]] auto begin() { return items_.begin(); }
  [[nodiscard]] auto end() { return items_.end(); }

  [[nodiscard]] std::size_t element_count() const {
    std::size_t total = 0;
    for (const auto& p : items_) total += p.value.size();
    return total;
  }

  /// Records every parameter on the tape; the returned Vars are indexed like
  /// the set itself.
  [[nodiscard]] std::vector<Var> bind(Tape<T>& tape) const {
    std::vector<Var> vars;
    vars.reserve(items_.size());
    for (const auto& p : items_) vars.push_back(tape.parameter(p.value));
    return vars;
  }

  template <typename U>
  [[nodiscard]] ParameterSet<U> cast() const {
    ParameterSet<U> out;
    for (const auto& p : items_) out.add(p.name, p.value.template cast<U>());
    return out;
  }

 private:
  std::vector<Parameter<T>> items_;
};

/// Glorot-uniform fill: U(-b, b) with b = sqrt(6 / (fan_in + fan_out)).
template <typename T>
void glorot_uniform(Tensor<T>& t, std::int64_t fan_in, std::int64_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (T& v : t.data()) v = static_cast<T>(rng.uniform(-bound, bound));
}

}  // namespace dfcnn
