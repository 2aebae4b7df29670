#pragma once

// Central finite-difference verification of reverse-mode gradients (64-bit).

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dfcnn/autodiff.hpp"
#include "dfcnn/model.hpp"

namespace dfcnn {

struct GradCheckEntry {
  std::string name;
  std::size_t checked = 0;
  /// Step reductions forced by a perturbation crossing a ReLU or pooling kink.
  std::size_t refined = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;

  [[nodiscard]] double max_rel_error() const;
  [[nodiscard]] std::size_t checked() const;
};

inline constexpr double kNetworkStep = 1e-3;

/// |ad - fd| / max(|ad|, |fd|, 1e-8)
[[nodiscard]] double relative_error(double analytic, double numeric);

/// Builds a scalar from leaves recorded on a fresh tape.
using ScalarGraph = std::function<Var(Tape<double>&, std::span<const Var>)>;

/// Compares tape gradients of `graph` with central differences of step `step`
/// for every scalar in `leaves` (every `stride`-th scalar when stride > 1).
/// When a perturbation changes any ReLU side or max-pool winner, the step for
/// that scalar is divided by 10 until the activation pattern holds.
GradCheckReport grad_check(const ScalarGraph& graph, std::vector<TensorD> leaves,
                           const std::vector<std::string>& names, double step = 1e-5,
                           std::size_t stride = 1);

/// Checks d(BCE(predict(input), labels))/d(theta) for every network parameter.
/// Many network gradients are ~1e-8, so the default step is large enough to
/// keep round-off well below them; kink crossings still fall back to smaller
/// steps.
GradCheckReport grad_check(const Network<double>& network, const TensorD& input,
                           const std::vector<double>& labels, double step = kNetworkStep,
                           std::size_t stride = 1);

/// Zero-initialised biases leave units exactly on the ReLU kink (for example
/// inside zero padding), where central differences are one-sided. Checks
/// should run at a generic point instead.
void randomize_biases(Network<double>& network, Rng& rng, double scale = 0.1);

}  // namespace dfcnn
