#include "dfcnn/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace dfcnn {

double GradCheckReport::max_rel_error() const {
  double worst = 0.0;
  for (const auto& e : entries) worst = std::max(worst, e.max_rel_error);
  return worst;
}

std::size_t GradCheckReport::checked() const {
  std::size_t n = 0;
  for (const auto& e : entries) n += e.checked;
  return n;
}

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

namespace {

// Which side of every ReLU kink each unit sits on, plus every max-pool
// winner. A central difference is only a valid oracle when this pattern is
// the same at theta - h, theta and theta + h.
using ActivationPattern = std::vector<std::size_t>;

ActivationPattern activation_pattern(const Tape<double>& tape) {
  ActivationPattern pattern;
  for (std::size_t id = 0; id < tape.size(); ++id) {
    const Var v{id};
    const std::string& op = tape.op_name(v);
    if (op == "relu") {
      for (double x : tape.value(tape.inputs(v)[0]).data()) pattern.push_back(x > 0.0);
    } else if (op == "maxpool2d") {
      const TensorD& in = tape.value(tape.inputs(v)[0]);
      const int m = static_cast<int>(in.h() / tape.value(v).h());
      std::vector<std::size_t> argmax;
      maxpool2d(in, m, &argmax);
      pattern.insert(pattern.end(), argmax.begin(), argmax.end());
    }
  }
  return pattern;
}

struct Evaluation {
  double value = 0.0;
  ActivationPattern pattern;
};

Evaluation evaluate(const ScalarGraph& graph, const std::vector<TensorD>& leaves) {
  Tape<double> tape;
  std::vector<Var> vars;
  for (const auto& leaf : leaves) vars.push_back(tape.parameter(leaf));
  const Var out = graph(tape, vars);
  return {tape.value(out)[0], activation_pattern(tape)};
}

// Smallest step tried when a perturbation flips a kink.
constexpr double kMinStep = 1e-10;

}  // namespace

GradCheckReport grad_check(const ScalarGraph& graph, std::vector<TensorD> leaves,
                           const std::vector<std::string>& names, double step,
                           std::size_t stride) {
  if (names.size() != leaves.size()) throw Error("grad_check: one name per leaf required");
  stride = std::max<std::size_t>(stride, 1);

  std::vector<TensorD> analytic;
  ActivationPattern base;
  {
    Tape<double> tape;
    std::vector<Var> vars;
    for (const auto& leaf : leaves) vars.push_back(tape.parameter(leaf));
    const Var out = graph(tape, vars);
    tape.backward(out);
    for (Var v : vars) analytic.push_back(tape.grad(v));
    base = activation_pattern(tape);
  }

  GradCheckReport report;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    GradCheckEntry entry;
    entry.name = names[l];
    for (std::size_t i = 0; i < leaves[l].size(); i += stride) {
      const double saved = leaves[l][i];
      double h = step;
      double numeric = 0.0;
      for (;;) {
        leaves[l][i] = saved + h;
        const Evaluation plus = evaluate(graph, leaves);
        leaves[l][i] = saved - h;
        const Evaluation minus = evaluate(graph, leaves);
        leaves[l][i] = saved;
        numeric = (plus.value - minus.value) / (2.0 * h);
        const bool smooth = plus.pattern == base && minus.pattern == base;
        if (smooth || h / 10.0 < kMinStep) break;
        h /= 10.0;
        ++entry.refined;
      }
      entry.max_rel_error =
          std::max(entry.max_rel_error, relative_error(analytic[l][i], numeric));
      ++entry.checked;
    }
    report.entries.push_back(entry);
  }
  return report;
}

GradCheckReport grad_check(const Network<double>& network, const TensorD& input,
                           const std::vector<double>& labels, double step,
                           std::size_t stride) {
  std::vector<TensorD> leaves;
  std::vector<std::string> names;
  for (const auto& p : network.params) {
    leaves.push_back(p.value);
    names.push_back(p.name);
  }
  const ScalarGraph graph = [&](Tape<double>& tape, std::span<const Var> bound) {
    const Var probs = network.forward(tape, tape.leaf(input), bound);
    return tape.bce_loss(probs, labels);
  };
  return grad_check(graph, std::move(leaves), names, step, stride);
}

void randomize_biases(Network<double>& network, Rng& rng, double scale) {
  for (auto& p : network.params) {
    if (p.name.ends_with(".bias")) {
      for (double& v : p.value.data()) v = rng.uniform(-scale, scale);
    }
  }
}

}  // namespace dfcnn
