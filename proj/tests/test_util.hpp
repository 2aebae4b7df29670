#pragma once

#include <cstdint>

#include "dfcnn/params.hpp"
#include "dfcnn/tensor.hpp"

namespace dfcnn::testutil {

template <typename T>
Tensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<T> t(shape);
  for (T& v : t.data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    worst = d < 0 ? (-d > worst ? -d : worst) : (d > worst ? d : worst);
  }
  return worst;
}

}  // namespace dfcnn::testutil
