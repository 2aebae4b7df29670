#include "dfcnn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace dfcnn {

Shape conv_weight_shape(int kernel, int in_channels, int out_channels) {
  return {kernel, kernel, in_channels, out_channels};
}

Shape bias_shape(int channels) { return {1, 1, 1, channels}; }

template <typename T>
ConvSpec<T> ConvSpec<T>::make(int kernel, int dilation, int in_channels, int out_channels) {
  ConvSpec spec;
  spec.kernel = kernel;
  spec.dilation = dilation;
  spec.in_channels = in_channels;
  spec.out_channels = out_channels;
  spec.validate_geometry();
  spec.weights = Tensor<T>(conv_weight_shape(kernel, in_channels, out_channels));
  spec.bias = Tensor<T>(bias_shape(out_channels));
  return spec;
}

namespace {

void check_geometry(int kernel, int dilation) {
  if (kernel <= 0 || kernel % 2 == 0) {
    throw ShapeError("convolution kernel must be odd and positive, got " +
                     std::to_string(kernel));
  }
  if (dilation <= 0) {
    throw ShapeError("convolution dilation must be positive, got " +
                     std::to_string(dilation));
  }
}

}  // namespace

template <typename T>
void ConvSpec<T>::validate_geometry() const {
  check_geometry(kernel, dilation);
  if (in_channels < 0 || out_channels <= 0) {
    throw ShapeError("convolution channel counts must be in>=0, out>0");
  }
}

template <typename T>
void ConvSpec<T>::validate() const {
  validate_geometry();
  if (weights.shape() != conv_weight_shape(kernel, in_channels, out_channels)) {
    throw ShapeError("conv weights have shape " + weights.shape().str());
  }
  if (bias.shape() != bias_shape(out_channels)) {
    throw ShapeError("conv bias has shape " + bias.shape().str());
  }
}

template <typename T>
int check_conv_params(const Shape& x, const Tensor<T>& weights, const Tensor<T>& bias,
                      int dilation) {
  const Shape& ws = weights.shape();
  if (ws.n != ws.h) throw ShapeError("conv weights must be square, got " + ws.str());
  check_geometry(static_cast<int>(ws.n), dilation);
  if (ws.w != x.c) {
    throw ShapeError("conv expects " + std::to_string(ws.w) + " input channels, got " +
                     std::to_string(x.c));
  }
  if (bias.shape() != bias_shape(static_cast<int>(ws.c))) {
    throw ShapeError("conv bias has shape " + bias.shape().str() + ", expected " +
                     bias_shape(static_cast<int>(ws.c)).str());
  }
  return static_cast<int>(ws.n);
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias,
                 int dilation) {
  const int k = check_conv_params(x.shape(), weights, bias, dilation);
  const std::int64_t cin = x.c();
  const std::int64_t cout = weights.c();
  const std::int64_t half = k / 2;
  Tensor<T> y({x.n(), x.h(), x.w(), cout});
  const T* xd = x.data().data();
  const T* wd = weights.data().data();
  const T* bd = bias.data().data();
  T* yd = y.data().data();
  // Sums run in double so float outputs are within rounding of the exact value.
  std::vector<double> acc(static_cast<std::size_t>(cout));

  for (std::int64_t b = 0; b < x.n(); ++b) {
    for (std::int64_t i = 0; i < x.h(); ++i) {
      for (std::int64_t j = 0; j < x.w(); ++j) {
        std::copy(bd, bd + cout, acc.begin());
        for (std::int64_t u = 0; u < k; ++u) {
          const std::int64_t ii = i + (u - half) * dilation;
          if (ii < 0 || ii >= x.h()) continue;
          for (std::int64_t v = 0; v < k; ++v) {
            const std::int64_t jj = j + (v - half) * dilation;
            if (jj < 0 || jj >= x.w()) continue;
            const T* xp = xd + x.offset(b, ii, jj, 0);
            const T* wp = wd + ((u * k + v) * cin) * cout;
            for (std::int64_t c = 0; c < cin; ++c) {
              const double xv = xp[c];
              const T* wr = wp + c * cout;
              for (std::int64_t o = 0; o < cout; ++o) acc[o] += wr[o] * xv;
            }
          }
        }
        std::copy(acc.begin(), acc.end(), yd + y.offset(b, i, j, 0));
      }
    }
  }
  return y;
}

template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& weights, int dilation,
                     const Tensor<T>& dy, Tensor<T>* dx, Tensor<T>* dweights,
                     Tensor<T>* dbias) {
  const int k = static_cast<int>(weights.n());
  const std::int64_t cin = x.c();
  const std::int64_t cout = weights.c();
  const std::int64_t half = k / 2;
  if (dy.shape() != Shape{x.n(), x.h(), x.w(), cout}) {
    throw ShapeError("conv2d_backward: dy has shape " + dy.shape().str());
  }
  const T* xd = x.data().data();
  const T* wd = weights.data().data();
  const T* dyd = dy.data().data();
  T* dxd = dx ? dx->data().data() : nullptr;
  T* dwd = dweights ? dweights->data().data() : nullptr;
  T* dbd = dbias ? dbias->data().data() : nullptr;

  for (std::int64_t b = 0; b < x.n(); ++b) {
    for (std::int64_t i = 0; i < x.h(); ++i) {
      for (std::int64_t j = 0; j < x.w(); ++j) {
        const T* g = dyd + dy.offset(b, i, j, 0);
        if (dbd) {
          for (std::int64_t o = 0; o < cout; ++o) dbd[o] += g[o];
        }
        for (std::int64_t u = 0; u < k; ++u) {
          const std::int64_t ii = i + (u - half) * dilation;
          if (ii < 0 || ii >= x.h()) continue;
          for (std::int64_t v = 0; v < k; ++v) {
            const std::int64_t jj = j + (v - half) * dilation;
            if (jj < 0 || jj >= x.w()) continue;
            const std::size_t xoff = x.offset(b, ii, jj, 0);
            const std::size_t woff = static_cast<std::size_t>(((u * k + v) * cin) * cout);
            for (std::int64_t c = 0; c < cin; ++c) {
              const T* wr = wd + woff + c * cout;
              if (dxd) {
                T acc{};
                for (std::int64_t o = 0; o < cout; ++o) acc += wr[o] * g[o];
                dxd[xoff + c] += acc;
              }
              if (dwd) {
                const T xv = xd[xoff + c];
                T* dwr = dwd + woff + c * cout;
                for (std::int64_t o = 0; o < cout; ++o) dwr[o] += xv * g[o];
              }
            }
          }
        }
      }
    }
  }
}

template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& x, int m, std::vector<std::size_t>* argmax) {
  if (m <= 0) throw ShapeError("maxpool size must be positive");
  if (x.h() % m != 0 || x.w() % m != 0) {
    throw ShapeError("maxpool size " + std::to_string(m) + " does not divide " +
                     x.shape().str());
  }
  Tensor<T> y({x.n(), x.h() / m, x.w() / m, x.c()});
  if (argmax) argmax->assign(y.size(), 0);
  for (std::int64_t b = 0; b < y.n(); ++b) {
    for (std::int64_t i = 0; i < y.h(); ++i) {
      for (std::int64_t j = 0; j < y.w(); ++j) {
        for (std::int64_t c = 0; c < y.c(); ++c) {
          std::size_t best = x.offset(b, i * m, j * m, c);
          for (std::int64_t u = 0; u < m; ++u) {
            for (std::int64_t v = 0; v < m; ++v) {
              const std::size_t off = x.offset(b, i * m + u, j * m + v, c);
              if (x[off] > x[best]) best = off;
            }
          }
          const std::size_t out = y.offset(b, i, j, c);
          y[out] = x[best];
          if (argmax) (*argmax)[out] = best;
        }
      }
    }
  }
  return y;
}

template <typename T>
void maxpool2d_backward(const std::vector<std::size_t>& argmax, const Tensor<T>& dy,
                        Tensor<T>& dx) {
  if (argmax.size() != dy.size()) throw ShapeError("maxpool2d_backward: argmax size");
  for (std::size_t i = 0; i < argmax.size(); ++i) dx[argmax[i]] += dy[i];
}

template <typename T>
Tensor<T> concat_channels(std::span<const Tensor<T>* const> parts) {
  if (parts.empty()) throw ShapeError("concat_channels needs at least one part");
  const Shape& first = parts.front()->shape();
  std::int64_t channels = 0;
  for (const Tensor<T>* p : parts) {
    const Shape& s = p->shape();
    if (s.n != first.n || s.h != first.h || s.w != first.w) {
      throw ShapeError("concat_channels: " + s.str() + " does not match " + first.str());
    }
    channels += s.c;
  }
  Tensor<T> y({first.n, first.h, first.w, channels});
  const std::int64_t pixels = first.n * first.h * first.w;
  T* out = y.data().data();
  for (std::int64_t p = 0; p < pixels; ++p) {
    for (const Tensor<T>* part : parts) {
      const std::int64_t c = part->c();
      const T* src = part->data().data() + p * c;
      out = std::copy(src, src + c, out);
    }
  }
  return y;
}

template <typename T>
Tensor<T> slice_channels(const Tensor<T>& x, std::int64_t begin, std::int64_t count) {
  if (begin < 0 || count < 0 || begin + count > x.c()) {
    throw ShapeError("slice_channels: [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " + x.shape().str());
  }
  Tensor<T> y({x.n(), x.h(), x.w(), count});
  const std::int64_t pixels = x.n() * x.h() * x.w();
  for (std::int64_t p = 0; p < pixels; ++p) {
    const T* src = x.data().data() + p * x.c() + begin;
    std::copy(src, src + count, y.data().data() + p * count);
  }
  return y;
}

namespace {

template <typename T>
void check_dense(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias) {
  if (x.h() != 1 || x.w() != 1) {
    throw ShapeError("dense expects a flattened (n,1,1,k) input, got " + x.shape().str());
  }
  if (weights.n() != 1 || weights.h() != 1 || weights.w() != x.c()) {
    throw ShapeError("dense: input width " + std::to_string(x.c()) +
                     " does not match weights " + weights.shape().str());
  }
  if (bias.shape() != bias_shape(static_cast<int>(weights.c()))) {
    throw ShapeError("dense: bias has shape " + bias.shape().str());
  }
}

}  // namespace

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias) {
  check_dense(x, weights, bias);
  const std::int64_t in = x.c();
  const std::int64_t out = weights.c();
  Tensor<T> y({x.n(), 1, 1, out});
  for (std::int64_t b = 0; b < x.n(); ++b) {
    T* yr = y.data().data() + b * out;
    std::copy(bias.data().begin(), bias.data().end(), yr);
    const T* xr = x.data().data() + b * in;
    for (std::int64_t r = 0; r < in; ++r) {
      const T xv = xr[r];
      const T* wr = weights.data().data() + r * out;
      for (std::int64_t o = 0; o < out; ++o) yr[o] += xv * wr[o];
    }
  }
  return y;
}

template <typename T>
void dense_backward(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& dy,
                    Tensor<T>* dx, Tensor<T>* dweights, Tensor<T>* dbias) {
  const std::int64_t in = x.c();
  const std::int64_t out = weights.c();
  for (std::int64_t b = 0; b < x.n(); ++b) {
    const T* g = dy.data().data() + b * out;
    const T* xr = x.data().data() + b * in;
    if (dbias) {
      for (std::int64_t o = 0; o < out; ++o) (*dbias)[o] += g[o];
    }
    for (std::int64_t r = 0; r < in; ++r) {
      const T* wr = weights.data().data() + r * out;
      if (dx) {
        T acc{};
        for (std::int64_t o = 0; o < out; ++o) acc += wr[o] * g[o];
        (*dx)[b * in + r] += acc;
      }
      if (dweights) {
        T* dwr = dweights->data().data() + r * out;
        for (std::int64_t o = 0; o < out; ++o) dwr[o] += xr[r] * g[o];
      }
    }
  }
}

template <typename T>
Tensor<T> global_avg_pool(const Tensor<T>& x) {
  Tensor<T> y({x.n(), 1, 1, x.c()});
  const std::int64_t area = x.h() * x.w();
  for (std::int64_t b = 0; b < x.n(); ++b) {
    for (std::int64_t p = 0; p < area; ++p) {
      const T* src = x.data().data() + (b * area + p) * x.c();
      for (std::int64_t c = 0; c < x.c(); ++c) y(b, 0, 0, c) += src[c];
    }
    if (area > 0) {
      for (std::int64_t c = 0; c < x.c(); ++c) y(b, 0, 0, c) /= static_cast<T>(area);
    }
  }
  return y;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
  return y;
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    // Split on sign so exp never overflows.
    if (x[i] >= T{0}) {
      y[i] = T{1} / (T{1} + std::exp(-x[i]));
    } else {
      const T e = std::exp(x[i]);
      y[i] = e / (T{1} + e);
    }
  }
  return y;
}

namespace {

template <typename T>
void check_labels(std::span<const T> probabilities, std::span<const T> labels) {
  if (probabilities.size() != labels.size()) {
    throw ShapeError("bce_loss: " + std::to_string(probabilities.size()) +
                     " probabilities for " + std::to_string(labels.size()) + " labels");
  }
  if (probabilities.empty()) throw ShapeError("bce_loss: empty batch");
  for (T t : labels) {
    if (t != T{0} && t != T{1}) throw Error("bce_loss: labels must be 0 or 1");
  }
}

}  // namespace

template <typename T>
T bce_loss(std::span<const T> probabilities, std::span<const T> labels) {
  check_labels(probabilities, labels);
  const T eps = static_cast<T>(kBceClamp);
  T total{};
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const T p = std::clamp(probabilities[i], eps, T{1} - eps);
    total -= labels[i] == T{1} ? std::log(p) : std::log(T{1} - p);
  }
  return total / static_cast<T>(labels.size());
}

template <typename T>
std::vector<T> bce_loss_grad(std::span<const T> probabilities, std::span<const T> labels) {
  check_labels(probabilities, labels);
  const T eps = static_cast<T>(kBceClamp);
  const T scale = T{1} / static_cast<T>(labels.size());
  std::vector<T> grad(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const T p = probabilities[i];
    if (p < eps || p > T{1} - eps) continue;
    grad[i] = labels[i] == T{1} ? -scale / p : scale / (T{1} - p);
  }
  return grad;
}

#define DFCNN_INSTANTIATE_OPS(T)                                                        \
  template struct ConvSpec<T>;                                                          \
  template int check_conv_params(const Shape&, const Tensor<T>&, const Tensor<T>&, int); \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int);  \
  template void conv2d_backward(const Tensor<T>&, const Tensor<T>&, int,                \
                                const Tensor<T>&, Tensor<T>*, Tensor<T>*, Tensor<T>*);   \
  template Tensor<T> maxpool2d(const Tensor<T>&, int, std::vector<std::size_t>*);       \
  template void maxpool2d_backward(const std::vector<std::size_t>&, const Tensor<T>&,   \
                                   Tensor<T>&);                                         \
  template Tensor<T> concat_channels(std::span<const Tensor<T>* const>);                \
  template Tensor<T> slice_channels(const Tensor<T>&, std::int64_t, std::int64_t);      \
  template Tensor<T> dense(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);        \
  template void dense_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,    \
                               Tensor<T>*, Tensor<T>*, Tensor<T>*);                     \
  template Tensor<T> global_avg_pool(const Tensor<T>&);                                 \
  template Tensor<T> relu(const Tensor<T>&);                                            \
  template Tensor<T> sigmoid(const Tensor<T>&);                                         \
  template T bce_loss(std::span<const T>, std::span<const T>);                          \
  template std::vector<T> bce_loss_grad(std::span<const T>, std::span<const T>);

DFCNN_INSTANTIATE_OPS(float)
DFCNN_INSTANTIATE_OPS(double)

#undef DFCNN_INSTANTIATE_OPS

}  // namespace dfcnn
