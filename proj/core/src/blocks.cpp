#include "dfcnn/blocks.hpp"

#include <vector>

namespace dfcnn {

int df_y_channels(int f, PathwayFlags flags) {
  return f + (flags.use_p2 ? f / 2 : 0) + (flags.use_p3 ? f / 2 : 0);
}

int df_ys_channels(int f, PathwayFlags flags) { return flags.use_p3 ? f / 2 : 0; }

int DFParams::xc1_channels() const { return xs_channels + f + (flags.use_p2 ? f / 2 : 0); }
int DFParams::y_channels() const { return df_y_channels(f, flags); }
int DFParams::ys_channels() const { return df_ys_channels(f, flags); }

template <typename T>
ConvLayer add_conv(ParameterSet<T>& params, const std::string& name, int kernel, int dilation,
                   int in_channels, int out_channels, Rng& rng) {
  ConvSpec<T> spec = ConvSpec<T>::make(kernel, dilation, in_channels, out_channels);
  glorot_uniform(spec.weights, std::int64_t{kernel} * kernel * in_channels,
                 std::int64_t{kernel} * kernel * out_channels, rng);
  ConvLayer layer;
  layer.kernel = kernel;
  layer.dilation = dilation;
  layer.in_channels = in_channels;
  layer.out_channels = out_channels;
  layer.weight = params.add(name + ".weight", std::move(spec.weights));
  layer.bias = params.add(name + ".bias", std::move(spec.bias));
  return layer;
}

template <typename T>
ProConvParams add_pro_conv(ParameterSet<T>& params, const std::string& prefix,
                           int in_channels, int f, PathwayFlags flags, Rng& rng) {
  if (f <= 0 || f % 2 != 0) {
    throw ShapeError("Pro_Conv filter count must be even and positive, got " +
                     std::to_string(f));
  }
  ProConvParams pc;
  pc.f = f;
  pc.in_channels = in_channels;
  pc.chain[0] = add_conv(params, prefix + ".p1_conv1", 3, 1, in_channels, f, rng);
  pc.chain[1] = add_conv(params, prefix + ".p1_conv2", 3, 1, f, f, rng);
  pc.chain[2] = add_conv(params, prefix + ".p1_conv3", 3, 1, f, f, rng);
  if (flags.use_p2) pc.pointwise = add_conv(params, prefix + ".p2_conv", 1, 1, in_channels, f / 2, rng);
  if (flags.use_p3) pc.dilated = add_conv(params, prefix + ".p3_conv", 5, 2, in_channels, f / 2, rng);
  return pc;
}

template <typename T>
DFParams add_df_block(ParameterSet<T>& params, const std::string& prefix, int x_channels,
                      int xs_channels, int f, int m, PathwayFlags flags, Rng& rng) {
  if (m < 1) throw ShapeError("maxpool kernel m must be >= 1");
  DFParams df;
  df.f = f;
  df.m = m;
  df.x_channels = x_channels;
  df.xs_channels = xs_channels;
  df.flags = flags;
  df.first = add_pro_conv(params, prefix + ".pc1", x_channels, f, flags, rng);
  df.second = add_pro_conv(params, prefix + ".pc2", df.xc1_channels(), f, flags, rng);
  return df;
}

template <typename T>
Var conv_relu(Tape<T>& tape, Var input, const ConvLayer& layer, std::span<const Var> bound) {
  return tape.relu(tape.conv2d(input, bound[layer.weight], bound[layer.bias], layer.dilation));
}

template <typename T>
ProConvOutputs pro_conv(Tape<T>& tape, Var input, const ProConvParams& params,
                        std::span<const Var> bound, PathwayFlags flags) {
  if (tape.value(input).c() != params.in_channels) {
    throw ShapeError("Pro_Conv expects " + std::to_string(params.in_channels) +
                     " input channels, got " + std::to_string(tape.value(input).c()));
  }
  ProConvOutputs out;
  Var h = input;
  for (const ConvLayer& layer : params.chain) h = conv_relu(tape, h, layer, bound);
  out.p1 = h;
  if (flags.use_p2) {
    if (!params.pointwise) throw Error("Pro_Conv was built without its p2 pathway");
    out.p2 = conv_relu(tape, input, *params.pointwise, bound);
  }
  if (flags.use_p3) {
    if (!params.dilated) throw Error("Pro_Conv was built without its p3 pathway");
    out.p3 = conv_relu(tape, input, *params.dilated, bound);
  }
  return out;
}

template <typename T>
DFOutputs df_block_ablated(Tape<T>& tape, Var x, Var x_s, const DFParams& params,
                           std::span<const Var> bound, bool use_p2, bool use_p3) {
  const Shape& xs = tape.value(x).shape();
  const Shape& ss = tape.value(x_s).shape();
  if (xs.n != ss.n || xs.h != ss.h || xs.w != ss.w) {
    throw ShapeError("DF block: x " + xs.str() + " and x_s " + ss.str() +
                     " differ spatially");
  }
  if (xs.h % params.m != 0 || xs.w % params.m != 0) {
    throw ShapeError("DF block: maxpool " + std::to_string(params.m) + " does not divide " +
                     xs.str());
  }
  const PathwayFlags flags{use_p2, use_p3};
  if (flags != params.flags) {
    // Dropping a pathway changes the channel count of x_c1 and therefore the
    // shape of Pro_Conv2's weights.
    throw Error("DF block was built with different pathway flags");
  }
  const ProConvOutputs first = pro_conv(tape, x, params.first, bound, flags);

  std::vector<Var> c1{x_s, first.p1};
  if (first.p2) c1.push_back(*first.p2);
  const Var xc1 = tape.concat_channels(c1);

  const ProConvOutputs second = pro_conv(tape, xc1, params.second, bound, flags);

  std::vector<Var> c2;
  if (first.p3) c2.push_back(*first.p3);
  c2.push_back(second.p1);
  if (second.p2) c2.push_back(*second.p2);
  const Var xc2 = tape.concat_channels(c2);

  DFOutputs out;
  out.y = tape.maxpool2d(xc2, params.m);
  if (second.p3) {
    out.y_s = tape.maxpool2d(*second.p3, params.m);
  } else {
    const Shape& ys = tape.value(out.y).shape();
    out.y_s = tape.leaf(Tensor<T>({ys.n, ys.h, ys.w, 0}));
  }
  return out;
}

template <typename T>
DFOutputs df_block(Tape<T>& tape, Var x, Var x_s, const DFParams& params,
                   std::span<const Var> bound) {
  return df_block_ablated(tape, x, x_s, params, bound, params.flags.use_p2,
                          params.flags.use_p3);
}

#define DFCNN_INSTANTIATE_BLOCKS(T)                                                       \
  template ConvLayer add_conv(ParameterSet<T>&, const std::string&, int, int, int, int,   \
                              Rng&);                                                     \
  template ProConvParams add_pro_conv(ParameterSet<T>&, const std::string&, int, int,      \
                                      PathwayFlags, Rng&);                                \
  template DFParams add_df_block(ParameterSet<T>&, const std::string&, int, int, int, int, \
                                 PathwayFlags, Rng&);                                     \
  template Var conv_relu(Tape<T>&, Var, const ConvLayer&, std::span<const Var>);          \
  template ProConvOutputs pro_conv(Tape<T>&, Var, const ProConvParams&,                   \
                                   std::span<const Var>, PathwayFlags);                  \
  template DFOutputs df_block(Tape<T>&, Var, Var, const DFParams&, std::span<const Var>); \
  template DFOutputs df_block_ablated(Tape<T>&, Var, Var, const DFParams&,                \
                                      std::span<const Var>, bool, bool);

DFCNN_INSTANTIATE_BLOCKS(float)
DFCNN_INSTANTIATE_BLOCKS(double)

#undef DFCNN_INSTANTIATE_BLOCKS

}  // namespace dfcnn
