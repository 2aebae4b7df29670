#include "dfcnn/model.hpp"

#include <iomanip>
#include <sstream>

namespace dfcnn {

NetworkConfig NetworkConfig::scaled(const std::vector<int>& filters, int input_size) {
  NetworkConfig cfg;
  cfg.blocks.clear();
  for (int f : filters) cfg.blocks.push_back({f, 2});
  cfg.input_size = input_size;
  return cfg;
}

void NetworkConfig::validate() const {
  if (blocks.empty()) throw Error("network config needs at least one DF block");
  std::int64_t pool = 1;
  int previous = 0;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const BlockSetting& b = blocks[i];
    const std::string where = "block " + std::to_string(i + 1) + ": ";
    if (b.f <= 0 || b.f % 2 != 0) throw Error(where + "f must be even and positive");
    if (b.f < previous) throw Error(where + "filter counts must be non-decreasing");
    if (b.m < 1) throw Error(where + "m must be >= 1");
    previous = b.f;
    pool *= b.m;
  }
  if (input_size <= 0 || input_size % pool != 0) {
    throw Error("pool product " + std::to_string(pool) + " does not divide input size " +
                std::to_string(input_size));
  }
  if (input_channels <= 0) throw Error("input_channels must be positive");
  if (head_conv_kernel <= 0 || head_conv_kernel % 2 == 0) {
    throw Error("head_conv_kernel must be odd and positive");
  }
  if (dense_width <= 0) throw Error("dense_width must be positive");
}

bool NetworkConfig::is_full_architecture() const {
  return blocks.size() == 7 && blocks.front() == BlockSetting{32, 2};
}

template <typename T>
Network<T> build_network(const NetworkConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  Network<T> net;
  net.config = config;

  int x_channels = config.input_channels;
  int xs_channels = 0;
  std::int64_t spatial = config.input_size;
  for (std::size_t i = 0; i < config.blocks.size(); ++i) {
    const BlockSetting& b = config.blocks[i];
    const std::string name = "block" + std::to_string(i + 1);
    const std::size_t before = net.params.element_count();
    DFParams df = add_df_block(net.params, name, x_channels, xs_channels, b.f, b.m,
                               config.flags, rng);
    spatial /= b.m;
    net.layers.push_back({name + ".y", {1, spatial, spatial, df.y_channels()},
                          net.params.element_count() - before});
    net.layers.push_back({name + ".y_s", {1, spatial, spatial, df.ys_channels()}, 0});
    x_channels = df.y_channels();
    xs_channels = df.ys_channels();
    net.blocks.push_back(df);
  }

  int head_width = x_channels;
  net.layers.push_back({"head.pool_y", {1, 1, 1, x_channels}, 0});
  if (xs_channels > 0) {
    const std::size_t before = net.params.element_count();
    net.head_conv = add_conv(net.params, "head.conv_ys", config.head_conv_kernel, 1,
                             xs_channels, xs_channels, rng);
    net.layers.push_back({"head.conv_ys", {1, spatial, spatial, xs_channels},
                          net.params.element_count() - before});
    head_width += static_cast<int>(spatial * spatial * xs_channels);
  }
  net.layers.push_back({"head.concat", {1, 1, 1, head_width}, 0});

  auto add_dense = [&](const std::string& name, int in, int out) {
    Tensor<T> w({1, 1, in, out});
    glorot_uniform(w, in, out, rng);
    DenseLayer d;
    d.in = in;
    d.out = out;
    d.weight = net.params.add(name + ".weight", std::move(w));
    d.bias = net.params.add(name + ".bias", Tensor<T>(bias_shape(out)));
    net.layers.push_back({name, {1, 1, 1, out}, static_cast<std::size_t>(in) * out + out});
    return d;
  };
  net.hidden = add_dense("head.dense", head_width, config.dense_width);
  net.output = add_dense("head.out", config.dense_width, 1);
  return net;
}

template <typename T>
Var Network<T>::forward(Tape<T>& tape, Var input, std::span<const Var> bound) const {
  const Shape& s = tape.value(input).shape();
  if (s.h != config.input_size || s.w != config.input_size || s.c != config.input_channels) {
    throw ShapeError("network expects (n," + std::to_string(config.input_size) + "," +
                     std::to_string(config.input_size) + "," +
                     std::to_string(config.input_channels) + ") input, got " + s.str());
  }
  if (bound.size() != params.size()) throw Error("parameters are not bound to this tape");

  Var x = input;
  Var x_s = tape.leaf(Tensor<T>({s.n, s.h, s.w, 0}));
  for (const DFParams& block : blocks) {
    const DFOutputs out = df_block(tape, x, x_s, block, bound);
    x = out.y;
    x_s = out.y_s;
  }

  std::vector<Var> head{tape.global_avg_pool(x)};
  if (head_conv) head.push_back(tape.flatten(conv_relu(tape, x_s, *head_conv, bound)));
  Var h = head.size() == 1 ? head.front() : tape.concat_channels(head);
  h = tape.relu(tape.dense(h, bound[hidden.weight], bound[hidden.bias]));
  h = tape.dense(h, bound[output.weight], bound[output.bias]);
  return tape.sigmoid(h);
}

template <typename T>
std::vector<T> predict(const Network<T>& network, const Tensor<T>& batch) {
  Tape<T> tape;
  const std::vector<Var> bound = network.params.bind(tape);
  const Var probs = network.forward(tape, tape.leaf(batch), bound);
  return tape.value(probs).vec();
}

template <typename T>
std::string summary_table(const Network<T>& network) {
  std::ostringstream os;
  os << std::left << std::setw(18) << "layer" << std::setw(22) << "output shape"
     << std::right << std::setw(12) << "params" << '\n';
  os << std::string(52, '-') << '\n';
  for (const LayerInfo& layer : network.layers) {
    const Shape& o = layer.output;
    const std::string shape = "(" + std::to_string(o.h) + ", " + std::to_string(o.w) + ", " +
                              std::to_string(o.c) + ")";
    os << std::left << std::setw(18) << layer.name << std::setw(22) << shape << std::right
       << std::setw(12) << layer.params << '\n';
  }
  os << std::string(52, '-') << '\n';
  os << std::left << std::setw(40) << "total parameters" << std::right << std::setw(12)
     << count_params(network) << '\n';
  return os.str();
}

template class Network<float>;
template class Network<double>;
template Network<float> build_network(const NetworkConfig&, std::uint64_t);
template Network<double> build_network(const NetworkConfig&, std::uint64_t);
template std::vector<float> predict(const Network<float>&, const Tensor<float>&);
template std::vector<double> predict(const Network<double>&, const Tensor<double>&);
template std::string summary_table(const Network<float>&);
template std::string summary_table(const Network<double>&);

}  // namespace dfcnn
