#include "dfcnn/config_io.hpp"

#include <set>
#include <string>

namespace dfcnn {

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& known,
                    const std::string& what) {
  if (!j.is_object()) throw Error(what + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw Error("unknown " + what + " key '" + key + "'");
  }
}

template <typename V>
void read(const nlohmann::json& j, const char* key, V& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<V>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("config key '") + key + "': " + e.what());
  }
}

}  // namespace

nlohmann::json to_json(const NetworkConfig& config) {
  nlohmann::json blocks = nlohmann::json::array();
  for (const BlockSetting& b : config.blocks) blocks.push_back({{"f", b.f}, {"m", b.m}});
  return {{"blocks", blocks},
          {"use_p2", config.flags.use_p2},
          {"use_p3", config.flags.use_p3},
          {"input_size", config.input_size},
          {"input_channels", config.input_channels},
          {"head_conv_kernel", config.head_conv_kernel},
          {"dense_width", config.dense_width}};
}

nlohmann::json to_json(const TrainConfig& config) {
  return {{"learning_rate", config.learning_rate},
          {"batch_size", config.batch_size},
          {"epochs", config.epochs},
          {"beta1", config.beta1},
          {"beta2", config.beta2},
          {"epsilon", config.epsilon},
          {"seed", config.seed},
          {"shuffle", config.shuffle}};
}

void update_from_json(NetworkConfig& config, const nlohmann::json& j) {
  reject_unknown(j,
                 {"blocks", "use_p2", "use_p3", "input_size", "input_channels",
                  "head_conv_kernel", "dense_width"},
                 "network");
  if (j.contains("blocks")) {
    const auto& blocks = j.at("blocks");
    if (!blocks.is_array()) throw Error("network.blocks must be an array");
    config.blocks.clear();
    for (const auto& b : blocks) {
      reject_unknown(b, {"f", "m"}, "block");
      BlockSetting s;
      read(b, "f", s.f);
      read(b, "m", s.m);
      config.blocks.push_back(s);
    }
  }
  read(j, "use_p2", config.flags.use_p2);
  read(j, "use_p3", config.flags.use_p3);
  read(j, "input_size", config.input_size);
  read(j, "input_channels", config.input_channels);
  read(j, "head_conv_kernel", config.head_conv_kernel);
  read(j, "dense_width", config.dense_width);
}

void update_from_json(TrainConfig& config, const nlohmann::json& j) {
  reject_unknown(j,
                 {"learning_rate", "batch_size", "epochs", "beta1", "beta2", "epsilon", "seed",
                  "shuffle"},
                 "train");
  read(j, "learning_rate", config.learning_rate);
  read(j, "batch_size", config.batch_size);
  read(j, "epochs", config.epochs);
  read(j, "beta1", config.beta1);
  read(j, "beta2", config.beta2);
  read(j, "epsilon", config.epsilon);
  read(j, "seed", config.seed);
  read(j, "shuffle", config.shuffle);
}

}  // namespace dfcnn
