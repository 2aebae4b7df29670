#include "dfcnn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dfcnn/config_io.hpp"

namespace dfcnn {

namespace {

constexpr const char* kMagic = "DFCNN-CHECKPOINT";

void append_block(std::string& out, const TensorF& t) {
  for (float v : t.data()) {
    const auto bits = std::bit_cast<std::uint32_t>(v);
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
  }
}

void read_block(const std::string& bytes, std::size_t& pos, TensorF& t) {
  const std::size_t need = t.size() * 4;
  if (bytes.size() - pos < need) throw CheckpointError("checkpoint is truncated");
  for (float& v : t.data()) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) {
      bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos++])) << (8 * b);
    }
    v = std::bit_cast<float>(bits);
  }
}

nlohmann::json shape_json(const Shape& s) { return {s.n, s.h, s.w, s.c}; }

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ck) {
  const ParameterSet<float>& params = ck.network.params;
  AdamState<float> adam = ck.adam;
  if (adam.m.empty()) adam = AdamState<float>::zeros_like(params);
  if (adam.m.size() != params.size() || adam.v.size() != params.size()) {
    throw CheckpointError("Adam state does not match the network parameters");
  }

  nlohmann::json tensors = nlohmann::json::array();
  const char* groups[] = {"param", "adam_m", "adam_v"};
  for (const char* group : groups) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      tensors.push_back({{"name", params[i].name},
                         {"group", group},
                         {"shape", shape_json(params[i].value.shape())}});
    }
  }
  nlohmann::json header = {{"format_version", kCheckpointVersion},
                           {"dtype", "float32-le"},
                           {"network", to_json(ck.network.config)},
                           {"train", to_json(ck.train)},
                           {"fold", ck.fold},
                           {"step", adam.step},
                           {"tensors", tensors}};
  const std::string text = header.dump();

  std::string out = std::string(kMagic) + "\n" + std::to_string(text.size()) + "\n" + text;
  for (const auto& p : params) append_block(out, p.value);
  for (const auto& t : adam.m) append_block(out, t);
  for (const auto& t : adam.v) append_block(out, t);
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  const std::string magic = std::string(kMagic) + "\n";
  if (bytes.compare(0, magic.size(), magic) != 0) {
    throw CheckpointError("not a checkpoint file (bad magic)");
  }
  std::size_t pos = magic.size();
  const std::size_t eol = bytes.find('\n', pos);
  if (eol == std::string::npos) throw CheckpointError("checkpoint is truncated");
  std::size_t header_len = 0;
  try {
    header_len = std::stoull(bytes.substr(pos, eol - pos));
  } catch (const std::exception&) {
    throw CheckpointError("checkpoint header length is corrupt");
  }
  pos = eol + 1;
  if (bytes.size() - pos < header_len) throw CheckpointError("checkpoint is truncated");

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(pos, header_len));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint header is corrupt: ") + e.what());
  }
  pos += header_len;

  Checkpoint ck;
  try {
    if (header.at("format_version").get<int>() != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version " +
                            header.at("format_version").dump());
    }
    if (header.at("dtype").get<std::string>() != "float32-le") {
      throw CheckpointError("unsupported checkpoint dtype");
    }
    NetworkConfig config;
    update_from_json(config, header.at("network"));
    update_from_json(ck.train, header.at("train"));
    ck.fold = header.at("fold").get<int>();
    ck.network = build_network<float>(config, 0);
    ck.adam = AdamState<float>::zeros_like(ck.network.params);
    ck.adam.step = header.at("step").get<std::uint64_t>();

    const auto& tensors = header.at("tensors");
    const std::size_t n = ck.network.params.size();
    if (!tensors.is_array() || tensors.size() != 3 * n) {
      throw CheckpointError("checkpoint tensor list does not match its network config");
    }
    const char* groups[] = {"param", "adam_m", "adam_v"};
    for (std::size_t g = 0; g < 3; ++g) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto& entry = tensors[g * n + i];
        const auto& p = ck.network.params[i];
        const auto shape = entry.at("shape").get<std::vector<std::int64_t>>();
        if (entry.at("name").get<std::string>() != p.name ||
            entry.at("group").get<std::string>() != groups[g] ||
            shape != std::vector<std::int64_t>{p.value.n(), p.value.h(), p.value.w(),
                                               p.value.c()}) {
          throw CheckpointError("checkpoint tensor " + std::to_string(g * n + i) +
                                " does not match layer " + p.name);
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("checkpoint header is corrupt: ") + e.what());
  } catch (const CheckpointError&) {
    throw;
  } catch (const Error& e) {
    throw CheckpointError(std::string("checkpoint config is invalid: ") + e.what());
  }

  for (auto& p : ck.network.params) read_block(bytes, pos, p.value);
  for (auto& t : ck.adam.m) read_block(bytes, pos, t);
  for (auto& t : ck.adam.v) read_block(bytes, pos, t);
  if (pos != bytes.size()) throw CheckpointError("checkpoint has trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const std::string bytes = serialize_checkpoint(checkpoint);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint(ss.str());
}

}  // namespace dfcnn
