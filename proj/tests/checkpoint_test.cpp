#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "dfcnn/checkpoint.hpp"
#include "dfcnn/synth.hpp"
#include "test_util.hpp"

using namespace dfcnn;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("dfcnn_ckpt_test_" + name);
}

std::string read_all(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Checkpoint make_checkpoint() {
  Checkpoint ck;
  auto cfg = NetworkConfig::scaled({2, 4}, 8);
  ck.network = build_network<float>(cfg, 7);
  ck.adam = AdamState<float>::zeros_like(ck.network.params);
  ck.train.seed = 3;
  ck.train.learning_rate = 1.5e-3;
  ck.fold = 2;
  return ck;
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitExact) {
  const auto path = temp_file("roundtrip");
  Checkpoint ck = make_checkpoint();
  ck.adam.m[0][0] = 0.125f;
  ck.adam.v[1][0] = 3e-9f;
  ck.adam.step = 17;
  save_checkpoint(path, ck);
  const Checkpoint loaded = load_checkpoint(path);

  EXPECT_EQ(count_params(loaded.network), count_params(ck.network));
  EXPECT_EQ(loaded.network.config, ck.network.config);
  EXPECT_EQ(loaded.train, ck.train);
  EXPECT_EQ(loaded.fold, 2);
  EXPECT_EQ(loaded.adam.step, 17u);
  for (std::size_t i = 0; i < ck.network.params.size(); ++i) {
    EXPECT_EQ(loaded.network.params[i].value, ck.network.params[i].value);
    EXPECT_EQ(loaded.adam.m[i], ck.adam.m[i]);
    EXPECT_EQ(loaded.adam.v[i], ck.adam.v[i]);
  }

  const auto path2 = temp_file("roundtrip2");
  save_checkpoint(path2, loaded);
  EXPECT_EQ(read_all(path), read_all(path2));

  Rng rng(1);
  const auto batch = testutil::random_tensor<float>({3, 8, 8, 3}, rng, 0.0, 1.0);
  EXPECT_EQ(predict(ck.network, batch), predict(loaded.network, batch));
  std::filesystem::remove(path);
  std::filesystem::remove(path2);
}

TEST(Checkpoint, HeaderIsStructuredText) {
  const std::string bytes = serialize_checkpoint(make_checkpoint());
  EXPECT_EQ(bytes.rfind("DFCNN-CHECKPOINT\n", 0), 0u);
  EXPECT_NE(bytes.find("\"format_version\":1"), std::string::npos);
  EXPECT_NE(bytes.find("\"dtype\":\"float32-le\""), std::string::npos);
  EXPECT_NE(bytes.find("block1.pc1.p1_conv1.weight"), std::string::npos);
}

TEST(Checkpoint, TruncatedAndCorruptFilesAreRejected) {
  const std::string bytes = serialize_checkpoint(make_checkpoint());
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, bytes.size() - 5)), CheckpointError);
  EXPECT_THROW(deserialize_checkpoint(bytes.substr(0, 40)), CheckpointError);
  EXPECT_THROW(deserialize_checkpoint("garbage"), CheckpointError);
  EXPECT_THROW(deserialize_checkpoint(bytes + "x"), CheckpointError);

  std::string wrong_version = bytes;
  const auto pos = wrong_version.find("\"format_version\":1");
  wrong_version.replace(pos, 18, "\"format_version\":9");
  EXPECT_THROW(deserialize_checkpoint(wrong_version), CheckpointError);

  const auto path = temp_file("truncated");
  {
    std::ofstream out(path, std::ios::binary);
    out << bytes.substr(0, bytes.size() / 2);
  }
  EXPECT_THROW(load_checkpoint(path), CheckpointError);
  std::filesystem::remove(path);
  EXPECT_THROW(load_checkpoint(temp_file("missing")), CheckpointError);
}

TEST(Checkpoint, TrainingProgressChangesTheFile) {
  Checkpoint ck = make_checkpoint();
  const std::string before = serialize_checkpoint(ck);
  SynthOptions o;
  o.per_class = 1;
  o.size = 8;
  const Dataset data = Dataset::from_images(synth_generate(o));
  TrainConfig cfg;
  cfg.epochs = 1;
  train(ck.network, ck.adam, make_folds(1, 1, 1).front(), data, Dataset{}, cfg);
  EXPECT_NE(serialize_checkpoint(ck), before);
}
