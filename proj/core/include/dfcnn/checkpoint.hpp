#pragma once

// Checkpoint file layout:
//
//   DFCNN-CHECKPOINT\n
//   <decimal byte length of the header>\n
//   <JSON header: format_version, dtype, network, train, fold, step, tensors[]>
//   <raw little-endian float32 blocks, in header order>
//
// Tensors are listed as parameters, then Adam first moments, then Adam second
// moments, each group in parameter declaration order.

#include <filesystem>
#include <string>

#include "dfcnn/model.hpp"
#include "dfcnn/training.hpp"

namespace dfcnn {

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  Network<float> network;
  AdamState<float> adam;
  TrainConfig train;
  int fold = 0;
};

/// Raised for truncated, corrupted or incompatible checkpoint files.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace dfcnn
