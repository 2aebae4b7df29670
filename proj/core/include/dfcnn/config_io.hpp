#pragma once

#include <nlohmann/json.hpp>

#include "dfcnn/model.hpp"
#include "dfcnn/training.hpp"

namespace dfcnn {

nlohmann::json to_json(const NetworkConfig& config);
nlohmann::json to_json(const TrainConfig& config);

/// Fields absent from `j` keep the values already in `config`; unknown keys
/// are rejected.
void update_from_json(NetworkConfig& config, const nlohmann::json& j);
void update_from_json(TrainConfig& config, const nlohmann::json& j);

}  // namespace dfcnn
