#pragma once

#include <filesystem>
#include <string>

#include "mnagt/model.hpp"
#include "mnagt/training.hpp"

namespace mnagt {

/// JSON text for the effective configuration, every field included.
std::string model_config_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& text);
std::string train_config_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& text);

inline constexpr int kCheckpointVersion = 1;

/// Checkpoint container (JSON):
///   {"format": "mnagt-checkpoint", "version": 1, "config": {...},
///    "params": [{"name": ..., "shape": [...], "values": [...]}, ...]}
template <class T>
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                     const ModelParams<T>& params);

template <class T>
struct Checkpoint {
  ModelConfig config;
  ModelParams<T> params;
};

/// Rebuilds the parameter layout from the stored config and checks every
/// stored tensor name and shape against it. Throws DataError on mismatch.
template <class T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path);

}  // namespace mnagt
