#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "seglab/features.hpp"
#include "seglab/model.hpp"

namespace seglab {

inline constexpr const char* kVersionString = "seglab 0.1.0";

/// Parameters for one task plus whether they live on an ordering-constrained
/// expanded space (recorded so loads reapply the constraint at decode).
struct TaskModel {
  ModelParams params;
  bool ordered = false;
};

/// Everything a prediction run needs: optional PCA models and per-task
/// parameters.
struct ModelBundle {
  std::optional<PcaModel> pca;
  std::map<std::string, TaskModel> tasks;
};

/// JSON with an embedded format version and a payload checksum; loading
/// refuses unknown versions and corrupt payloads. Doubles round-trip at
/// 64-bit precision.
void save_model(const ModelBundle& bundle, const std::filesystem::path& path);
ModelBundle load_model(const std::filesystem::path& path);

}  // namespace seglab
