#pragma once

#include <filesystem>
#include <vector>

#include "seglab/features.hpp"
#include "seglab/types.hpp"

namespace seglab {

/// A dataset plus the feature-group layout declared by its manifest.
struct LoadedDataset {
  Dataset dataset;
  std::vector<FeatureGroupSpec> groups;  // raw dims; component counts unset
};

/// Reads a JSON manifest, streams each video's raw float32 feature file
/// (row-major T x F, little endian, with a JSON sidecar carrying T, F and
/// group dims), and validates everything. Throws ValidationError with the
/// offending path/video named.
LoadedDataset load_dataset(const std::filesystem::path& manifest_path);

/// Writes the manifest, feature files and sidecars under the manifest's
/// directory. Feature paths are feats/<video_id>.f32.
void save_dataset(const Dataset& ds, const std::vector<FeatureGroupSpec>& groups,
                  const std::filesystem::path& manifest_path);

/// Raw feature file helpers (row-major float32).
Eigen::MatrixXd read_feature_file(const std::filesystem::path& path, int num_timesteps, int dim);
void write_feature_file(const std::filesystem::path& path, const Eigen::MatrixXd& features,
                        const std::vector<int>& group_dims);

}  // namespace seglab
