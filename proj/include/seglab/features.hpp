#pragma once

#include <Eigen/Core>
#include <map>
#include <string>
#include <vector>

#include "seglab/types.hpp"

namespace seglab {

/// One raw feature group (e.g. an activity/object/audio block of columns)
/// and how many principal components to keep for it.
struct FeatureGroupSpec {
  std::string name;
  int raw_dim = 0;
  int components = 100;
};

struct PcaGroupModel {
  Eigen::VectorXd mean;                        // raw_dim
  Eigen::MatrixXd projection;                  // raw_dim x components
  Eigen::VectorXd explained_variance_ratio;    // components, nonincreasing
  int effective_components = 0;                // < requested when rank-deficient
};

/// Per-task, per-group PCA models. Groups are column blocks of the raw
/// feature matrix in declared order.
struct PcaModel {
  std::vector<FeatureGroupSpec> specs;
  std::map<std::string, std::vector<PcaGroupModel>> by_task;

  int output_dim() const;
  bool has_task(const std::string& task_id) const { return by_task.count(task_id) > 0; }
};

/// Fits PCA separately per task and per feature group, on all frames of all
/// of that task's videos. Zero-variance directions reduce the effective
/// component count rather than failing.
PcaModel pca_fit(const Dataset& ds, const std::vector<FeatureGroupSpec>& specs);

/// Centers and projects each group block, then concatenates the blocks in
/// declared order. Output is T x sum(components).
Eigen::MatrixXd pca_transform(const PcaModel& model, const std::string& task_id,
                              const Eigen::MatrixXd& features);

/// Shared diagonal covariance over the final feature space.
struct DiagCovariance {
  Eigen::VectorXd variance;  // strictly positive after flooring
};

/// Population (1/N) per-dimension variance across all rows of all given
/// matrices, floored at `floor`.
DiagCovariance empirical_diag_cov(const std::vector<const Eigen::MatrixXd*>& frames,
                                  double floor = 1e-6);

/// A word embedding positioned at a (real-valued) second in the video.
struct TimedEmbedding {
  double time = 0.0;
  Eigen::VectorXd vector;
};

/// Pools word embeddings into per-timestep rows with a Hanning taper over a
/// window of `window` seconds (odd, default 5). Words are binned to the
/// nearest integer second. With normalize=false rows are weighted sums;
/// with normalize=true each row is divided by its total weight.
Eigen::MatrixXd narration_pool(const std::vector<TimedEmbedding>& words, int num_timesteps,
                               int window = 5, bool normalize = false);

}  // namespace seglab
