#pragma once

#include <Eigen/Core>

#include "seglab/random.hpp"
#include "seglab/train.hpp"
#include "seglab/types.hpp"

namespace seglab {

/// Training-set label statistics backing the feature-agnostic baselines.
struct TaskStats {
  Eigen::VectorXd label_dist;   // S+1 entries, last = background; sums to 1
  double background_fraction = 0.0;  // this task's share of background frames
};

/// Frame-label frequencies from the labeled training videos of one task.
TaskStats compute_task_stats(const TaskBatch& batch);

/// Pooled background fraction across all labeled training videos.
double corpus_background_fraction(const std::vector<const TaskBatch*>& batches);

/// Everything background.
FrameLabeling predict_background(int num_timesteps);

/// I.i.d. per-timestep draws from the task's empirical label distribution.
FrameLabeling sample_from_train(const TaskStats& stats, int num_timesteps, Rng& rng);

/// Steps once each in canonical order with background in the S+1 gaps.
/// Total step time is round((1 - bg_fraction) * T) split as equally as
/// possible (remainder to earlier steps); background likewise over the
/// gaps. Zero-length gaps are dropped.
Segmentation ordered_uniform(const TaskDefinition& task, int num_timesteps, double bg_fraction);

}  // namespace seglab
