#pragma once

#include <Eigen/Core>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "seglab/types.hpp"

namespace seglab {

/// Fraction of timesteps where prediction equals reference, background
/// included.
double all_frame_accuracy(const FrameLabeling& pred, const FrameLabeling& ref);

/// Accuracy restricted to timesteps whose reference is a step. Empty when
/// the reference has no step frames (such videos are skipped in
/// aggregation).
std::optional<double> step_frame_accuracy(const FrameLabeling& pred, const FrameLabeling& ref);

/// Step-recall counts for one video: for every step type predicted
/// somewhere, the single predicted frame closest to the midpoint of that
/// type's predicted extent (ties toward the earlier frame) is kept; a
/// reference step type counts as recovered iff its kept frame carries that
/// type in the reference. Recall is a ratio of sums across a task's videos.
struct RecallCounts {
  int recovered = 0;
  int possible = 0;  // number of step types present in the reference
};
RecallCounts step_recall_counts(const FrameLabeling& pred, const FrameLabeling& ref,
                                int num_steps);

/// 100 * (1 - levenshtein / max_len) over region-label sequences
/// (background regions included as tokens). Both empty -> 100.
double sequence_similarity(const Segmentation& pred, const Segmentation& ref);

/// Percentage of timesteps predicted background.
double background_pct(const FrameLabeling& pred);

/// Number of non-background regions.
int num_step_segments(const Segmentation& seg);

/// Frames where state i was predicted while label j is the reference;
/// pooled per task across videos.
using AssignmentMatrix = Eigen::MatrixXi;

/// Permutation sigma maximizing sum_i m(i, sigma(i)). Rectangular inputs
/// are zero-padded to square first.
std::vector<int> hungarian_assign(const AssignmentMatrix& m);

struct VideoMetrics {
  std::string video_id;
  std::string task_id;
  double all_frame_acc = 0;                 // fraction
  std::optional<double> step_frame_acc;     // fraction
  RecallCounts recall;
  double seq_sim = 0;                       // 0..100
  double bkg_pct = 0;                       // 0..100
  int step_segments = 0;
};

/// One row of the report; percentages in [0, 100].
struct TaskMetrics {
  std::string task_id;
  int num_videos = 0;
  double all_frame_accuracy = 0;
  double step_frame_accuracy = 0;
  double step_recall = 0;
  double sequence_similarity = 0;
  double predicted_background = 0;
  double num_step_segments = 0;
};

struct EvalReport {
  std::vector<TaskMetrics> per_task;
  TaskMetrics average;  // unweighted over tasks
  std::vector<std::string> notes;

  std::string to_table() const;
};

/// Per-task mean over videos (ratio of sums for step recall), then
/// unweighted mean over tasks. Empty tasks are excluded and noted.
EvalReport aggregate(const std::vector<VideoMetrics>& videos);

/// Computes all per-video metrics for one prediction/reference pair.
VideoMetrics evaluate_video(const std::string& video_id, const std::string& task_id,
                            const FrameLabeling& pred, const FrameLabeling& ref, int num_steps);

}  // namespace seglab
