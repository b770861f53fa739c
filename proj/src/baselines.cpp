#include "seglab/baselines.hpp"

#include <cmath>

namespace seglab {

TaskStats compute_task_stats(const TaskBatch& batch) {
  if (!batch.labeled()) throw ValidationError("compute_task_stats: needs labeled videos");
  const int S = batch.task->num_steps();
  TaskStats stats;
  stats.label_dist = Eigen::VectorXd::Zero(S + 1);
  double bkg = 0, total = 0;
  for (const FrameLabeling& frames : batch.labels) {
    for (const Label& l : frames) {
      stats.label_dist[l.is_background() ? S : l.step_index()] += 1;
      if (l.is_background()) bkg += 1;
      total += 1;
    }
  }
  if (total == 0) throw ValidationError("compute_task_stats: no frames");
  stats.label_dist /= total;
  stats.background_fraction = bkg / total;
  return stats;
}

double corpus_background_fraction(const std::vector<const TaskBatch*>& batches) {
  double bkg = 0, total = 0;
  for (const TaskBatch* b : batches)
    for (const FrameLabeling& frames : b->labels)
      for (const Label& l : frames) {
        if (l.is_background()) bkg += 1;
        total += 1;
      }
  if (total == 0) throw ValidationError("corpus_background_fraction: no labeled frames");
  return bkg / total;
}

FrameLabeling predict_background(int num_timesteps) {
  if (num_timesteps < 1) throw ValidationError("predict_background: T must be >= 1");
  return FrameLabeling(num_timesteps, Label::background());
}

FrameLabeling sample_from_train(const TaskStats& stats, int num_timesteps, Rng& rng) {
  const int n = static_cast<int>(stats.label_dist.size());
  FrameLabeling out(num_timesteps, Label::background());
  for (int t = 0; t < num_timesteps; ++t) {
    const double u = rng.uniform();
    double acc = 0;
    int pick = n - 1;
    for (int i = 0; i < n; ++i) {
      acc += stats.label_dist[i];
      if (u < acc) {
        pick = i;
        break;
      }
    }
    out[t] = pick == n - 1 ? Label::background() : Label::step(pick);
  }
  return out;
}

namespace {

// Splits `total` into `parts` nonnegative pieces as equally as possible,
// remainder going to the earliest pieces.
std::vector<int> even_split(int total, int parts) {
  std::vector<int> out(parts, total / parts);
  for (int i = 0; i < total % parts; ++i) ++out[i];
  return out;
}

}  // namespace

Segmentation ordered_uniform(const TaskDefinition& task, int num_timesteps, double bg_fraction) {
  const int S = task.num_steps();
  if (num_timesteps < S)
    throw ValidationError("ordered_uniform: cannot place " + std::to_string(S) +
                          " steps in " + std::to_string(num_timesteps) + " timesteps");
  if (bg_fraction < 0 || bg_fraction > 1)
    throw ValidationError("ordered_uniform: background fraction outside [0, 1]");

  int step_time = static_cast<int>(std::lround((1.0 - bg_fraction) * num_timesteps));
  step_time = std::max(step_time, S);  // every step needs a timestep
  step_time = std::min(step_time, num_timesteps);
  const int bg_time = num_timesteps - step_time;

  const std::vector<int> step_durs = even_split(step_time, S);
  const std::vector<int> gap_durs = even_split(bg_time, S + 1);

  Segmentation seg;
  for (int j = 0; j <= S; ++j) {
    if (gap_durs[j] > 0) seg.regions.push_back({Label::background(), gap_durs[j]});
    if (j < S) seg.regions.push_back({Label::step(j), step_durs[j]});
  }
  return seg;
}

}  // namespace seglab
