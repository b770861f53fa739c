#pragma once

#include <vector>

#include "seglab/model.hpp"
#include "seglab/types.hpp"

namespace seglab {

/// Expanded state space enforcing the canonical step order: states
/// bkg_0, s_1, bkg_1, ..., s_S, bkg_S, where every decode visits each step
/// exactly once, in order, optionally separated by background. Background
/// copies share one parameter class; only the structure distinguishes them.
struct OrderedStateSpace {
  StateSpace space;                         // 2S+1 states
  std::vector<bool> initial_allowed;        // {bkg_0, s_1}
  std::vector<std::vector<bool>> transition_allowed;
  std::vector<bool> terminal_allowed;       // {s_S, bkg_S}
  int num_steps = 0;

  int num_states() const { return space.num_states(); }
  int step_state(int j) const { return 2 * j + 1; }  // j in 0..S-1
  int background_state(int i) const { return 2 * i; }  // i in 0..S
};

OrderedStateSpace build_ordered_space(const TaskDefinition& task);

/// Lifts plain-task parameters onto the ordered space: allowed structural
/// entries take the base values renormalized within each row's allowed set;
/// everything else is -inf. Durations and emissions are shared through the
/// class map (all background copies read the single background class).
ModelParams constrain_params(const ModelParams& base, const OrderedStateSpace& ordered);

/// Structural log-probability masks for a params object: -inf where the
/// ordered space forbids an entry, 0 elsewhere. Used by the trainer to keep
/// its reparameterized scores inside the allowed sets.
struct StructureSupport {
  std::vector<bool> initial;
  std::vector<std::vector<bool>> transition;
  std::vector<bool> terminal;
};

StructureSupport full_support(int num_states);
StructureSupport support_of(const OrderedStateSpace& ordered);

/// Builds the emission penalty mask from a video's narration constraint
/// intervals: step class j is penalized at timestep t iff j is constrained
/// and t lies in none of j's intervals. Background is never penalized.
/// Intended for training only.
EmissionMask narration_mask(const VideoInstance& video, int num_classes, double penalty = -1e4);

/// Replaces expanded labels by their base labels and merges adjacent equal
/// regions. Idempotent.
Segmentation merge_background(const Segmentation& seg);

}  // namespace seglab
