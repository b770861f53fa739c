#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "seglab/model.hpp"

namespace seglab {

struct ForwardResult {
  double log_marginal;  // -inf when no valid segmentation exists
  bool feasible;
};

/// Log marginal likelihood of the features: the semi-Markov forward
/// recursion summing over all segmentations (region counts, labelings,
/// durations up to max_duration) in log space. Mask penalties, when given,
/// are added to the per-class emission scores.
ForwardResult forward_log_marginal(const ModelParams& params, const Eigen::MatrixXd& features,
                                   const EmissionMask* mask = nullptr);

struct DecodeResult {
  Segmentation seg;          // base labels, one region per lattice segment
  std::vector<int> states;   // per region
  double score;              // log joint of the decoded segmentation
};

/// Max-product counterpart of the forward recursion. Ties are broken
/// deterministically: shorter duration first, then lower state index.
/// Throws with a diagnostic when no valid path exists.
DecodeResult viterbi_decode(const ModelParams& params, const Eigen::MatrixXd& features,
                            const EmissionMask* mask = nullptr);

/// Log joint probability of one segmentation with the features. Returns
/// -inf for disallowed transitions or durations beyond max_duration.
/// Region labels are mapped to states via the space (requires a one-to-one
/// label-to-state mapping, i.e. a plain space).
double log_joint(const ModelParams& params, const Segmentation& seg,
                 const Eigen::MatrixXd& features, const EmissionMask* mask = nullptr);

/// Same, with regions given directly as states (works for expanded spaces).
double log_joint_states(const ModelParams& params, const std::vector<int>& states,
                        const std::vector<int>& durations, const Eigen::MatrixXd& features,
                        const EmissionMask* mask = nullptr);

/// Gradients of the forward log marginal with respect to every score table
/// it reads. Parameter-space chain rules live with the trainer.
struct LatticeGradients {
  Eigen::MatrixXd d_emission;  // T x C
  Eigen::MatrixXd d_duration;  // C x max_duration (wrt normalized log pmf entries)
  Eigen::VectorXd d_init;      // L
  Eigen::MatrixXd d_trans;     // L x L
};

/// Forward pass that also records its adjoint. Returns the log marginal;
/// accumulates (adds) gradients into `grads`, which must be pre-sized and
/// zeroed by the caller. Infeasible lattices contribute nothing.
ForwardResult forward_with_gradients(const ModelParams& params, const Eigen::MatrixXd& features,
                                     const EmissionMask* mask, LatticeGradients& grads);

LatticeGradients zero_gradients(const ModelParams& params, int num_timesteps);

/// Decode-time default for the duration cap: min(T, ceil(max lambda +
/// 6*sqrt(max lambda))), keeping negligible tail mass out of the lattice.
int default_max_duration(const Eigen::VectorXd& dur_mean, int num_timesteps);

}  // namespace seglab
