#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

#include "seglab/random.hpp"
#include "seglab/types.hpp"

namespace seglab {

/// The states a model's structure runs over. For an unconstrained task
/// model states are the task's steps plus background. Ordering-constrained
/// models expand this (one background copy per position); expanded states
/// still share parameters through `cls`, which maps each state to one of
/// the S+1 parameter classes (step j -> class j, background -> class S).
struct StateSpace {
  std::vector<Label> base;          // state -> base label (for evaluation)
  std::vector<int> cls;             // state -> parameter class
  std::vector<std::string> names;   // state display names

  int num_states() const { return static_cast<int>(base.size()); }
  int num_classes() const;
  int background_class() const { return num_classes() - 1; }
};

/// Steps in task order followed by one background state; class == state.
StateSpace plain_space(const TaskDefinition& task);

/// Semi-Markov model parameters for one task.
///
/// Structure is a bigram over region labels (init_log, trans_log) with an
/// optional terminal restriction (final_log, 0 or -inf). Region durations
/// are Poisson per class, renormalized over {1..max_duration}. Emissions
/// are per-class diagonal Gaussians with a shared variance vector. Setting
/// max_duration = 1 turns the model into a classic HMM where durations
/// arise through self-transitions.
struct ModelParams {
  StateSpace space;

  Eigen::VectorXd init_log;   // L
  Eigen::MatrixXd trans_log;  // L x L, row = from
  Eigen::VectorXd final_log;  // L, 0 (allowed) or -inf

  Eigen::VectorXd dur_mean;   // C, lambda > 0
  Eigen::MatrixXd emit_mean;  // C x F
  Eigen::VectorXd var_diag;   // F, > 0

  int max_duration = 1;
  // When set, the region ending at the video boundary is scored with the
  // duration tail mass P(d >= observed) instead of the pmf.
  bool final_duration_survival = false;

  int num_states() const { return space.num_states(); }
  int num_classes() const { return static_cast<int>(dur_mean.size()); }
  int feature_dim() const { return static_cast<int>(var_diag.size()); }
  void check() const;  // structural invariants; throws on violation
};

/// Log pmf table of the zero-truncated, max_d-capped Poisson:
/// entry (c, d-1) = log P(d | lambda_c), normalized over d in {1..max_d}.
Eigen::MatrixXd duration_log_table(const Eigen::VectorXd& lambda, int max_d);

/// Mean of the truncated duration distribution per class (the estimand of
/// the duration moment estimator).
Eigen::VectorXd truncated_duration_mean(const Eigen::VectorXd& lambda, int max_d);

double duration_log_pmf(const ModelParams& params, int state, int d);

/// Diagonal-Gaussian log density of one frame under one state's class.
double emission_log_prob(const ModelParams& params, const Eigen::VectorXd& x, int state);

/// T x C matrix of per-class emission log densities for a whole video.
Eigen::MatrixXd emission_log_probs(const ModelParams& params, const Eigen::MatrixXd& features);

/// Additive emission penalties, T x C; entry 0 means allowed. The
/// background class is never penalized.
struct EmissionMask {
  Eigen::MatrixXd penalty;

  int num_timesteps() const { return static_cast<int>(penalty.rows()); }
};

struct SampleResult {
  Segmentation seg;                // base labels, as sampled (final region truncated)
  std::vector<int> states;         // per region
  Eigen::MatrixXd features;        // T x F
};

/// Ancestral sampling: draw regions until they cover T timesteps, truncate
/// the last region, then draw per-timestep features from each region's
/// class Gaussian. Terminal restrictions are not enforced.
SampleResult sample(const ModelParams& params, int num_timesteps, Rng& rng);

/// Exact per-timestep state occupancy probabilities under the sampling
/// process above (T x L). Row t sums to 1.
Eigen::MatrixXd expected_state_marginals(const ModelParams& params, int num_timesteps);

}  // namespace seglab
