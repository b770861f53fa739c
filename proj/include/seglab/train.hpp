#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "seglab/features.hpp"
#include "seglab/lattice.hpp"
#include "seglab/model.hpp"
#include "seglab/ordering.hpp"
#include "seglab/types.hpp"

namespace seglab {

/// Optimization settings for the gradient-trained regimes.
struct TrainConfig {
  double learning_rate = 5e-3;
  int batch_size = 5;
  double decay_factor = 0.5;
  int patience = 1;        // epochs without improvement before decaying
  int max_epochs = 50;
  std::uint64_t seed = 0;
  double smoothing = 0.1;  // add-k on supervised structural counts
  int max_duration = 0;    // 0 = derive from the duration means
  double improvement_tol = 1e-6;

  void check() const;
};

/// All videos of one task, prepared for training: final feature matrices,
/// resolved labels when supervision is available, optional narration masks,
/// and the task-scoped empirical covariance.
struct TaskBatch {
  const TaskDefinition* task = nullptr;
  std::vector<std::string> video_ids;
  std::vector<Eigen::MatrixXd> features;
  std::vector<FrameLabeling> labels;  // empty when unlabeled
  std::vector<EmissionMask> masks;    // empty when unmasked
  DiagCovariance cov;

  int num_videos() const { return static_cast<int>(features.size()); }
  bool labeled() const { return !labels.empty(); }
  int feature_dim() const { return features.empty() ? 0 : (int)features.front().cols(); }
  double mean_length() const;
};

/// Closed-form generative fit from labeled data: normalized first-region
/// and bigram counts (add-k smoothed), per-label mean durations, per-label
/// feature means, covariance from the batch. Unobserved labels fall back to
/// smoothed structure and the global feature mean; `notes` records those.
ModelParams fit_supervised_generative(const TaskBatch& batch, const TrainConfig& config = {},
                                      std::vector<std::string>* notes = nullptr);

// ---------------------------------------------------------------------
// Reparameterized trainable form. Structural scores pass through a
// log-softmax restricted to the allowed support; duration means through a
// softplus. Exposed so gradients can be checked against finite differences
// on exactly the surface the optimizer steps on.

struct ScoreSet {
  Eigen::VectorXd init;     // L, entries outside the support are ignored
  Eigen::MatrixXd trans;    // L x L
  Eigen::VectorXd dur_raw;  // C, lambda = softplus(dur_raw)
  Eigen::MatrixXd mean;     // C x F

  void set_zero();
  void axpy(double a, const ScoreSet& other);  // this += a * other
};

struct TrainContext {
  StateSpace space;
  StructureSupport support;
  Eigen::VectorXd var_diag;
  int max_duration = 1;
  bool final_duration_survival = false;
};

ModelParams materialize(const TrainContext& ctx, const ScoreSet& scores);

/// Eq.-style objectives, per video. When `grad` is non-null the score-space
/// gradient is accumulated into it.
double unsup_log_marginal(const TrainContext& ctx, const ScoreSet& scores,
                          const Eigen::MatrixXd& features, const EmissionMask* mask,
                          ScoreSet* grad);
double disc_log_conditional(const TrainContext& ctx, const ScoreSet& scores,
                            const Eigen::MatrixXd& features, const std::vector<int>& ref_states,
                            const std::vector<int>& ref_durations, ScoreSet* grad);

struct TrainResult {
  ModelParams params;
  std::vector<double> epoch_objective;  // per-video mean, end of each epoch
  bool aborted = false;
  std::string diagnostic;
};

/// Maximizes the summed log marginal likelihood with mini-batched Adam.
/// Pass an ordered space to train under ordering constraints; masks in the
/// batch apply narration constraints. `warm_start` overrides the random
/// initialization (its shapes must match the space).
TrainResult train_unsupervised(const TaskBatch& batch, const TrainConfig& config,
                               const OrderedStateSpace* ordered = nullptr,
                               const ScoreSet* warm_start = nullptr);

/// Maximizes the summed log conditional likelihood (joint minus marginal)
/// of the reference labelings. The objective is always <= 0.
TrainResult train_discriminative(const TaskBatch& batch, const TrainConfig& config);

/// Shared random initialization: small Gaussian noise on structural scores,
/// class means set to randomly chosen distinct frames, duration means at
/// mean length / (S+1).
ScoreSet initial_scores(const TrainContext& ctx, const TaskBatch& batch, Rng& rng);

}  // namespace seglab
