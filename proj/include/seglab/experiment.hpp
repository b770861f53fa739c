#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "seglab/manifest.hpp"
#include "seglab/metrics.hpp"
#include "seglab/model_io.hpp"
#include "seglab/train.hpp"

namespace seglab {

/// One experiment: a training regime or a baseline, the active constraint
/// set, feature options and decode options. Serializes to/from JSON so runs
/// are reproducible from a config file.
struct RunConfig {
  std::string mode;                   // unsup | gen-sup | disc-sup | "" with a baseline
  std::string constraints = "none";   // none | ord | narr | ord+narr
  std::string baseline = "none";      // none | bkg | sample | uniform
  TrainConfig train;
  int pca_components = 0;             // 0 disables PCA
  double mask_penalty = -1e4;         // finite keeps every video decodable
  bool hard_narration = false;        // -inf penalties instead
  bool hmm = false;                   // duration ablation: durations fixed to 1
  double bg_fraction = -1;            // <0: corpus average from train labels
  bool final_duration_survival = false;
  int decode_max_duration = 0;        // 0 keeps the model's stored value
  int splits = 0;                     // >0: random-splits protocol
  int train_per_task = 30;

  bool use_ordering() const { return constraints == "ord" || constraints == "ord+narr"; }
  bool use_narration() const { return constraints == "narr" || constraints == "ord+narr"; }
  bool is_baseline() const { return baseline != "none"; }
  void validate() const;

  static RunConfig from_json_text(const std::string& text);
  std::string to_json_text() const;
};

struct PredictedVideo {
  std::string video_id;
  std::string task_id;
  FrameLabeling frames;
  Segmentation seg;
};
using PredictionSet = std::vector<PredictedVideo>;

void save_predictions(const PredictionSet& preds, const std::filesystem::path& path);
PredictionSet load_predictions(const std::filesystem::path& path);

/// Assembles one task's training inputs: PCA projection when fitted,
/// resolved labels when present/needed, narration masks when requested.
TaskBatch make_task_batch(const Dataset& ds, const TaskDefinition& task, const PcaModel* pca,
                          bool with_labels, bool with_masks, double mask_penalty);

/// Fits/trains per-task models per the config (PCA first when enabled).
ModelBundle train_models(const LoadedDataset& train, const RunConfig& config);

/// Decodes every video of the dataset with its task's model; ordered models
/// get merge_background applied.
PredictionSet predict_all(const ModelBundle& bundle, const Dataset& ds,
                          const RunConfig& config);

/// Scores predictions against the dataset's references. With
/// `hungarian` the state-to-label assignment maximizing pooled frame counts
/// is applied per task before scoring.
EvalReport evaluate_predictions(const Dataset& ref_ds, const PredictionSet& preds,
                                bool hungarian);

void write_report(const EvalReport& report, const RunConfig& config,
                  const std::filesystem::path& path);

struct RunResult {
  EvalReport report;
  std::filesystem::path report_path;
  std::filesystem::path predictions_path;
  std::filesystem::path model_path;
};

/// The end-to-end pipeline: features -> constraints -> train or baseline ->
/// decode -> merge -> metrics, writing predictions, model and report under
/// out_dir. Pass eval = nullptr to evaluate on the training set. With
/// config.splits > 0 the random-splits protocol runs instead and the report
/// averages over splits.
RunResult run_experiment(const LoadedDataset& train, const LoadedDataset* eval,
                         const RunConfig& config, const std::filesystem::path& out_dir);

}  // namespace seglab
