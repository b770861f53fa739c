#include "seglab/experiment.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "seglab/baselines.hpp"
#include "seglab/digest.hpp"
#include "seglab/lattice.hpp"
#include "seglab/logmath.hpp"
#include "seglab/ordering.hpp"

namespace seglab {

using nlohmann::json;

void RunConfig::validate() const {
  const bool has_mode = !mode.empty();
  if (is_baseline() && has_mode)
    throw ValidationError("config: baseline and mode are mutually exclusive");
  if (!is_baseline() && !has_mode)
    throw ValidationError("config: one of mode or baseline is required");
  if (has_mode && mode != "unsup" && mode != "gen-sup" && mode != "disc-sup")
    throw ValidationError("config: unknown mode '" + mode + "'");
  if (baseline != "none" && baseline != "bkg" && baseline != "sample" && baseline != "uniform")
    throw ValidationError("config: unknown baseline '" + baseline + "'");
  if (constraints != "none" && constraints != "ord" && constraints != "narr" &&
      constraints != "ord+narr")
    throw ValidationError("config: unknown constraints '" + constraints + "'");
  if (use_narration() && mode != "unsup")
    throw ValidationError("config: narration constraints apply to unsupervised training only");
  if (is_baseline() && constraints != "none")
    throw ValidationError("config: baselines take no constraints");
  train.check();
}

RunConfig RunConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  RunConfig c;
  c.mode = j.value("mode", "");
  c.constraints = j.value("constraints", "none");
  c.baseline = j.value("baseline", "none");
  c.pca_components = j.value("pca_components", 0);
  c.mask_penalty = j.value("mask_penalty", -1e4);
  c.hard_narration = j.value("hard_narration", false);
  c.hmm = j.value("hmm", false);
  c.bg_fraction = j.value("bg_fraction", -1.0);
  c.final_duration_survival = j.value("final_duration_survival", false);
  c.decode_max_duration = j.value("decode_max_duration", 0);
  c.splits = j.value("splits", 0);
  c.train_per_task = j.value("train_per_task", 30);
  if (j.contains("train")) {
    const json& t = j.at("train");
    c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
    c.train.batch_size = t.value("batch_size", c.train.batch_size);
    c.train.decay_factor = t.value("decay_factor", c.train.decay_factor);
    c.train.patience = t.value("patience", c.train.patience);
    c.train.max_epochs = t.value("max_epochs", c.train.max_epochs);
    c.train.seed = t.value("seed", c.train.seed);
    c.train.smoothing = t.value("smoothing", c.train.smoothing);
    c.train.max_duration = t.value("max_duration", c.train.max_duration);
  }
  return c;
}

std::string RunConfig::to_json_text() const {
  json j;
  j["mode"] = mode;
  j["constraints"] = constraints;
  j["baseline"] = baseline;
  j["pca_components"] = pca_components;
  j["mask_penalty"] = mask_penalty;
  j["hard_narration"] = hard_narration;
  j["hmm"] = hmm;
  j["bg_fraction"] = bg_fraction;
  j["final_duration_survival"] = final_duration_survival;
  j["decode_max_duration"] = decode_max_duration;
  j["splits"] = splits;
  j["train_per_task"] = train_per_task;
  j["train"] = {{"learning_rate", train.learning_rate},
                {"batch_size", train.batch_size},
                {"decay_factor", train.decay_factor},
                {"patience", train.patience},
                {"max_epochs", train.max_epochs},
                {"seed", train.seed},
                {"smoothing", train.smoothing},
                {"max_duration", train.max_duration}};
  return j.dump(2);
}

void save_predictions(const PredictionSet& preds, const std::filesystem::path& path) {
  json j;
  j["format_version"] = 1;
  json arr = json::array();
  for (const PredictedVideo& pv : preds) {
    json rec;
    rec["video_id"] = pv.video_id;
    rec["task_id"] = pv.task_id;
    json frames = json::array();
    for (const Label& l : pv.frames) frames.push_back(l.raw());
    rec["frame_labels"] = frames;
    json regions = json::array();
    for (const Region& r : pv.seg.regions)
      regions.push_back({{"label", r.label.raw()}, {"duration", r.duration}});
    rec["regions"] = regions;
    arr.push_back(std::move(rec));
  }
  j["predictions"] = arr;
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write predictions: " + path.string());
  out << j.dump() << "\n";
}

PredictionSet load_predictions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("predictions file not found: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ValidationError("predictions file " + path.string() + ": " + e.what());
  }
  PredictionSet preds;
  for (const json& rec : j.at("predictions")) {
    PredictedVideo pv;
    pv.video_id = rec.at("video_id").get<std::string>();
    pv.task_id = rec.at("task_id").get<std::string>();
    for (const json& f : rec.at("frame_labels")) pv.frames.push_back(Label::from_raw(f.get<int>()));
    for (const json& r : rec.at("regions"))
      pv.seg.regions.push_back(
          {Label::from_raw(r.at("label").get<int>()), r.at("duration").get<int>()});
    if (!pv.frames.empty() && pv.seg.total_duration() != static_cast<int>(pv.frames.size()))
      throw ValidationError("predictions for '" + pv.video_id + "': regions do not match frames");
    preds.push_back(std::move(pv));
  }
  return preds;
}

TaskBatch make_task_batch(const Dataset& ds, const TaskDefinition& task, const PcaModel* pca,
                          bool with_labels, bool with_masks, double mask_penalty) {
  TaskBatch batch;
  batch.task = &task;
  const int num_classes = task.num_steps() + 1;
  for (const VideoInstance& v : ds.videos) {
    if (v.task_id != task.task_id) continue;
    batch.video_ids.push_back(v.video_id);
    batch.features.push_back(pca != nullptr ? pca_transform(*pca, task.task_id, v.features)
                                            : v.features);
    if (with_labels) batch.labels.push_back(resolve_multilabel(v, task));
    if (with_masks) batch.masks.push_back(narration_mask(v, num_classes, mask_penalty));
  }
  std::vector<const Eigen::MatrixXd*> ptrs;
  for (const Eigen::MatrixXd& f : batch.features) ptrs.push_back(&f);
  if (!ptrs.empty()) batch.cov = empirical_diag_cov(ptrs);
  return batch;
}

namespace {

std::vector<FeatureGroupSpec> pca_specs(const LoadedDataset& ds, int components) {
  std::vector<FeatureGroupSpec> specs = ds.groups;
  for (FeatureGroupSpec& s : specs) s.components = std::min(components, s.raw_dim);
  return specs;
}

}  // namespace

ModelBundle train_models(const LoadedDataset& train, const RunConfig& config) {
  config.validate();
  ModelBundle bundle;
  if (config.pca_components > 0)
    bundle.pca = pca_fit(train.dataset, pca_specs(train, config.pca_components));
  const PcaModel* pca = bundle.pca ? &*bundle.pca : nullptr;

  const double penalty = config.hard_narration ? kNegInf : config.mask_penalty;
  TrainConfig tc = config.train;
  if (config.hmm) tc.max_duration = 1;

  for (const TaskDefinition& task : train.dataset.tasks) {
    const bool needs_labels = config.mode != "unsup";
    TaskBatch batch = make_task_batch(train.dataset, task, pca, needs_labels,
                                      config.use_narration(), penalty);
    if (batch.num_videos() == 0) continue;

    TaskModel tm;
    if (config.mode == "gen-sup") {
      tm.params = fit_supervised_generative(batch, tc);
      if (config.hmm) tm.params.max_duration = 1;
      if (config.use_ordering()) {
        tm.params = constrain_params(tm.params, build_ordered_space(task));
        tm.ordered = true;
      }
    } else if (config.mode == "disc-sup") {
      TrainResult tr = train_discriminative(batch, tc);
      if (tr.aborted)
        throw std::runtime_error("training aborted for task '" + task.task_id +
                                 "': " + tr.diagnostic);
      tm.params = std::move(tr.params);
      if (config.use_ordering()) {
        tm.params = constrain_params(tm.params, build_ordered_space(task));
        tm.ordered = true;
      }
    } else {  // unsup
      TrainResult tr;
      if (config.use_ordering()) {
        const OrderedStateSpace ordered = build_ordered_space(task);
        tr = train_unsupervised(batch, tc, &ordered);
        tm.ordered = true;
      } else {
        tr = train_unsupervised(batch, tc);
      }
      if (tr.aborted)
        throw std::runtime_error("training aborted for task '" + task.task_id +
                                 "': " + tr.diagnostic);
      tm.params = std::move(tr.params);
    }
    tm.params.final_duration_survival = config.final_duration_survival;
    bundle.tasks.emplace(task.task_id, std::move(tm));
  }
  return bundle;
}

PredictionSet predict_all(const ModelBundle& bundle, const Dataset& ds,
                          const RunConfig& config) {
  const PcaModel* pca = bundle.pca ? &*bundle.pca : nullptr;
  PredictionSet preds;
  for (const VideoInstance& v : ds.videos) {
    auto it = bundle.tasks.find(v.task_id);
    if (it == bundle.tasks.end())
      throw ValidationError("no model for task '" + v.task_id + "'");
    ModelParams params = it->second.params;  // decode options may adjust
    if (config.decode_max_duration > 0) params.max_duration = config.decode_max_duration;

    const Eigen::MatrixXd feats =
        pca != nullptr ? pca_transform(*pca, v.task_id, v.features) : v.features;
    DecodeResult decoded = viterbi_decode(params, feats);

    PredictedVideo pv;
    pv.video_id = v.video_id;
    pv.task_id = v.task_id;
    pv.seg = it->second.ordered ? merge_background(decoded.seg) : decoded.seg;
    pv.frames = segmentation_to_frames(pv.seg);
    preds.push_back(std::move(pv));
  }
  return preds;
}

namespace {

FrameLabeling reference_frames(const Dataset& ds, const VideoInstance& v) {
  const TaskDefinition* task = ds.find_task(v.task_id);
  if (task == nullptr || !v.has_reference)
    throw ValidationError("evaluate: video '" + v.video_id + "' lacks reference annotations");
  return resolve_multilabel(v, *task);
}

// Per-task pooled count matrices and the accuracy-maximizing relabeling.
std::map<std::string, std::vector<int>> hungarian_mappings(const Dataset& ds,
                                                           const PredictionSet& preds) {
  std::map<std::string, AssignmentMatrix> counts;
  for (const PredictedVideo& pv : preds) {
    const TaskDefinition* task = ds.find_task(pv.task_id);
    const VideoInstance* video = nullptr;
    for (const VideoInstance& v : ds.videos)
      if (v.video_id == pv.video_id) video = &v;
    if (task == nullptr || video == nullptr)
      throw ValidationError("evaluate: prediction for unknown video '" + pv.video_id + "'");
    const int n = task->num_steps() + 1;
    auto [it, fresh] = counts.try_emplace(pv.task_id, AssignmentMatrix::Zero(n, n));
    const FrameLabeling ref = reference_frames(ds, *video);
    if (ref.size() != pv.frames.size())
      throw ValidationError("evaluate: length mismatch for video '" + pv.video_id + "'");
    for (std::size_t t = 0; t < ref.size(); ++t) {
      const int pi = pv.frames[t].is_background() ? n - 1 : pv.frames[t].step_index();
      const int ri = ref[t].is_background() ? n - 1 : ref[t].step_index();
      it->second(pi, ri) += 1;
    }
  }
  std::map<std::string, std::vector<int>> mappings;
  for (const auto& [task_id, m] : counts) mappings[task_id] = hungarian_assign(m);
  return mappings;
}

FrameLabeling remap(const FrameLabeling& frames, const std::vector<int>& mapping) {
  const int bkg_index = static_cast<int>(mapping.size()) - 1;
  FrameLabeling out;
  out.reserve(frames.size());
  for (const Label& l : frames) {
    const int target = mapping[l.is_background() ? bkg_index : l.step_index()];
    out.push_back(target == bkg_index ? Label::background() : Label::step(target));
  }
  return out;
}

}  // namespace

EvalReport evaluate_predictions(const Dataset& ref_ds, const PredictionSet& preds,
                                bool hungarian) {
  std::map<std::string, std::vector<int>> mappings;
  if (hungarian) mappings = hungarian_mappings(ref_ds, preds);

  std::vector<VideoMetrics> per_video;
  for (const PredictedVideo& pv : preds) {
    const TaskDefinition* task = ref_ds.find_task(pv.task_id);
    const VideoInstance* video = nullptr;
    for (const VideoInstance& v : ref_ds.videos)
      if (v.video_id == pv.video_id) video = &v;
    if (task == nullptr || video == nullptr)
      throw ValidationError("evaluate: prediction for unknown video '" + pv.video_id + "'");

    FrameLabeling frames = pv.frames;
    if (hungarian) frames = remap(frames, mappings.at(pv.task_id));
    const FrameLabeling ref = reference_frames(ref_ds, *video);
    if (ref.size() != frames.size())
      throw ValidationError("evaluate: length mismatch for video '" + pv.video_id + "'");
    per_video.push_back(
        evaluate_video(pv.video_id, pv.task_id, frames, ref, task->num_steps()));
  }
  return aggregate(per_video);
}

namespace {

json task_metrics_to_json(const TaskMetrics& tm) {
  return {{"task_id", tm.task_id},
          {"num_videos", tm.num_videos},
          {"all_frame_accuracy", tm.all_frame_accuracy},
          {"step_frame_accuracy", tm.step_frame_accuracy},
          {"step_recall", tm.step_recall},
          {"sequence_similarity", tm.sequence_similarity},
          {"predicted_background", tm.predicted_background},
          {"num_step_segments", tm.num_step_segments}};
}

PredictionSet baseline_predictions(const Dataset& train, const Dataset& eval,
                                   const RunConfig& config) {
  // Stats come from the training labels.
  std::map<std::string, TaskStats> stats;
  double corpus_bg = config.bg_fraction;
  if (config.baseline == "sample" || (config.baseline == "uniform" && corpus_bg < 0)) {
    std::vector<TaskBatch> batches;
    for (const TaskDefinition& task : train.tasks) {
      TaskBatch b = make_task_batch(train, task, nullptr, true, false, 0);
      if (b.num_videos() > 0) batches.push_back(std::move(b));
    }
    std::vector<const TaskBatch*> ptrs;
    for (const TaskBatch& b : batches) ptrs.push_back(&b);
    if (corpus_bg < 0) corpus_bg = corpus_background_fraction(ptrs);
    for (const TaskBatch& b : batches) stats[b.task->task_id] = compute_task_stats(b);
  }

  Rng rng(config.train.seed);
  PredictionSet preds;
  for (const VideoInstance& v : eval.videos) {
    const TaskDefinition* task = eval.find_task(v.task_id);
    PredictedVideo pv;
    pv.video_id = v.video_id;
    pv.task_id = v.task_id;
    if (config.baseline == "bkg") {
      pv.frames = predict_background(v.num_timesteps());
    } else if (config.baseline == "sample") {
      auto it = stats.find(v.task_id);
      if (it == stats.end())
        throw ValidationError("baseline sample: no training labels for task '" + v.task_id + "'");
      pv.frames = sample_from_train(it->second, v.num_timesteps(), rng);
    } else {  // uniform
      pv.seg = ordered_uniform(*task, v.num_timesteps(), corpus_bg);
      pv.frames = segmentation_to_frames(pv.seg);
    }
    if (pv.seg.regions.empty()) pv.seg = frames_to_segmentation(pv.frames);
    preds.push_back(std::move(pv));
  }
  return preds;
}

TaskMetrics average_rows(const std::vector<TaskMetrics>& rows, const std::string& id) {
  TaskMetrics avg;
  avg.task_id = id;
  for (const TaskMetrics& tm : rows) {
    avg.num_videos += tm.num_videos;
    avg.all_frame_accuracy += tm.all_frame_accuracy;
    avg.step_frame_accuracy += tm.step_frame_accuracy;
    avg.step_recall += tm.step_recall;
    avg.sequence_similarity += tm.sequence_similarity;
    avg.predicted_background += tm.predicted_background;
    avg.num_step_segments += tm.num_step_segments;
  }
  const int n = static_cast<int>(rows.size());
  if (n > 0) {
    avg.all_frame_accuracy /= n;
    avg.step_frame_accuracy /= n;
    avg.step_recall /= n;
    avg.sequence_similarity /= n;
    avg.predicted_background /= n;
    avg.num_step_segments /= n;
  }
  return avg;
}

EvalReport run_once(const LoadedDataset& train, const Dataset& eval, const RunConfig& config,
                    const std::filesystem::path* out_dir, RunResult* artifacts) {
  PredictionSet preds;
  if (config.is_baseline()) {
    preds = baseline_predictions(train.dataset, eval, config);
  } else {
    const ModelBundle bundle = train_models(train, config);
    preds = predict_all(bundle, eval, config);
    if (out_dir != nullptr) {
      artifacts->model_path = *out_dir / "model.json";
      save_model(bundle, artifacts->model_path);
    }
  }
  if (out_dir != nullptr) {
    artifacts->predictions_path = *out_dir / "predictions.json";
    save_predictions(preds, artifacts->predictions_path);
  }
  const bool hungarian = config.mode == "unsup" && config.constraints == "none";
  return evaluate_predictions(eval, preds, hungarian);
}

}  // namespace

void write_report(const EvalReport& report, const RunConfig& config,
                  const std::filesystem::path& path) {
  json j;
  j["format_version"] = 1;
  j["metadata"] = {{"version", kVersionString},
                   {"seed", config.train.seed},
                   {"config_hash", fnv1a_hex(config.to_json_text())}};
  json arr = json::array();
  for (const TaskMetrics& tm : report.per_task) arr.push_back(task_metrics_to_json(tm));
  j["per_task"] = arr;
  j["average"] = task_metrics_to_json(report.average);
  j["notes"] = report.notes;
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write report: " + path.string());
  out << j.dump(2) << "\n";
}

RunResult run_experiment(const LoadedDataset& train, const LoadedDataset* eval,
                         const RunConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  {
    std::ofstream cfg(out_dir / "config.json");
    cfg << config.to_json_text() << "\n";
  }

  RunResult result;
  if (config.splits <= 0) {
    const Dataset& eval_ds = eval != nullptr ? eval->dataset : train.dataset;
    result.report = run_once(train, eval_ds, config, &out_dir, &result);
  } else {
    // Random-splits protocol: per split, sample train_per_task videos per
    // task (without replacement) for training, evaluate on the rest.
    if (eval != nullptr)
      throw ValidationError("config: splits mode uses a single dataset");
    Rng rng(config.train.seed);
    std::vector<EvalReport> split_reports;
    for (int s = 0; s < config.splits; ++s) {
      LoadedDataset tr;
      tr.groups = train.groups;
      Dataset ev;
      tr.dataset.tasks = train.dataset.tasks;
      ev.tasks = train.dataset.tasks;
      for (const TaskDefinition& task : train.dataset.tasks) {
        auto vids = train.dataset.videos_of_task(task.task_id);
        std::vector<int> order(vids.size());
        std::iota(order.begin(), order.end(), 0);
        for (int i = static_cast<int>(order.size()) - 1; i > 0; --i)
          std::swap(order[i], order[rng.uniform_int(0, i)]);
        const int k = std::min<int>(config.train_per_task, static_cast<int>(vids.size()));
        for (std::size_t i = 0; i < order.size(); ++i)
          (static_cast<int>(i) < k ? tr.dataset : ev).videos.push_back(*vids[order[i]]);
      }
      if (ev.videos.empty())
        throw ValidationError("splits: no evaluation videos left; lower train_per_task");
      EvalReport rep = run_once(tr, ev, config, nullptr, nullptr);
      write_report(rep, config, out_dir / ("report_split" + std::to_string(s) + ".json"));
      split_reports.push_back(std::move(rep));
    }
    // Average per-task rows across splits, then re-average over tasks.
    std::map<std::string, std::vector<TaskMetrics>> rows;
    std::vector<std::string> order;
    for (const EvalReport& rep : split_reports)
      for (const TaskMetrics& tm : rep.per_task) {
        if (rows.find(tm.task_id) == rows.end()) order.push_back(tm.task_id);
        rows[tm.task_id].push_back(tm);
      }
    for (const std::string& task_id : order) {
      TaskMetrics avg = average_rows(rows[task_id], task_id);
      avg.num_videos = rows[task_id].front().num_videos;
      result.report.per_task.push_back(avg);
    }
    result.report.average = average_rows(result.report.per_task, "average");
    result.report.notes.push_back("averaged over " + std::to_string(config.splits) +
                                  " random splits");
  }

  result.report_path = out_dir / "report.json";
  write_report(result.report, config, result.report_path);
  return result;
}

}  // namespace seglab
