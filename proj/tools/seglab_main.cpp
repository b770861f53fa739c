// Command-line front end. Talks to the library exclusively through the C
// API in seglab.h; exit codes follow the library's error codes (0 ok,
// 1 validation, 2 runtime).

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "seglab.h"

namespace {

int fail(int code) {
  std::fprintf(stderr, "error: %s\n", seglab_last_error());
  return code;
}

void print_and_free(char* text) {
  if (text == nullptr) return;
  std::fputs(text, stdout);
  seglab_string_free(text);
}

struct TrainFlags {
  double learning_rate = 5e-3;
  int batch_size = 5;
  double decay_factor = 0.5;
  int patience = 1;
  int max_epochs = 50;
  double smoothing = 0.1;
  int max_duration = 0;
};

struct ConfigFlags {
  std::string mode;
  std::string constraints = "none";
  std::string baseline = "none";
  std::uint64_t seed = 0;
  bool seed_given = false;
  int pca_components = 0;
  double mask_penalty = -1e4;
  bool hard_narration = false;
  bool hmm = false;
  double bg_fraction = -1;
  bool survival = false;
  int decode_max_duration = 0;
  int splits = 0;
  int train_per_task = 30;
  TrainFlags train;

  std::string to_json() const {
    std::ostringstream os;
    os << "{"
       << "\"mode\":\"" << mode << "\","
       << "\"constraints\":\"" << constraints << "\","
       << "\"baseline\":\"" << baseline << "\","
       << "\"pca_components\":" << pca_components << ","
       << "\"mask_penalty\":" << mask_penalty << ","
       << "\"hard_narration\":" << (hard_narration ? "true" : "false") << ","
       << "\"hmm\":" << (hmm ? "true" : "false") << ","
       << "\"bg_fraction\":" << bg_fraction << ","
       << "\"final_duration_survival\":" << (survival ? "true" : "false") << ","
       << "\"decode_max_duration\":" << decode_max_duration << ","
       << "\"splits\":" << splits << ","
       << "\"train_per_task\":" << train_per_task << ","
       << "\"train\":{"
       << "\"learning_rate\":" << train.learning_rate << ","
       << "\"batch_size\":" << train.batch_size << ","
       << "\"decay_factor\":" << train.decay_factor << ","
       << "\"patience\":" << train.patience << ","
       << "\"max_epochs\":" << train.max_epochs << ","
       << "\"seed\":" << seed << ","
       << "\"smoothing\":" << train.smoothing << ","
       << "\"max_duration\":" << train.max_duration << "}}";
    return os.str();
  }

  bool stochastic() const {
    if (baseline == "bkg" || baseline == "uniform") return false;
    if (mode == "gen-sup" && baseline == "none") return false;
    return true;
  }
};

void add_config_flags(CLI::App* cmd, ConfigFlags& cfg, bool with_mode) {
  if (with_mode) {
    cmd->add_option("--mode", cfg.mode, "unsup | gen-sup | disc-sup");
    cmd->add_option("--constraints", cfg.constraints, "none | ord | narr | ord+narr");
    cmd->add_option("--baseline", cfg.baseline, "none | bkg | sample | uniform");
  }
  cmd->add_option("--seed", cfg.seed, "RNG seed (required for stochastic commands)")
      ->each([&cfg](const std::string&) { cfg.seed_given = true; });
  cmd->add_option("--pca", cfg.pca_components, "PCA components per feature group (0 = off)");
  cmd->add_option("--mask-penalty", cfg.mask_penalty, "narration penalty (log scale)");
  cmd->add_flag("--hard-narration", cfg.hard_narration, "use -inf narration penalties");
  cmd->add_flag("--hmm", cfg.hmm, "duration ablation: all durations fixed to one timestep");
  cmd->add_option("--bg-fraction", cfg.bg_fraction,
                  "background fraction for the uniform baseline (default: corpus average)");
  cmd->add_flag("--final-survival", cfg.survival,
                "score the boundary region with duration tail mass");
  cmd->add_option("--decode-max-duration", cfg.decode_max_duration,
                  "override the model's duration cap at decode");
  cmd->add_option("--lr", cfg.train.learning_rate, "learning rate");
  cmd->add_option("--batch-size", cfg.train.batch_size, "videos per training batch");
  cmd->add_option("--decay", cfg.train.decay_factor, "learning-rate decay factor");
  cmd->add_option("--patience", cfg.train.patience, "epochs without improvement before decay");
  cmd->add_option("--epochs", cfg.train.max_epochs, "training epochs");
  cmd->add_option("--smoothing", cfg.train.smoothing, "add-k smoothing for supervised counts");
  cmd->add_option("--max-duration", cfg.train.max_duration, "duration cap during training");
}

int require_seed(const ConfigFlags& cfg) {
  if (cfg.stochastic() && !cfg.seed_given) {
    std::fprintf(stderr, "error: --seed is required for stochastic commands\n");
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"seglab: semi-Markov action segmentation toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(seglab_version()));

  // validate ------------------------------------------------------------
  std::string manifest;
  auto* validate = app.add_subcommand("validate", "check a dataset manifest");
  validate->add_option("--manifest", manifest, "dataset manifest")->required();

  // pca -----------------------------------------------------------------
  auto* pca = app.add_subcommand("pca", "fit per-task per-group PCA");
  std::string pca_out;
  int pca_components = 100;
  pca->add_option("--manifest", manifest, "dataset manifest")->required();
  pca->add_option("--components", pca_components, "components per feature group");
  pca->add_option("--out", pca_out, "output model file")->required();

  // train ---------------------------------------------------------------
  auto* train = app.add_subcommand("train", "train per-task models");
  ConfigFlags train_cfg;
  std::string train_out;
  train->add_option("--manifest", manifest, "dataset manifest")->required();
  train->add_option("--out", train_out, "output model file")->required();
  add_config_flags(train, train_cfg, true);

  // predict ---------------------------------------------------------------
  auto* predict = app.add_subcommand("predict", "decode videos with a trained model");
  ConfigFlags predict_cfg;
  std::string model_path, pred_out;
  predict->add_option("--manifest", manifest, "dataset manifest")->required();
  predict->add_option("--model", model_path, "model file")->required();
  predict->add_option("--out", pred_out, "output predictions file")->required();
  predict->add_option("--decode-max-duration", predict_cfg.decode_max_duration,
                      "override the model's duration cap");
  predict->add_flag("--final-survival", predict_cfg.survival,
                    "score the boundary region with duration tail mass");

  // eval ----------------------------------------------------------------
  auto* eval = app.add_subcommand("eval", "score predictions against references");
  std::string eval_preds, eval_report;
  bool eval_hungarian = false;
  eval->add_option("--manifest", manifest, "dataset manifest")->required();
  eval->add_option("--predictions", eval_preds, "predictions file")->required();
  eval->add_option("--out", eval_report, "report file (JSON)");
  eval->add_flag("--hungarian", eval_hungarian,
                 "apply the accuracy-maximizing state-to-label assignment");

  // synth ---------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_out;
  int sy_tasks = 1, sy_steps = 3, sy_videos = 50, sy_tmin = 40, sy_tmax = 80, sy_dim = 8;
  double sy_sep = 5.0, sy_bg = 0.4, sy_dur = 6.0;
  std::uint64_t sy_seed = 0;
  bool sy_seed_given = false, sy_narration = false;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--tasks", sy_tasks, "number of tasks");
  synth->add_option("--steps", sy_steps, "steps per task");
  synth->add_option("--videos", sy_videos, "videos per task");
  synth->add_option("--t-min", sy_tmin, "minimum video length");
  synth->add_option("--t-max", sy_tmax, "maximum video length");
  synth->add_option("--separation", sy_sep, "emission mean separation in sigma units");
  synth->add_option("--feature-dim", sy_dim, "feature dimensionality");
  synth->add_option("--bg-fraction", sy_bg, "expected background fraction");
  synth->add_option("--step-duration", sy_dur, "step duration mean");
  synth->add_flag("--narration", sy_narration, "emit narration constraint intervals");
  synth->add_option("--seed", sy_seed, "RNG seed")->each([&](const std::string&) {
    sy_seed_given = true;
  });

  // viz -----------------------------------------------------------------
  auto* viz = app.add_subcommand("viz", "render per-video segmentation timelines");
  std::string viz_preds, viz_out;
  viz->add_option("--manifest", manifest, "dataset manifest")->required();
  viz->add_option("--predictions", viz_preds, "predictions file")->required();
  viz->add_option("--out", viz_out, "output directory")->required();

  // run -----------------------------------------------------------------
  auto* run = app.add_subcommand("run", "end-to-end experiment");
  ConfigFlags run_cfg;
  std::string run_out, eval_manifest, config_file;
  run->add_option("--manifest", manifest, "training dataset manifest")->required();
  run->add_option("--eval-manifest", eval_manifest, "held-out evaluation manifest");
  run->add_option("--out", run_out, "output directory")->required();
  run->add_option("--config", config_file, "config JSON file (flags override nothing)");
  run->add_option("--splits", run_cfg.splits, "random-splits protocol: number of splits");
  run->add_option("--train-per-task", run_cfg.train_per_task, "training videos per task per split");
  add_config_flags(run, run_cfg, true);

  CLI11_PARSE(app, argc, argv);

  if (validate->parsed()) {
    seglab_dataset* ds = nullptr;
    if (int rc = seglab_dataset_open(manifest.c_str(), &ds)) return fail(rc);
    char* text = nullptr;
    const int rc = seglab_dataset_validate(ds, &text);
    print_and_free(text);
    seglab_dataset_close(ds);
    return rc == SEGLAB_OK ? 0 : rc;
  }

  if (pca->parsed()) {
    seglab_dataset* ds = nullptr;
    if (int rc = seglab_dataset_open(manifest.c_str(), &ds)) return fail(rc);
    char* stats = nullptr;
    const int rc = seglab_pca_fit(ds, pca_components, pca_out.c_str(), &stats);
    print_and_free(stats);
    seglab_dataset_close(ds);
    return rc == SEGLAB_OK ? 0 : fail(rc);
  }

  if (train->parsed()) {
    if (int rc = require_seed(train_cfg)) return rc;
    seglab_dataset* ds = nullptr;
    if (int rc = seglab_dataset_open(manifest.c_str(), &ds)) return fail(rc);
    seglab_model* model = nullptr;
    int rc = seglab_train(ds, train_cfg.to_json().c_str(), &model);
    if (rc == SEGLAB_OK) rc = seglab_model_save(model, train_out.c_str());
    seglab_model_close(model);
    seglab_dataset_close(ds);
    return rc == SEGLAB_OK ? 0 : fail(rc);
  }

  if (predict->parsed()) {
    seglab_dataset* ds = nullptr;
    if (int rc = seglab_dataset_open(manifest.c_str(), &ds)) return fail(rc);
    seglab_model* model = nullptr;
    int rc = seglab_model_open(model_path.c_str(), &model);
    if (rc == SEGLAB_OK)
      rc = seglab_predict(ds, model, predict_cfg.to_json().c_str(), pred_out.c_str());
    seglab_model_close(model);
    seglab_dataset_close(ds);
    return rc == SEGLAB_OK ? 0 : fail(rc);
  }

  if (eval->parsed()) {
    seglab_dataset* ds = nullptr;
    if (int rc = seglab_dataset_open(manifest.c_str(), &ds)) return fail(rc);
    char* table = nullptr;
    const int rc = seglab_evaluate(ds, eval_preds.c_str(), eval_hungarian ? 1 : 0,
                                   eval_report.c_str(), &table);
    print_and_free(table);
    seglab_dataset_close(ds);
    return rc == SEGLAB_OK ? 0 : fail(rc);
  }

  if (synth->parsed()) {
    if (!sy_seed_given) {
      std::fprintf(stderr, "error: --seed is required for stochastic commands\n");
      return 1;
    }
    std::ostringstream os;
    os << "{\"tasks\":" << sy_tasks << ",\"steps\":" << sy_steps << ",\"videos\":" << sy_videos
       << ",\"t_min\":" << sy_tmin << ",\"t_max\":" << sy_tmax << ",\"separation\":" << sy_sep
       << ",\"feature_dim\":" << sy_dim << ",\"bg_fraction\":" << sy_bg
       << ",\"step_duration_mean\":" << sy_dur << ",\"seed\":" << sy_seed
       << ",\"narration\":" << (sy_narration ? "true" : "false") << "}";
    const int rc = seglab_synth(os.str().c_str(), synth_out.c_str());
    return rc == SEGLAB_OK ? 0 : fail(rc);
  }

  if (viz->parsed()) {
    seglab_dataset* ds = nullptr;
    if (int rc = seglab_dataset_open(manifest.c_str(), &ds)) return fail(rc);
    const int rc = seglab_visualize(ds, viz_preds.c_str(), viz_out.c_str());
    seglab_dataset_close(ds);
    return rc == SEGLAB_OK ? 0 : fail(rc);
  }

  if (run->parsed()) {
    if (int rc = require_seed(run_cfg)) return rc;
    std::string config_json = run_cfg.to_json();
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) {
        std::fprintf(stderr, "error: cannot read config file %s\n", config_file.c_str());
        return 1;
      }
      std::ostringstream os;
      os << in.rdbuf();
      config_json = os.str();
    }
    char* table = nullptr;
    const int rc = seglab_run(manifest.c_str(),
                              eval_manifest.empty() ? nullptr : eval_manifest.c_str(),
                              config_json.c_str(), run_out.c_str(), &table);
    print_and_free(table);
    return rc == SEGLAB_OK ? 0 : fail(rc);
  }

  return 0;
}
