#include "seglab.h"

#include <cstring>
#include <sstream>
#include <string>

#include <json.hpp>

#include "seglab/experiment.hpp"
#include "seglab/features.hpp"
#include "seglab/manifest.hpp"
#include "seglab/model_io.hpp"
#include "seglab/synth.hpp"
#include "seglab/types.hpp"
#include "seglab/viz.hpp"

namespace {

thread_local std::string g_last_error;

template <typename Fn>
int wrap(Fn&& fn) {
  try {
    fn();
    return SEGLAB_OK;
  } catch (const seglab::ValidationError& e) {
    g_last_error = e.what();
    return SEGLAB_ERR_VALIDATION;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SEGLAB_ERR_RUNTIME;
  } catch (...) {
    g_last_error = "unknown error";
    return SEGLAB_ERR_RUNTIME;
  }
}

char* copy_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

seglab::RunConfig parse_config(const char* config_json) {
  return seglab::RunConfig::from_json_text(config_json != nullptr && *config_json != '\0'
                                               ? config_json
                                               : "{}");
}

}  // namespace

struct seglab_dataset {
  seglab::LoadedDataset data;
};

struct seglab_model {
  seglab::ModelBundle bundle;
};

extern "C" {

const char* seglab_version(void) { return seglab::kVersionString; }

const char* seglab_last_error(void) { return g_last_error.c_str(); }

void seglab_string_free(char* s) { delete[] s; }

int seglab_dataset_open(const char* manifest_path, seglab_dataset** out) {
  return wrap([&] {
    auto* ds = new seglab_dataset{seglab::load_dataset(manifest_path)};
    *out = ds;
  });
}

void seglab_dataset_close(seglab_dataset* ds) { delete ds; }

int seglab_dataset_validate(const seglab_dataset* ds, char** report_text) {
  return wrap([&] {
    const seglab::ValidationReport report = seglab::validate_dataset(ds->data.dataset);
    if (report_text != nullptr) *report_text = copy_string(report.to_string());
    if (!report.ok()) throw seglab::ValidationError(report.to_string());
  });
}

int seglab_dataset_num_tasks(const seglab_dataset* ds) {
  return static_cast<int>(ds->data.dataset.tasks.size());
}

int seglab_dataset_num_videos(const seglab_dataset* ds) {
  return ds->data.dataset.num_videos();
}

int seglab_model_open(const char* path, seglab_model** out) {
  return wrap([&] { *out = new seglab_model{seglab::load_model(path)}; });
}

void seglab_model_close(seglab_model* m) { delete m; }

int seglab_model_save(const seglab_model* m, const char* path) {
  return wrap([&] { seglab::save_model(m->bundle, path); });
}

int seglab_pca_fit(const seglab_dataset* ds, int components, const char* out_model_path,
                   char** stats_text) {
  return wrap([&] {
    std::vector<seglab::FeatureGroupSpec> specs = ds->data.groups;
    for (auto& s : specs) s.components = std::min(components > 0 ? components : 100, s.raw_dim);
    seglab::ModelBundle bundle;
    bundle.pca = seglab::pca_fit(ds->data.dataset, specs);
    seglab::save_model(bundle, out_model_path);
    if (stats_text != nullptr) {
      std::ostringstream os;
      for (const auto& [task_id, groups] : bundle.pca->by_task)
        for (std::size_t g = 0; g < groups.size(); ++g)
          os << task_id << "/" << specs[g].name << ": "
             << 100.0 * groups[g].explained_variance_ratio.sum() << "% variance in "
             << groups[g].effective_components << " components\n";
      *stats_text = copy_string(os.str());
    }
  });
}

int seglab_train(const seglab_dataset* ds, const char* config_json, seglab_model** out) {
  return wrap([&] {
    const seglab::RunConfig config = parse_config(config_json);
    *out = new seglab_model{seglab::train_models(ds->data, config)};
  });
}

int seglab_predict(const seglab_dataset* ds, const seglab_model* m, const char* config_json,
                   const char* out_predictions_path) {
  return wrap([&] {
    seglab::RunConfig config = parse_config(config_json);
    if (config.mode.empty() && config.baseline == "none") config.mode = "unsup";
    const seglab::PredictionSet preds =
        seglab::predict_all(m->bundle, ds->data.dataset, config);
    seglab::save_predictions(preds, out_predictions_path);
  });
}

int seglab_evaluate(const seglab_dataset* ds, const char* predictions_path, int hungarian,
                    const char* out_report_path, char** report_table) {
  return wrap([&] {
    const seglab::PredictionSet preds = seglab::load_predictions(predictions_path);
    const seglab::EvalReport report =
        seglab::evaluate_predictions(ds->data.dataset, preds, hungarian != 0);
    if (out_report_path != nullptr && *out_report_path != '\0')
      seglab::write_report(report, seglab::RunConfig{}, out_report_path);
    if (report_table != nullptr) *report_table = copy_string(report.to_table());
  });
}

int seglab_synth(const char* spec_json, const char* out_dir) {
  return wrap([&] {
    const nlohmann::json j = nlohmann::json::parse(spec_json != nullptr ? spec_json : "{}");
    seglab::SynthSpec spec;
    spec.num_tasks = j.value("tasks", spec.num_tasks);
    spec.steps = j.value("steps", spec.steps);
    spec.videos = j.value("videos", spec.videos);
    spec.t_min = j.value("t_min", spec.t_min);
    spec.t_max = j.value("t_max", spec.t_max);
    spec.separation = j.value("separation", spec.separation);
    spec.feature_dim = j.value("feature_dim", spec.feature_dim);
    spec.bg_fraction = j.value("bg_fraction", spec.bg_fraction);
    spec.step_duration_mean = j.value("step_duration_mean", spec.step_duration_mean);
    spec.seed = j.value("seed", spec.seed);
    spec.narration = j.value("narration", spec.narration);
    spec.narration_pad = j.value("narration_pad", spec.narration_pad);
    seglab::write_synth(seglab::synth_generate(spec), out_dir);
  });
}

int seglab_visualize(const seglab_dataset* ds, const char* predictions_path,
                     const char* out_dir) {
  return wrap([&] {
    const seglab::PredictionSet preds = seglab::load_predictions(predictions_path);
    std::filesystem::create_directories(out_dir);
    for (const seglab::PredictedVideo& pv : preds) {
      seglab::Timeline timeline;
      timeline.video_id = pv.video_id;
      timeline.num_timesteps = pv.seg.total_duration();
      timeline.rows.push_back({"pred", pv.seg});
      for (const seglab::VideoInstance& v : ds->data.dataset.videos) {
        if (v.video_id != pv.video_id || !v.has_reference) continue;
        const seglab::TaskDefinition* task = ds->data.dataset.find_task(v.task_id);
        timeline.rows.push_back(
            {"GT", seglab::frames_to_segmentation(seglab::resolve_multilabel(v, *task))});
      }
      seglab::write_svg(timeline, std::filesystem::path(out_dir) / (pv.video_id + ".svg"));
    }
  });
}

int seglab_run(const char* manifest_path, const char* eval_manifest_path,
               const char* config_json, const char* out_dir, char** report_table) {
  return wrap([&] {
    const seglab::RunConfig config = parse_config(config_json);
    const seglab::LoadedDataset train = seglab::load_dataset(manifest_path);
    std::optional<seglab::LoadedDataset> eval;
    if (eval_manifest_path != nullptr && *eval_manifest_path != '\0')
      eval = seglab::load_dataset(eval_manifest_path);
    const seglab::RunResult result =
        seglab::run_experiment(train, eval ? &*eval : nullptr, config, out_dir);
    if (report_table != nullptr) *report_table = copy_string(result.report.to_table());
  });
}

}  // extern "C"
