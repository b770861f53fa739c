#include "seglab/types.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace seglab {

std::optional<int> TaskDefinition::step_index(std::string_view name) const {
  for (int i = 0; i < num_steps(); ++i)
    if (steps[i] == name) return i;
  return std::nullopt;
}

int Segmentation::total_duration() const {
  int total = 0;
  for (const Region& r : regions) total += r.duration;
  return total;
}

void Segmentation::check() const {
  for (const Region& r : regions)
    if (r.duration < 1)
      throw ValidationError("segmentation region with duration < 1");
}

const TaskDefinition* Dataset::find_task(std::string_view task_id) const {
  for (const TaskDefinition& t : tasks)
    if (t.task_id == task_id) return &t;
  return nullptr;
}

std::vector<const VideoInstance*> Dataset::videos_of_task(std::string_view task_id) const {
  std::vector<const VideoInstance*> out;
  for (const VideoInstance& v : videos)
    if (v.task_id == task_id) out.push_back(&v);
  return out;
}

FrameLabeling resolve_multilabel(const VideoInstance& video, const TaskDefinition& task) {
  if (!video.has_reference)
    throw ValidationError("resolve_multilabel: video '" + video.video_id +
                          "' has no reference annotations");
  const int T = video.num_timesteps();
  FrameLabeling frames(T, Label::background());
  // Earliest-in-canonical-order wins, so a timestep keeps the smallest step
  // index among the intervals covering it.
  std::vector<int> best(T, -1);
  for (const AnnotatedInterval& a : video.reference) {
    if (a.step < 0 || a.step >= task.num_steps())
      throw ValidationError("resolve_multilabel: interval references unknown step index " +
                            std::to_string(a.step) + " in video '" + video.video_id + "'");
    for (int t = std::max(0, a.span.begin); t < std::min(T, a.span.end); ++t)
      if (best[t] < 0 || a.step < best[t]) best[t] = a.step;
  }
  for (int t = 0; t < T; ++t)
    if (best[t] >= 0) frames[t] = Label::step(best[t]);
  return frames;
}

FrameLabeling segmentation_to_frames(const Segmentation& seg) {
  seg.check();
  FrameLabeling frames;
  frames.reserve(seg.total_duration());
  for (const Region& r : seg.regions)
    frames.insert(frames.end(), r.duration, r.label);
  return frames;
}

Segmentation frames_to_segmentation(const FrameLabeling& frames) {
  if (frames.empty())
    throw ValidationError("frames_to_segmentation: empty labeling");
  Segmentation seg;
  Region cur{frames[0], 1};
  for (std::size_t t = 1; t < frames.size(); ++t) {
    if (frames[t] == cur.label) {
      ++cur.duration;
    } else {
      seg.regions.push_back(cur);
      cur = Region{frames[t], 1};
    }
  }
  seg.regions.push_back(cur);
  return seg;
}

std::string ValidationReport::to_string() const {
  std::ostringstream os;
  if (ok()) {
    os << "dataset valid\n";
    return os.str();
  }
  for (const ValidationIssue& i : issues) {
    if (!i.where.empty()) os << i.where << ": ";
    os << i.message << "\n";
  }
  return os.str();
}

ValidationReport validate_dataset(const Dataset& ds) {
  ValidationReport report;
  auto add = [&](std::string where, std::string msg) {
    report.issues.push_back({std::move(where), std::move(msg)});
  };

  std::set<std::string> task_ids;
  for (const TaskDefinition& t : ds.tasks) {
    if (!task_ids.insert(t.task_id).second)
      add(t.task_id, "duplicate task id");
    if (t.num_steps() < 1)
      add(t.task_id, "task has no steps");
    std::set<std::string> names(t.steps.begin(), t.steps.end());
    if (static_cast<int>(names.size()) != t.num_steps())
      add(t.task_id, "duplicate step names within task");
  }

  std::map<std::string, int> task_feature_dim;  // first seen F per task
  std::set<std::string> video_ids;
  for (const VideoInstance& v : ds.videos) {
    if (!video_ids.insert(v.video_id).second)
      add(v.video_id, "duplicate video id");
    const TaskDefinition* task = ds.find_task(v.task_id);
    if (task == nullptr) {
      add(v.video_id, "references unknown task '" + v.task_id + "'");
      continue;
    }
    const int T = v.num_timesteps();
    if (T < 1) add(v.video_id, "video has no timesteps");

    auto [it, fresh] = task_feature_dim.emplace(v.task_id, v.feature_dim());
    if (!fresh && it->second != v.feature_dim())
      add(v.video_id, "feature dim " + std::to_string(v.feature_dim()) +
                          " differs from " + std::to_string(it->second) +
                          " used by other videos of task '" + v.task_id + "'");

    auto check_interval = [&](const Interval& span, int step, const char* kind) {
      if (step < 0 || step >= task->num_steps())
        add(v.video_id, std::string(kind) + " references unknown step index " +
                            std::to_string(step));
      if (span.begin < 0 || span.end > T || span.begin >= span.end)
        add(v.video_id, std::string(kind) + " [" + std::to_string(span.begin) + ", " +
                            std::to_string(span.end) + ") out of range for T=" +
                            std::to_string(T));
    };
    if (v.has_reference)
      for (const AnnotatedInterval& a : v.reference)
        check_interval(a.span, a.step, "reference interval");
    if (v.has_narration)
      for (const auto& [step, spans] : v.narration_constraints)
        for (const Interval& span : spans)
          check_interval(span, step, "narration constraint");
  }
  return report;
}

}  // namespace seglab
