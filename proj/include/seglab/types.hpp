#pragma once

#include <Eigen/Core>
#include <compare>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace seglab {

/// Raised for malformed inputs (datasets, configs, files). Maps to exit
/// code 1 at the CLI; everything else maps to 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A timestep label: either one of the owning task's steps or background.
/// Stored as the step index, with -1 for background.
class Label {
 public:
  static constexpr int kBackgroundRaw = -1;

  Label() = default;
  static Label background() { return Label(); }
  static Label step(int index) {
    if (index < 0) throw std::invalid_argument("step index must be >= 0");
    Label l;
    l.value_ = index;
    return l;
  }
  static Label from_raw(int raw) {
    return raw < 0 ? background() : step(raw);
  }

  bool is_background() const { return value_ < 0; }
  bool is_step() const { return value_ >= 0; }
  int step_index() const {
    if (!is_step()) throw std::logic_error("background label has no step index");
    return value_;
  }
  int raw() const { return value_; }

  auto operator<=>(const Label&) const = default;

 private:
  int value_ = kBackgroundRaw;
};

/// Half-open interval of timesteps [begin, end).
struct Interval {
  int begin = 0;
  int end = 0;

  int length() const { return end - begin; }
  bool contains(int t) const { return t >= begin && t < end; }
};

/// A reference annotation: a step occurring over a span of timesteps.
struct AnnotatedInterval {
  int step = 0;
  Interval span;
};

/// One task: an id plus its step vocabulary in canonical order.
struct TaskDefinition {
  std::string task_id;
  std::vector<std::string> steps;

  int num_steps() const { return static_cast<int>(steps.size()); }
  std::optional<int> step_index(std::string_view name) const;
};

/// One video: per-timestep features plus optional reference annotations and
/// narration constraint intervals. One timestep is one second; features must
/// already be at that granularity.
struct VideoInstance {
  std::string video_id;
  std::string task_id;
  Eigen::MatrixXd features;  // T x F

  bool has_reference = false;
  std::vector<AnnotatedInterval> reference;

  bool has_narration = false;
  std::map<int, std::vector<Interval>> narration_constraints;  // step -> spans

  int num_timesteps() const { return static_cast<int>(features.rows()); }
  int feature_dim() const { return static_cast<int>(features.cols()); }
};

/// A labeled region: contiguous run of timesteps sharing one label.
struct Region {
  Label label;
  int duration = 0;

  bool operator==(const Region&) const = default;
};

/// Ordered regions partitioning a video. Sum of durations equals the video
/// length; every duration is >= 1.
struct Segmentation {
  std::vector<Region> regions;

  int num_regions() const { return static_cast<int>(regions.size()); }
  int total_duration() const;
  void check() const;  // throws on a zero/negative duration

  bool operator==(const Segmentation&) const = default;
};

using FrameLabeling = std::vector<Label>;

struct Dataset {
  std::vector<TaskDefinition> tasks;
  std::vector<VideoInstance> videos;

  int num_videos() const { return static_cast<int>(videos.size()); }
  const TaskDefinition* find_task(std::string_view task_id) const;
  std::vector<const VideoInstance*> videos_of_task(std::string_view task_id) const;
};

/// Resolve possibly-overlapping reference intervals to one label per
/// timestep: covered timesteps get the covering step earliest in canonical
/// order, everything else is background.
FrameLabeling resolve_multilabel(const VideoInstance& video, const TaskDefinition& task);

FrameLabeling segmentation_to_frames(const Segmentation& seg);
Segmentation frames_to_segmentation(const FrameLabeling& frames);

struct ValidationIssue {
  std::string where;  // video id, task id, or "" for dataset-level
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;

  bool ok() const { return issues.empty(); }
  std::string to_string() const;
};

/// Checks every dataset invariant (interval bounds, dangling task ids,
/// feature dimensionality per task, duplicate ids) and reports all
/// violations rather than stopping at the first.
ValidationReport validate_dataset(const Dataset& ds);

}  // namespace seglab
