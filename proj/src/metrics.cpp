#include "seglab/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace seglab {

double all_frame_accuracy(const FrameLabeling& pred, const FrameLabeling& ref) {
  if (pred.size() != ref.size() || pred.empty())
    throw ValidationError("all_frame_accuracy: length mismatch");
  int correct = 0;
  for (std::size_t t = 0; t < pred.size(); ++t)
    if (pred[t] == ref[t]) ++correct;
  return static_cast<double>(correct) / pred.size();
}

std::optional<double> step_frame_accuracy(const FrameLabeling& pred, const FrameLabeling& ref) {
  if (pred.size() != ref.size() || pred.empty())
    throw ValidationError("step_frame_accuracy: length mismatch");
  int correct = 0, total = 0;
  for (std::size_t t = 0; t < pred.size(); ++t) {
    if (!ref[t].is_step()) continue;
    ++total;
    if (pred[t] == ref[t]) ++correct;
  }
  if (total == 0) return std::nullopt;
  return static_cast<double>(correct) / total;
}

RecallCounts step_recall_counts(const FrameLabeling& pred, const FrameLabeling& ref,
                                int num_steps) {
  if (pred.size() != ref.size())
    throw ValidationError("step_recall_counts: length mismatch");
  RecallCounts counts;
  for (int s = 0; s < num_steps; ++s) {
    bool in_ref = false;
    for (const Label& l : ref)
      if (l.is_step() && l.step_index() == s) {
        in_ref = true;
        break;
      }
    if (in_ref) ++counts.possible;

    // The representative frame: closest to the midpoint of the predicted
    // temporal extent for this type, earlier frame on ties.
    int first = -1, last = -1;
    for (int t = 0; t < static_cast<int>(pred.size()); ++t)
      if (pred[t].is_step() && pred[t].step_index() == s) {
        if (first < 0) first = t;
        last = t;
      }
    if (first < 0) continue;
    const int midpoint = (first + last) / 2;
    int selected = -1, best_dist = std::numeric_limits<int>::max();
    for (int t = first; t <= last; ++t) {
      if (!(pred[t].is_step() && pred[t].step_index() == s)) continue;
      const int dist = std::abs(t - midpoint);
      if (dist < best_dist) {
        best_dist = dist;
        selected = t;
      }
    }
    if (in_ref && ref[selected].is_step() && ref[selected].step_index() == s)
      ++counts.recovered;
  }
  return counts;
}

double sequence_similarity(const Segmentation& pred, const Segmentation& ref) {
  std::vector<Label> a, b;
  for (const Region& r : pred.regions) a.push_back(r.label);
  for (const Region& r : ref.regions) b.push_back(r.label);
  if (a.empty() && b.empty()) return 100.0;

  const std::size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1), cur(m + 1);
  for (std::size_t j = 0; j <= m; ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= n; ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= m; ++j) {
      const int subst = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, subst});
    }
    std::swap(prev, cur);
  }
  const int dist = prev[m];
  const int max_dist = static_cast<int>(std::max(n, m));
  return 100.0 * (1.0 - static_cast<double>(dist) / max_dist);
}

double background_pct(const FrameLabeling& pred) {
  if (pred.empty()) throw ValidationError("background_pct: empty labeling");
  int bkg = 0;
  for (const Label& l : pred)
    if (l.is_background()) ++bkg;
  return 100.0 * bkg / pred.size();
}

int num_step_segments(const Segmentation& seg) {
  int count = 0;
  for (const Region& r : seg.regions)
    if (r.label.is_step()) ++count;
  return count;
}

std::vector<int> hungarian_assign(const AssignmentMatrix& m) {
  const int n = static_cast<int>(std::max(m.rows(), m.cols()));
  // Shortest-augmenting-path assignment on the negated (zero-padded) matrix.
  Eigen::MatrixXd cost = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) cost(i, j) = -static_cast<double>(m(i, j));

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0), v(n + 1, 0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = -1;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] > 0) row_to_col[p[j] - 1] = j - 1;
  row_to_col.resize(m.rows());
  return row_to_col;
}

VideoMetrics evaluate_video(const std::string& video_id, const std::string& task_id,
                            const FrameLabeling& pred, const FrameLabeling& ref, int num_steps) {
  VideoMetrics vm;
  vm.video_id = video_id;
  vm.task_id = task_id;
  vm.all_frame_acc = all_frame_accuracy(pred, ref);
  vm.step_frame_acc = step_frame_accuracy(pred, ref);
  vm.recall = step_recall_counts(pred, ref, num_steps);
  const Segmentation pred_seg = frames_to_segmentation(pred);
  vm.seq_sim = sequence_similarity(pred_seg, frames_to_segmentation(ref));
  vm.bkg_pct = background_pct(pred);
  vm.step_segments = num_step_segments(pred_seg);
  return vm;
}

EvalReport aggregate(const std::vector<VideoMetrics>& videos) {
  EvalReport report;
  std::vector<std::string> task_order;
  std::map<std::string, std::vector<const VideoMetrics*>> by_task;
  for (const VideoMetrics& vm : videos) {
    if (by_task.find(vm.task_id) == by_task.end()) task_order.push_back(vm.task_id);
    by_task[vm.task_id].push_back(&vm);
  }

  for (const std::string& task_id : task_order) {
    const auto& vms = by_task[task_id];
    if (vms.empty()) {
      report.notes.push_back("task '" + task_id + "' has no videos; excluded");
      continue;
    }
    TaskMetrics tm;
    tm.task_id = task_id;
    tm.num_videos = static_cast<int>(vms.size());
    int step_acc_n = 0, recovered = 0, possible = 0;
    double step_acc_sum = 0;
    for (const VideoMetrics* vm : vms) {
      tm.all_frame_accuracy += 100.0 * vm->all_frame_acc;
      if (vm->step_frame_acc) {
        step_acc_sum += 100.0 * *vm->step_frame_acc;
        ++step_acc_n;
      }
      recovered += vm->recall.recovered;
      possible += vm->recall.possible;
      tm.sequence_similarity += vm->seq_sim;
      tm.predicted_background += vm->bkg_pct;
      tm.num_step_segments += vm->step_segments;
    }
    tm.all_frame_accuracy /= tm.num_videos;
    tm.sequence_similarity /= tm.num_videos;
    tm.predicted_background /= tm.num_videos;
    tm.num_step_segments /= tm.num_videos;
    if (step_acc_n > 0) {
      tm.step_frame_accuracy = step_acc_sum / step_acc_n;
    } else {
      report.notes.push_back("task '" + task_id + "' has no reference step frames");
    }
    tm.step_recall = possible > 0 ? 100.0 * recovered / possible : 0.0;
    if (possible == 0)
      report.notes.push_back("task '" + task_id + "' has no reference steps for recall");
    report.per_task.push_back(tm);
  }

  TaskMetrics& avg = report.average;
  avg.task_id = "average";
  for (const TaskMetrics& tm : report.per_task) {
    avg.num_videos += tm.num_videos;
    avg.all_frame_accuracy += tm.all_frame_accuracy;
    avg.step_frame_accuracy += tm.step_frame_accuracy;
    avg.step_recall += tm.step_recall;
    avg.sequence_similarity += tm.sequence_similarity;
    avg.predicted_background += tm.predicted_background;
    avg.num_step_segments += tm.num_step_segments;
  }
  const int n = static_cast<int>(report.per_task.size());
  if (n > 0) {
    avg.all_frame_accuracy /= n;
    avg.step_frame_accuracy /= n;
    avg.step_recall /= n;
    avg.sequence_similarity /= n;
    avg.predicted_background /= n;
    avg.num_step_segments /= n;
  }
  return report;
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  os << std::fixed << std::setprecision(1);
  os << std::left << std::setw(24) << "task" << std::right << std::setw(7) << "videos"
     << std::setw(9) << "all-acc" << std::setw(10) << "step-acc" << std::setw(8) << "recall"
     << std::setw(9) << "seq-sim" << std::setw(7) << "bkg%" << std::setw(7) << "segs" << "\n";
  auto row = [&](const TaskMetrics& tm) {
    os << std::left << std::setw(24) << tm.task_id << std::right << std::setw(7)
       << tm.num_videos << std::setw(9) << tm.all_frame_accuracy << std::setw(10)
       << tm.step_frame_accuracy << std::setw(8) << tm.step_recall << std::setw(9)
       << tm.sequence_similarity << std::setw(7) << tm.predicted_background << std::setw(7)
       << tm.num_step_segments << "\n";
  };
  for (const TaskMetrics& tm : per_task) row(tm);
  row(average);
  return os.str();
}

}  // namespace seglab
