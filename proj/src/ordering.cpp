#include "seglab/ordering.hpp"

#include <algorithm>
#include <cmath>

#include "seglab/logmath.hpp"

namespace seglab {

OrderedStateSpace build_ordered_space(const TaskDefinition& task) {
  const int S = task.num_steps();
  if (S < 1) throw ValidationError("build_ordered_space: task has no steps");

  OrderedStateSpace out;
  out.num_steps = S;
  // Interleave: bkg_0, s_1, bkg_1, ..., s_S, bkg_S.
  for (int j = 0; j <= S; ++j) {
    out.space.base.push_back(Label::background());
    out.space.cls.push_back(S);
    out.space.names.push_back("bkg" + std::to_string(j));
    if (j < S) {
      out.space.base.push_back(Label::step(j));
      out.space.cls.push_back(j);
      out.space.names.push_back(task.steps[j]);
    }
  }
  // Layout: bkg_i at index 2i, step j at index 2j+1.
  const int L = out.num_states();
  out.initial_allowed.assign(L, false);
  out.terminal_allowed.assign(L, false);
  out.transition_allowed.assign(L, std::vector<bool>(L, false));

  out.initial_allowed[out.background_state(0)] = true;
  out.initial_allowed[out.step_state(0)] = true;
  out.terminal_allowed[out.step_state(S - 1)] = true;
  out.terminal_allowed[out.background_state(S)] = true;

  for (int j = 0; j < S; ++j) {
    // bkg_j -> s_{j+1}
    out.transition_allowed[out.background_state(j)][out.step_state(j)] = true;
    // s_{j+1} -> bkg_{j+1}
    out.transition_allowed[out.step_state(j)][out.background_state(j + 1)] = true;
    // s_j -> s_{j+1}
    if (j + 1 < S)
      out.transition_allowed[out.step_state(j)][out.step_state(j + 1)] = true;
  }
  return out;
}

StructureSupport full_support(int num_states) {
  StructureSupport s;
  s.initial.assign(num_states, true);
  s.transition.assign(num_states, std::vector<bool>(num_states, true));
  s.terminal.assign(num_states, true);
  return s;
}

StructureSupport support_of(const OrderedStateSpace& ordered) {
  StructureSupport s;
  s.initial = ordered.initial_allowed;
  s.transition = ordered.transition_allowed;
  s.terminal = ordered.terminal_allowed;
  return s;
}

namespace {

// Renormalizes base log-weights over an allowed subset; disallowed -> -inf.
Eigen::VectorXd renormalize(const Eigen::VectorXd& weights, const std::vector<bool>& allowed) {
  const int n = static_cast<int>(weights.size());
  Eigen::VectorXd out = Eigen::VectorXd::Constant(n, kNegInf);
  double norm = kNegInf;
  for (int i = 0; i < n; ++i)
    if (allowed[i]) norm = log_add(norm, weights[i]);
  for (int i = 0; i < n; ++i) {
    if (!allowed[i]) continue;
    // Degenerate base rows (all -inf on the allowed set) fall back to
    // uniform over the allowed entries.
    out[i] = norm == kNegInf
                 ? -std::log(static_cast<double>(std::count(allowed.begin(), allowed.end(), true)))
                 : weights[i] - norm;
  }
  return out;
}

}  // namespace

ModelParams constrain_params(const ModelParams& base, const OrderedStateSpace& ordered) {
  const int S = ordered.num_steps;
  if (base.num_classes() != S + 1)
    throw ValidationError("constrain_params: base model classes do not match the task");
  // Base is the plain space: state j = step j, state S = background.
  const int L = ordered.num_states();

  ModelParams out;
  out.space = ordered.space;
  out.dur_mean = base.dur_mean;
  out.emit_mean = base.emit_mean;
  out.var_diag = base.var_diag;
  out.max_duration = base.max_duration;
  out.final_duration_survival = base.final_duration_survival;

  // Plain-space states coincide with parameter classes (step j = state j,
  // background = state S), so the class map recovers the base state.
  auto base_state = [&](int expanded) { return ordered.space.cls[expanded]; };

  Eigen::VectorXd init_w(L);
  for (int r = 0; r < L; ++r) init_w[r] = base.init_log[base_state(r)];
  out.init_log = renormalize(init_w, ordered.initial_allowed);

  out.trans_log = Eigen::MatrixXd::Constant(L, L, kNegInf);
  for (int from = 0; from < L; ++from) {
    bool any = false;
    for (int to = 0; to < L; ++to) any = any || ordered.transition_allowed[from][to];
    if (!any) continue;  // absorbing terminal background
    Eigen::VectorXd row(L);
    for (int to = 0; to < L; ++to)
      row[to] = base.trans_log(base_state(from), base_state(to));
    out.trans_log.row(from) = renormalize(row, ordered.transition_allowed[from]).transpose();
  }

  out.final_log = Eigen::VectorXd::Constant(L, kNegInf);
  for (int r = 0; r < L; ++r)
    if (ordered.terminal_allowed[r]) out.final_log[r] = 0.0;
  return out;
}

EmissionMask narration_mask(const VideoInstance& video, int num_classes, double penalty) {
  const int T = video.num_timesteps();
  EmissionMask mask;
  mask.penalty = Eigen::MatrixXd::Zero(T, num_classes);
  for (const auto& [step, spans] : video.narration_constraints) {
    if (step < 0 || step >= num_classes - 1)
      throw ValidationError("narration_mask: constraint references unknown step index " +
                            std::to_string(step));
    for (const Interval& span : spans)
      if (span.begin < 0 || span.end > T)
        throw ValidationError("narration_mask: interval out of range in video '" +
                              video.video_id + "'");
    for (int t = 0; t < T; ++t) {
      bool allowed = false;
      for (const Interval& span : spans)
        if (span.contains(t)) {
          allowed = true;
          break;
        }
      if (!allowed) mask.penalty(t, step) = penalty;
    }
  }
  return mask;
}

Segmentation merge_background(const Segmentation& seg) {
  Segmentation out;
  for (const Region& r : seg.regions) {
    if (!out.regions.empty() && out.regions.back().label == r.label)
      out.regions.back().duration += r.duration;
    else
      out.regions.push_back(r);
  }
  return out;
}

}  // namespace seglab
