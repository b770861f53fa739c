#include "seglab/synth.hpp"

#include <cmath>

#include "seglab/lattice.hpp"
#include "seglab/logmath.hpp"
#include "seglab/manifest.hpp"
#include "seglab/random.hpp"

namespace seglab {

void SynthSpec::check() const {
  if (num_tasks < 1 || steps < 1 || videos < 1) throw ValidationError("synth: empty spec");
  if (t_min < 1 || t_max < t_min) throw ValidationError("synth: bad T range");
  if (!(separation > 0)) throw ValidationError("synth: separation must be > 0");
  if (feature_dim < steps + 1)
    throw ValidationError("synth: feature_dim must be >= steps + 1 to place separated means");
  if (bg_fraction < 0 || bg_fraction >= 1)
    throw ValidationError("synth: bg_fraction must be in [0, 1)");
  if (!(step_duration_mean > 0)) throw ValidationError("synth: bad step duration mean");
}

namespace {

// Expected background fraction of the sampling process, averaged over the
// uniform T range, computed exactly from the state-occupancy recursion.
double expected_bg_fraction(const ModelParams& params, int t_min, int t_max) {
  const Eigen::MatrixXd occ = expected_state_marginals(params, t_max);
  const int S = params.num_classes() - 1;  // background state is last
  std::vector<double> bkg_prefix(t_max + 1, 0.0);
  for (int t = 0; t < t_max; ++t) bkg_prefix[t + 1] = bkg_prefix[t] + occ(t, S);
  double total = 0;
  for (int T = t_min; T <= t_max; ++T) total += bkg_prefix[T] / T;
  return total / (t_max - t_min + 1);
}

ModelParams make_truth_params(const SynthSpec& spec, const TaskDefinition& task) {
  const int S = spec.steps;
  ModelParams p;
  p.space = plain_space(task);
  const int L = p.space.num_states();
  const int bkg = S;

  p.init_log = Eigen::VectorXd::Constant(L, kNegInf);
  p.trans_log = Eigen::MatrixXd::Constant(L, L, kNegInf);
  if (spec.bg_fraction > 0) {
    // Alternating structure: background between steps, uniform next step.
    p.init_log[bkg] = std::log(0.5);
    for (int s = 0; s < S; ++s) p.init_log[s] = std::log(0.5 / S);
    for (int s = 0; s < S; ++s) p.trans_log(s, bkg) = 0.0;  // step -> bkg
    for (int s = 0; s < S; ++s) p.trans_log(bkg, s) = std::log(1.0 / S);
  } else {
    for (int s = 0; s < S; ++s) p.init_log[s] = std::log(1.0 / S);
    for (int s = 0; s < S; ++s)
      for (int s2 = 0; s2 < S; ++s2) p.trans_log(s, s2) = std::log(1.0 / S);
  }
  p.final_log = Eigen::VectorXd::Zero(L);

  p.dur_mean = Eigen::VectorXd::Constant(L, spec.step_duration_mean);
  // Unit variances; means on scaled axes give exact pairwise separation.
  p.var_diag = Eigen::VectorXd::Ones(spec.feature_dim);
  p.emit_mean = Eigen::MatrixXd::Zero(L, spec.feature_dim);
  for (int c = 0; c < L; ++c) p.emit_mean(c, c) = spec.separation / std::sqrt(2.0);
  const double bg_guess =
      spec.bg_fraction > 0
          ? std::max(1.0, spec.step_duration_mean * spec.bg_fraction / (1 - spec.bg_fraction))
          : 1.0;
  Eigen::Vector2d provisional(spec.step_duration_mean, bg_guess);
  p.max_duration = default_max_duration(provisional, spec.t_max);

  if (spec.bg_fraction > 0) {
    // Calibrate the background duration mean so the expected background
    // fraction equals the request exactly (monotone in lambda_bkg).
    double lo = 0.1, hi = static_cast<double>(spec.t_max);
    for (int iter = 0; iter < 60; ++iter) {
      const double mid = 0.5 * (lo + hi);
      p.dur_mean[bkg] = mid;
      if (expected_bg_fraction(p, spec.t_min, spec.t_max) < spec.bg_fraction)
        lo = mid;
      else
        hi = mid;
    }
    p.dur_mean[bkg] = 0.5 * (lo + hi);
  }
  p.check();
  return p;
}

}  // namespace

SynthResult synth_generate(const SynthSpec& spec) {
  spec.check();
  Rng rng(spec.seed);
  SynthResult out;

  for (int ti = 0; ti < spec.num_tasks; ++ti) {
    TaskDefinition task;
    task.task_id = "task" + std::to_string(ti + 1);
    for (int s = 0; s < spec.steps; ++s)
      task.steps.push_back("step" + std::to_string(s + 1));
    out.dataset.tasks.push_back(task);

    ModelParams truth = make_truth_params(spec, task);
    out.expected_background_fraction = expected_bg_fraction(truth, spec.t_min, spec.t_max);

    for (int vi = 0; vi < spec.videos; ++vi) {
      const int T = rng.uniform_int(spec.t_min, spec.t_max);
      SampleResult sampled = sample(truth, T, rng);

      VideoInstance video;
      video.video_id = task.task_id + "_v" + std::to_string(vi + 1);
      video.task_id = task.task_id;
      video.features = std::move(sampled.features);
      video.has_reference = true;
      int t = 0;
      for (const Region& r : sampled.seg.regions) {
        if (r.label.is_step())
          video.reference.push_back({r.label.step_index(), {t, t + r.duration}});
        t += r.duration;
      }
      if (spec.narration) {
        video.has_narration = true;
        for (const AnnotatedInterval& a : video.reference) {
          Interval widened{std::max(0, a.span.begin - spec.narration_pad),
                           std::min(T, a.span.end + spec.narration_pad)};
          video.narration_constraints[a.step].push_back(widened);
        }
      }
      out.dataset.videos.push_back(std::move(video));
    }

    TaskModel tm;
    tm.params = std::move(truth);
    out.truth.tasks.emplace(task.task_id, std::move(tm));
  }
  return out;
}

void write_synth(const SynthResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<FeatureGroupSpec> groups;
  FeatureGroupSpec g;
  g.name = "synth";
  g.raw_dim = result.dataset.videos.empty() ? 0 : result.dataset.videos.front().feature_dim();
  groups.push_back(g);
  save_dataset(result.dataset, groups, out_dir / "manifest.json");
  save_model(result.truth, out_dir / "truth_model.json");
}

}  // namespace seglab
