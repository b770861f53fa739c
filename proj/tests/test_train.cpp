#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "seglab/lattice.hpp"
#include "seglab/metrics.hpp"
#include "seglab/synth.hpp"
#include "seglab/train.hpp"

using namespace seglab;

namespace {

TaskDefinition task_with_steps(int S) {
  TaskDefinition task;
  task.task_id = "t";
  for (int s = 0; s < S; ++s) task.steps.push_back("s" + std::to_string(s + 1));
  return task;
}

TaskBatch batch_from_synth(const SynthResult& synth, bool with_labels) {
  TaskBatch batch;
  batch.task = &synth.dataset.tasks[0];
  for (const VideoInstance& v : synth.dataset.videos) {
    batch.video_ids.push_back(v.video_id);
    batch.features.push_back(v.features);
    if (with_labels) batch.labels.push_back(resolve_multilabel(v, *batch.task));
  }
  std::vector<const Eigen::MatrixXd*> ptrs;
  for (const Eigen::MatrixXd& f : batch.features) ptrs.push_back(&f);
  batch.cov = empirical_diag_cov(ptrs);
  return batch;
}

ScoreSet random_scores(const TrainContext& ctx, int feature_dim, Rng& rng) {
  const int L = ctx.space.num_states();
  const int C = ctx.space.num_classes();
  ScoreSet s;
  s.init.resize(L);
  s.trans.resize(L, L);
  s.dur_raw.resize(C);
  s.mean.resize(C, feature_dim);
  for (int i = 0; i < L; ++i) s.init[i] = rng.gaussian();
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j) s.trans(i, j) = rng.gaussian();
  for (int c = 0; c < C; ++c) s.dur_raw[c] = 0.5 + rng.uniform() * 2;
  for (int c = 0; c < C; ++c)
    for (int f = 0; f < feature_dim; ++f) s.mean(c, f) = rng.gaussian();
  return s;
}

// Central finite differences over every score coordinate, compared at
// relative tolerance 1e-3 (step 1e-4).
void gradcheck(const TrainContext& ctx, const ScoreSet& scores,
               const std::function<double(const ScoreSet&)>& objective,
               const ScoreSet& analytic) {
  const double h = 1e-4;
  auto check_coord = [&](double got, auto mutate) {
    ScoreSet up = scores, down = scores;
    mutate(up, +h);
    mutate(down, -h);
    const double fd = (objective(up) - objective(down)) / (2 * h);
    const double denom = std::max({std::abs(fd), std::abs(got), 1e-6});
    CHECK(std::abs(got - fd) / denom <= 1e-3);
  };
  const int L = ctx.space.num_states();
  for (int i = 0; i < L; ++i) {
    if (!ctx.support.initial[i]) continue;
    check_coord(analytic.init[i], [i](ScoreSet& s, double d) { s.init[i] += d; });
  }
  for (int i = 0; i < L; ++i)
    for (int j = 0; j < L; ++j) {
      if (!ctx.support.transition[i][j]) continue;
      check_coord(analytic.trans(i, j), [i, j](ScoreSet& s, double d) { s.trans(i, j) += d; });
    }
  for (int c = 0; c < ctx.space.num_classes(); ++c)
    check_coord(analytic.dur_raw[c], [c](ScoreSet& s, double d) { s.dur_raw[c] += d; });
  for (int c = 0; c < ctx.space.num_classes(); ++c)
    for (int f = 0; f < scores.mean.cols(); ++f)
      check_coord(analytic.mean(c, f), [c, f](ScoreSet& s, double d) { s.mean(c, f) += d; });
}

}  // namespace

TEST_CASE("unsupervised objective gradient matches finite differences") {
  Rng rng(11);
  TrainContext ctx;
  ctx.space = plain_space(task_with_steps(1));  // |L| = 2
  ctx.support = full_support(2);
  ctx.var_diag = Eigen::Vector2d(0.8, 1.6);
  ctx.max_duration = 3;

  const Eigen::MatrixXd X = oracle::random_features(rng, 5, 2);
  const ScoreSet scores = random_scores(ctx, 2, rng);

  SUBCASE("plain") {
    ScoreSet grad = scores;
    grad.set_zero();
    unsup_log_marginal(ctx, scores, X, nullptr, &grad);
    gradcheck(ctx, scores, [&](const ScoreSet& s) {
      return unsup_log_marginal(ctx, s, X, nullptr, nullptr);
    }, grad);
  }

  SUBCASE("with an emission mask") {
    EmissionMask mask;
    mask.penalty = Eigen::MatrixXd::Zero(5, 2);
    mask.penalty(1, 0) = -50;
    mask.penalty(3, 0) = -50;
    ScoreSet grad = scores;
    grad.set_zero();
    unsup_log_marginal(ctx, scores, X, &mask, &grad);
    gradcheck(ctx, scores, [&](const ScoreSet& s) {
      return unsup_log_marginal(ctx, s, X, &mask, nullptr);
    }, grad);
  }

  SUBCASE("with boundary survival scoring") {
    ctx.final_duration_survival = true;
    ScoreSet grad = scores;
    grad.set_zero();
    unsup_log_marginal(ctx, scores, X, nullptr, &grad);
    gradcheck(ctx, scores, [&](const ScoreSet& s) {
      return unsup_log_marginal(ctx, s, X, nullptr, nullptr);
    }, grad);
  }
}

TEST_CASE("unsupervised gradient under the ordered space") {
  Rng rng(12);
  const OrderedStateSpace sp = build_ordered_space(task_with_steps(2));
  TrainContext ctx;
  ctx.space = sp.space;
  ctx.support = support_of(sp);
  ctx.var_diag = Eigen::Vector2d(1.0, 0.5);
  ctx.max_duration = 3;

  const Eigen::MatrixXd X = oracle::random_features(rng, 6, 2);
  const ScoreSet scores = random_scores(ctx, 2, rng);
  ScoreSet grad = scores;
  grad.set_zero();
  unsup_log_marginal(ctx, scores, X, nullptr, &grad);
  gradcheck(ctx, scores, [&](const ScoreSet& s) {
    return unsup_log_marginal(ctx, s, X, nullptr, nullptr);
  }, grad);
}

TEST_CASE("discriminative objective gradient matches finite differences") {
  Rng rng(13);
  TrainContext ctx;
  ctx.space = plain_space(task_with_steps(1));
  ctx.support = full_support(2);
  ctx.var_diag = Eigen::Vector2d(1.0, 1.0);
  ctx.max_duration = 3;

  const Eigen::MatrixXd X = oracle::random_features(rng, 5, 2);
  const std::vector<int> ref_states = {0, 1, 0};
  const std::vector<int> ref_durs = {2, 1, 2};
  const ScoreSet scores = random_scores(ctx, 2, rng);

  ScoreSet grad = scores;
  grad.set_zero();
  const double value = disc_log_conditional(ctx, scores, X, ref_states, ref_durs, &grad);
  CHECK(value <= 1e-12);  // log of a probability
  gradcheck(ctx, scores, [&](const ScoreSet& s) {
    return disc_log_conditional(ctx, s, X, ref_states, ref_durs, nullptr);
  }, grad);
}

TEST_CASE("fit_supervised_generative: sufficient statistics by hand") {
  TaskDefinition task = task_with_steps(2);  // steps s1, s2 + background
  TaskBatch batch;
  batch.task = &task;
  batch.video_ids = {"v"};
  Eigen::MatrixXd X(3, 2);
  X << 1, 0, 3, 2, -1, 4;
  batch.features = {X};
  batch.labels = {{Label::step(0), Label::step(0), Label::step(1)}};
  std::vector<const Eigen::MatrixXd*> ptrs = {&batch.features[0]};
  batch.cov = empirical_diag_cov(ptrs);

  TrainConfig config;
  config.smoothing = 0.1;
  std::vector<std::string> notes;
  const ModelParams p = fit_supervised_generative(batch, config, &notes);

  // Regions [(s1,2),(s2,1)]; three labels -> add-0.1 smoothing over 3.
  CHECK(std::exp(p.init_log[0]) == doctest::Approx(1.1 / 1.3).epsilon(1e-12));
  CHECK(std::exp(p.init_log[1]) == doctest::Approx(0.1 / 1.3).epsilon(1e-12));
  CHECK(std::exp(p.trans_log(0, 1)) == doctest::Approx(1.1 / 1.3).epsilon(1e-12));
  CHECK(std::exp(p.trans_log(0, 0)) == doctest::Approx(0.1 / 1.3).epsilon(1e-12));
  CHECK(std::exp(p.trans_log(1, 0)) == doctest::Approx(1.0 / 3).epsilon(1e-12));

  CHECK(p.dur_mean[0] == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(p.dur_mean[1] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK((p.emit_mean.row(0).transpose() - Eigen::Vector2d(2, 1)).norm() < 1e-12);
  CHECK((p.emit_mean.row(1).transpose() - Eigen::Vector2d(-1, 4)).norm() < 1e-12);
  // Background never observed: falls back to the global mean, noted.
  CHECK((p.emit_mean.row(2).transpose() - Eigen::Vector2d(1, 2)).norm() < 1e-12);
  CHECK(notes.size() == 2);
  CHECK((p.var_diag - batch.cov.variance).norm() == 0.0);
}

TEST_CASE("fit_supervised_generative: duplicating videos changes nothing at k=0") {
  const SynthSpec spec = [] {
    SynthSpec s;
    s.videos = 6;
    s.t_min = 15;
    s.t_max = 25;
    s.seed = 21;
    return s;
  }();
  const SynthResult synth = synth_generate(spec);
  TaskBatch batch = batch_from_synth(synth, true);

  TaskBatch doubled = batch;
  for (int v = 0; v < batch.num_videos(); ++v) {
    doubled.video_ids.push_back(batch.video_ids[v] + "_copy");
    doubled.features.push_back(batch.features[v]);
    doubled.labels.push_back(batch.labels[v]);
  }

  TrainConfig config;
  config.smoothing = 0.0;
  const ModelParams a = fit_supervised_generative(batch, config);
  const ModelParams b = fit_supervised_generative(doubled, config);
  CHECK((a.init_log - b.init_log).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.trans_log - b.trans_log).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((a.dur_mean - b.dur_mean).norm() < 1e-12);
  CHECK((a.emit_mean - b.emit_mean).norm() < 1e-12);
}

TEST_CASE("refit on the model's own samples recovers the parameters") {
  // Fit once on synthetic data, draw complete-region videos from the fit
  // (no boundary truncation, so every sufficient statistic is unbiased),
  // refit without smoothing, and compare within Monte-Carlo error.
  SynthSpec spec;
  spec.videos = 10;
  spec.t_min = 30;
  spec.t_max = 40;
  spec.seed = 22;
  const SynthResult synth = synth_generate(spec);
  TaskBatch batch = batch_from_synth(synth, true);
  TrainConfig fit_config;
  fit_config.smoothing = 0.0;
  const ModelParams fitted = fit_supervised_generative(batch, fit_config);
  const int C = fitted.num_classes();

  Rng rng(23);
  const Eigen::MatrixXd dur_table = duration_log_table(fitted.dur_mean, fitted.max_duration);
  TaskBatch resampled;
  TaskDefinition task = *batch.task;
  resampled.task = &task;
  const int N = 300, regions_per_video = 12;
  Eigen::VectorXd dur_sum = Eigen::VectorXd::Zero(C), dur_sq = Eigen::VectorXd::Zero(C),
                  dur_n = Eigen::VectorXd::Zero(C);
  for (int i = 0; i < N; ++i) {
    FrameLabeling frames;
    std::vector<Eigen::VectorXd> rows;
    int state = rng.categorical_log(fitted.init_log);
    for (int k = 0; k < regions_per_video; ++k) {
      const int d = rng.categorical_log(dur_table.row(state).transpose()) + 1;
      dur_sum[state] += d;
      dur_sq[state] += double(d) * d;
      dur_n[state] += 1;
      for (int u = 0; u < d; ++u) {
        frames.push_back(fitted.space.base[state]);
        Eigen::VectorXd x(fitted.feature_dim());
        for (int f = 0; f < x.size(); ++f)
          x[f] = fitted.emit_mean(state, f) + std::sqrt(fitted.var_diag[f]) * rng.gaussian();
        rows.push_back(std::move(x));
      }
      if (k + 1 < regions_per_video)
        state = rng.categorical_log(fitted.trans_log.row(state).transpose());
    }
    Eigen::MatrixXd X(rows.size(), fitted.feature_dim());
    for (std::size_t r = 0; r < rows.size(); ++r) X.row(r) = rows[r].transpose();
    resampled.video_ids.push_back("r" + std::to_string(i));
    resampled.features.push_back(std::move(X));
    resampled.labels.push_back(std::move(frames));
  }
  std::vector<const Eigen::MatrixXd*> ptrs;
  for (const Eigen::MatrixXd& f : resampled.features) ptrs.push_back(&f);
  resampled.cov = empirical_diag_cov(ptrs);

  const ModelParams refit = fit_supervised_generative(resampled, fit_config);

  // Duration means concentrate on the truncated-pmf mean.
  const Eigen::VectorXd target = truncated_duration_mean(fitted.dur_mean, fitted.max_duration);
  for (int c = 0; c < C; ++c) {
    REQUIRE(dur_n[c] > 50);
    const double sd =
        std::sqrt(std::max(dur_sq[c] / dur_n[c] - std::pow(dur_sum[c] / dur_n[c], 2), 1e-6));
    CHECK(std::abs(refit.dur_mean[c] - target[c]) <= 3 * sd / std::sqrt(dur_n[c]));
  }
  // Emission means, with per-class frame counts.
  for (int c = 0; c < C; ++c) {
    double frames_c = 0;
    for (const FrameLabeling& frames : resampled.labels)
      for (const Label& l : frames)
        frames_c += (l.is_background() ? C - 1 : l.step_index()) == c;
    for (int f = 0; f < fitted.feature_dim(); ++f) {
      const double se = std::sqrt(fitted.var_diag[f] / frames_c);
      CHECK(std::abs(refit.emit_mean(c, f) - fitted.emit_mean(c, f)) <= 4 * se);
    }
  }
  // Transition rows against multinomial error.
  for (int r = 0; r < C; ++r) {
    double row_n = 0;
    for (int c = 0; c < C; ++c) row_n += dur_n[c];
    row_n = dur_n[r] * (regions_per_video - 1.0) / regions_per_video;  // draws from row r
    if (row_n < 30) continue;
    for (int c = 0; c < C; ++c) {
      const double p = std::exp(fitted.trans_log(r, c));
      const double se = std::sqrt(std::max(p * (1 - p), 1e-9) / row_n);
      CHECK(std::abs(std::exp(refit.trans_log(r, c)) - p) <= 4 * se + 1e-9);
    }
  }
}

TEST_CASE("discriminative training drives a separable problem toward zero loss") {
  SynthSpec spec;
  spec.steps = 2;
  spec.videos = 8;
  spec.t_min = 15;
  spec.t_max = 20;
  spec.separation = 8.0;
  spec.feature_dim = 4;
  spec.seed = 24;
  const SynthResult synth = synth_generate(spec);
  TaskBatch batch = batch_from_synth(synth, true);

  TrainConfig config;
  config.seed = 7;
  config.max_epochs = 40;
  const TrainResult result = train_discriminative(batch, config);
  REQUIRE_FALSE(result.aborted);
  for (double obj : result.epoch_objective) CHECK(obj <= 1e-9);
  CHECK(result.epoch_objective.back() > -0.5);  // close to zero

  int correct = 0, total = 0;
  for (int v = 0; v < batch.num_videos(); ++v) {
    const DecodeResult d = viterbi_decode(result.params, batch.features[v]);
    const FrameLabeling frames = segmentation_to_frames(d.seg);
    for (std::size_t t = 0; t < frames.size(); ++t) {
      correct += frames[t] == batch.labels[v][t];
      ++total;
    }
  }
  CHECK(static_cast<double>(correct) / total >= 0.99);
}

TEST_CASE("epoch objective is nondecreasing at a small learning rate") {
  SynthSpec spec;
  spec.steps = 2;
  spec.videos = 4;
  spec.t_min = 12;
  spec.t_max = 16;
  spec.seed = 25;
  const SynthResult synth = synth_generate(spec);
  TaskBatch batch = batch_from_synth(synth, false);

  TrainConfig config;
  config.seed = 3;
  config.learning_rate = 2e-4;
  config.max_epochs = 8;
  const TrainResult result = train_unsupervised(batch, config);
  REQUIRE_FALSE(result.aborted);
  for (std::size_t e = 1; e < result.epoch_objective.size(); ++e)
    CHECK(result.epoch_objective[e] >= result.epoch_objective[e - 1] - 1e-6);
}

TEST_CASE("the supervised optimum is nearly stationary for the marginal objective") {
  SynthSpec spec;
  spec.steps = 3;
  spec.videos = 6;
  spec.t_min = 20;
  spec.t_max = 30;
  spec.separation = 10.0;
  spec.seed = 26;
  const SynthResult synth = synth_generate(spec);
  TaskBatch batch = batch_from_synth(synth, true);

  TrainConfig fit_config;
  fit_config.smoothing = 1e-3;
  const ModelParams fitted = fit_supervised_generative(batch, fit_config);

  TrainContext ctx;
  ctx.space = fitted.space;
  ctx.support = full_support(fitted.num_states());
  ctx.var_diag = fitted.var_diag;
  ctx.max_duration = fitted.max_duration;

  ScoreSet warm;
  warm.init = fitted.init_log;
  warm.trans = fitted.trans_log;
  warm.dur_raw = fitted.dur_mean.unaryExpr(
      [](double l) { return l > 30 ? l : std::log(std::expm1(l)); });
  warm.mean = fitted.emit_mean;

  auto mean_objective = [&](const ScoreSet& s) {
    double total = 0;
    for (const Eigen::MatrixXd& f : batch.features)
      total += unsup_log_marginal(ctx, s, f, nullptr, nullptr);
    return total / batch.num_videos();
  };

  TrainConfig config;
  config.seed = 5;
  config.learning_rate = 1e-3;
  config.max_epochs = 1;
  TaskBatch unlabeled = batch;
  unlabeled.labels.clear();
  const double before = mean_objective(warm);
  const TrainResult warm_run = train_unsupervised(unlabeled, config, nullptr, &warm);
  REQUIRE_FALSE(warm_run.aborted);
  CHECK(std::abs(warm_run.epoch_objective[0] - before) < 1e-3);

  // From a random initialization the same single epoch moves the objective
  // by orders of magnitude more.
  config.max_duration = ctx.max_duration;
  Rng rng(6);
  const ScoreSet cold = initial_scores(ctx, unlabeled, rng);
  const double cold_before = mean_objective(cold);
  const TrainResult cold_run = train_unsupervised(unlabeled, config, nullptr, &cold);
  REQUIRE_FALSE(cold_run.aborted);
  CHECK(std::abs(cold_run.epoch_objective[0] - cold_before) > 1e-1);
}

TEST_CASE("unsupervised training recovers separated synthetic labels") {
  SynthSpec spec;
  spec.steps = 3;
  spec.videos = 20;
  spec.t_min = 40;
  spec.t_max = 60;
  spec.separation = 6.0;
  spec.seed = 27;
  const SynthResult synth = synth_generate(spec);
  TaskBatch batch = batch_from_synth(synth, true);  // labels used for scoring only

  TrainConfig config;
  config.seed = 9;
  config.max_epochs = 25;
  TaskBatch unlabeled = batch;
  unlabeled.labels.clear();
  const TrainResult result = train_unsupervised(unlabeled, config);
  REQUIRE_FALSE(result.aborted);

  const int n = result.params.num_classes();
  AssignmentMatrix counts = AssignmentMatrix::Zero(n, n);
  std::vector<FrameLabeling> decoded;
  for (int v = 0; v < batch.num_videos(); ++v) {
    decoded.push_back(segmentation_to_frames(viterbi_decode(result.params, batch.features[v]).seg));
    for (std::size_t t = 0; t < decoded.back().size(); ++t) {
      const Label p = decoded.back()[t], r = batch.labels[v][t];
      counts(p.is_background() ? n - 1 : p.step_index(),
             r.is_background() ? n - 1 : r.step_index()) += 1;
    }
  }
  const std::vector<int> mapping = hungarian_assign(counts);
  long correct = 0, total = 0;
  for (int v = 0; v < batch.num_videos(); ++v)
    for (std::size_t t = 0; t < decoded[v].size(); ++t) {
      const Label p = decoded[v][t];
      const int mapped = mapping[p.is_background() ? n - 1 : p.step_index()];
      const Label ml = mapped == n - 1 ? Label::background() : Label::step(mapped);
      correct += ml == batch.labels[v][t];
      ++total;
    }
  CHECK(static_cast<double>(correct) / total >= 0.9);
}
