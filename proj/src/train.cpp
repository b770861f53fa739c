#include "seglab/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "seglab/logmath.hpp"

namespace seglab {

void TrainConfig::check() const {
  if (!(learning_rate > 0)) throw ValidationError("learning rate must be > 0");
  if (batch_size < 1) throw ValidationError("batch size must be >= 1");
  if (max_epochs < 0 || patience < 0) throw ValidationError("negative epoch settings");
  if (!(decay_factor > 0 && decay_factor <= 1))
    throw ValidationError("decay factor must be in (0, 1]");
  if (smoothing < 0) throw ValidationError("smoothing must be >= 0");
}

double TaskBatch::mean_length() const {
  double total = 0;
  for (const Eigen::MatrixXd& f : features) total += static_cast<double>(f.rows());
  return features.empty() ? 0.0 : total / features.size();
}

namespace {

double softplus(double x) { return x > 30 ? x : std::log1p(std::exp(x)); }
double softplus_inv(double y) { return y > 30 ? y : std::log(std::expm1(y)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

Eigen::VectorXd masked_log_softmax(const Eigen::VectorXd& scores,
                                   const std::vector<bool>& allowed) {
  const int n = static_cast<int>(scores.size());
  Eigen::VectorXd out = Eigen::VectorXd::Constant(n, kNegInf);
  double m = kNegInf;
  for (int i = 0; i < n; ++i)
    if (allowed[i] && scores[i] > m) m = scores[i];
  if (m == kNegInf) return out;  // no allowed entries (absorbing row)
  double z = 0;
  for (int i = 0; i < n; ++i)
    if (allowed[i]) z += std::exp(scores[i] - m);
  const double lse = m + std::log(z);
  for (int i = 0; i < n; ++i)
    if (allowed[i]) out[i] = scores[i] - lse;
  return out;
}

// d objective / d scores for a masked log-softmax, given the bar on the
// outputs (zero outside the support).
void log_softmax_backward(const Eigen::VectorXd& log_p, const std::vector<bool>& allowed,
                          const Eigen::VectorXd& bar, Eigen::VectorXd& grad_scores) {
  double total_bar = 0;
  for (int i = 0; i < bar.size(); ++i)
    if (allowed[i]) total_bar += bar[i];
  for (int i = 0; i < bar.size(); ++i)
    if (allowed[i]) grad_scores[i] += bar[i] - std::exp(log_p[i]) * total_bar;
}

}  // namespace

void ScoreSet::set_zero() {
  init.setZero();
  trans.setZero();
  dur_raw.setZero();
  mean.setZero();
}

void ScoreSet::axpy(double a, const ScoreSet& other) {
  init += a * other.init;
  trans += a * other.trans;
  dur_raw += a * other.dur_raw;
  mean += a * other.mean;
}

ModelParams materialize(const TrainContext& ctx, const ScoreSet& scores) {
  const int L = ctx.space.num_states();
  ModelParams p;
  p.space = ctx.space;
  p.init_log = masked_log_softmax(scores.init, ctx.support.initial);
  p.trans_log.resize(L, L);
  for (int r = 0; r < L; ++r)
    p.trans_log.row(r) =
        masked_log_softmax(scores.trans.row(r).transpose(), ctx.support.transition[r])
            .transpose();
  p.final_log = Eigen::VectorXd::Constant(L, kNegInf);
  for (int r = 0; r < L; ++r)
    if (ctx.support.terminal[r]) p.final_log[r] = 0.0;
  p.dur_mean = scores.dur_raw.unaryExpr([](double x) { return softplus(x); });
  p.emit_mean = scores.mean;
  p.var_diag = ctx.var_diag;
  p.max_duration = ctx.max_duration;
  p.final_duration_survival = ctx.final_duration_survival;
  return p;
}

namespace {

// Chains lattice-table gradients into score space.
void chain_to_scores(const TrainContext& ctx, const ScoreSet& scores, const ModelParams& params,
                     const Eigen::MatrixXd& features, const LatticeGradients& lg, double sign,
                     ScoreSet& grad) {
  const int L = params.num_states();
  const int C = params.num_classes();

  Eigen::VectorXd bar_init = sign * lg.d_init;
  log_softmax_backward(params.init_log, ctx.support.initial, bar_init, grad.init);
  for (int r = 0; r < L; ++r) {
    Eigen::VectorXd bar_row = sign * lg.d_trans.row(r).transpose();
    Eigen::VectorXd g_row = Eigen::VectorXd::Zero(L);
    log_softmax_backward(params.trans_log.row(r).transpose(), ctx.support.transition[r], bar_row,
                         g_row);
    grad.trans.row(r) += g_row.transpose();
  }

  const Eigen::VectorXd trunc_mean =
      truncated_duration_mean(params.dur_mean, params.max_duration);
  for (int c = 0; c < C; ++c) {
    double g_lambda = 0;
    for (int d = 1; d <= params.max_duration; ++d)
      g_lambda += lg.d_duration(c, d - 1) * (d - trunc_mean[c]) / params.dur_mean[c];
    grad.dur_raw[c] += sign * g_lambda * sigmoid(scores.dur_raw[c]);
  }

  const Eigen::ArrayXd inv_var = ctx.var_diag.array().inverse();
  for (int c = 0; c < C; ++c) {
    const Eigen::VectorXd w = lg.d_emission.col(c);
    const double wsum = w.sum();
    Eigen::VectorXd g =
        (features.transpose() * w - wsum * params.emit_mean.row(c).transpose());
    grad.mean.row(c) += sign * (g.array() * inv_var).matrix().transpose();
  }
}

}  // namespace

double unsup_log_marginal(const TrainContext& ctx, const ScoreSet& scores,
                          const Eigen::MatrixXd& features, const EmissionMask* mask,
                          ScoreSet* grad) {
  const ModelParams params = materialize(ctx, scores);
  if (grad == nullptr) return forward_log_marginal(params, features, mask).log_marginal;
  LatticeGradients lg = zero_gradients(params, static_cast<int>(features.rows()));
  const ForwardResult fr = forward_with_gradients(params, features, mask, lg);
  if (fr.feasible) chain_to_scores(ctx, scores, params, features, lg, +1.0, *grad);
  return fr.log_marginal;
}

double disc_log_conditional(const TrainContext& ctx, const ScoreSet& scores,
                            const Eigen::MatrixXd& features, const std::vector<int>& ref_states,
                            const std::vector<int>& ref_durations, ScoreSet* grad) {
  const ModelParams params = materialize(ctx, scores);
  const int T = static_cast<int>(features.rows());

  const double joint = log_joint_states(params, ref_states, ref_durations, features, nullptr);
  if (grad == nullptr) {
    const double marginal = forward_log_marginal(params, features, nullptr).log_marginal;
    return joint - marginal;
  }

  LatticeGradients lg = zero_gradients(params, T);
  const ForwardResult fr = forward_with_gradients(params, features, nullptr, lg);
  if (!fr.feasible) return kNegInf;
  // Marginal enters negatively.
  chain_to_scores(ctx, scores, params, features, lg, -1.0, *grad);

  // The joint's gradient is its observed counts, laid out in the same
  // lattice-table form and chained identically.
  LatticeGradients jg = zero_gradients(params, T);
  const Eigen::MatrixXd dur_table = duration_log_table(params.dur_mean, params.max_duration);
  const int K = static_cast<int>(ref_states.size());
  int t = 0;
  for (int k = 0; k < K; ++k) {
    const int r = ref_states[k];
    const int c = params.space.cls[r];
    const int d = ref_durations[k];
    if (k == 0)
      jg.d_init[r] += 1.0;
    else
      jg.d_trans(ref_states[k - 1], r) += 1.0;
    if (params.final_duration_survival && k == K - 1) {
      double tail = kNegInf;
      for (int dp = d; dp <= params.max_duration; ++dp)
        tail = log_add(tail, dur_table(c, dp - 1));
      for (int dp = d; dp <= params.max_duration; ++dp)
        jg.d_duration(c, dp - 1) += std::exp(dur_table(c, dp - 1) - tail);
    } else {
      jg.d_duration(c, d - 1) += 1.0;
    }
    for (int u = t; u < t + d; ++u) jg.d_emission(u, c) += 1.0;
    t += d;
  }
  chain_to_scores(ctx, scores, params, features, jg, +1.0, *grad);
  return joint - fr.log_marginal;
}

ScoreSet initial_scores(const TrainContext& ctx, const TaskBatch& batch, Rng& rng) {
  const int L = ctx.space.num_states();
  const int C = ctx.space.num_classes();
  const int F = batch.feature_dim();

  ScoreSet s;
  s.init.resize(L);
  s.trans.resize(L, L);
  for (int i = 0; i < L; ++i) {
    s.init[i] = 0.01 * rng.gaussian();
    for (int j = 0; j < L; ++j) s.trans(i, j) = 0.01 * rng.gaussian();
  }
  s.dur_raw =
      Eigen::VectorXd::Constant(C, softplus_inv(std::max(1.0, batch.mean_length() / C)));

  // Class means start at distinct randomly chosen frames.
  long total_frames = 0;
  for (const Eigen::MatrixXd& f : batch.features) total_frames += f.rows();
  if (total_frames < C)
    throw ValidationError("initial_scores: fewer frames than classes");
  std::set<long> chosen;
  while (static_cast<int>(chosen.size()) < C)
    chosen.insert(static_cast<long>(rng.next() % static_cast<std::uint64_t>(total_frames)));
  s.mean.resize(C, F);
  int row = 0;
  for (long idx : chosen) {
    long off = idx;
    for (const Eigen::MatrixXd& f : batch.features) {
      if (off < f.rows()) {
        s.mean.row(row++) = f.row(off);
        break;
      }
      off -= f.rows();
    }
  }
  return s;
}

namespace {

// Adam in ascent form over the four score blocks.
class AdamState {
 public:
  explicit AdamState(const ScoreSet& like) {
    m_ = like;
    v_ = like;
    m_.set_zero();
    v_.set_zero();
  }

  void step(ScoreSet& scores, const ScoreSet& grad, double lr) {
    ++t_;
    update(m_.init, v_.init, scores.init, grad.init, lr);
    update(m_.trans, v_.trans, scores.trans, grad.trans, lr);
    update(m_.dur_raw, v_.dur_raw, scores.dur_raw, grad.dur_raw, lr);
    update(m_.mean, v_.mean, scores.mean, grad.mean, lr);
  }

 private:
  template <typename D1, typename D2, typename D3, typename D4>
  void update(Eigen::MatrixBase<D1>& m, Eigen::MatrixBase<D2>& v, Eigen::MatrixBase<D3>& x,
              const Eigen::MatrixBase<D4>& g, double lr) {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v.derived() + (1 - b2) * g.derived().array().square().matrix();
    const double c1 = 1 - std::pow(b1, t_);
    const double c2 = 1 - std::pow(b2, t_);
    x += (lr * (m.derived().array() / c1) / ((v.derived().array() / c2).sqrt() + eps))
             .matrix();
  }

  ScoreSet m_, v_;
  long t_ = 0;
};

struct ObjectiveSpec {
  bool discriminative = false;
  // Reference regions as states/durations, per video (discriminative only).
  std::vector<std::vector<int>> ref_states;
  std::vector<std::vector<int>> ref_durations;
};

double video_value_grad(const TrainContext& ctx, const ScoreSet& scores, const TaskBatch& batch,
                        const ObjectiveSpec& obj, int v, ScoreSet* grad) {
  const EmissionMask* mask = batch.masks.empty() ? nullptr : &batch.masks[v];
  if (obj.discriminative)
    return disc_log_conditional(ctx, scores, batch.features[v], obj.ref_states[v],
                                obj.ref_durations[v], grad);
  return unsup_log_marginal(ctx, scores, batch.features[v], mask, grad);
}

TrainResult run_training(const TrainContext& ctx, ScoreSet scores, const TaskBatch& batch,
                         const TrainConfig& config, const ObjectiveSpec& obj, Rng& rng) {
  const int N = batch.num_videos();
  TrainResult result;

  // Processing order within a batch is fixed by video id so the gradient
  // reduction is reproducible.
  std::vector<int> by_id(N);
  std::iota(by_id.begin(), by_id.end(), 0);
  std::sort(by_id.begin(), by_id.end(),
            [&](int a, int b) { return batch.video_ids[a] < batch.video_ids[b]; });
  std::vector<int> rank(N);
  for (int i = 0; i < N; ++i) rank[by_id[i]] = i;

  AdamState adam(scores);
  double lr = config.learning_rate;
  double best = kNegInf;
  int stale_epochs = 0;

  auto full_objective = [&]() {
    double total = 0;
    for (int v = 0; v < N; ++v)
      total += video_value_grad(ctx, scores, batch, obj, v, nullptr);
    return total / N;
  };

  std::vector<int> order(N);
  std::iota(order.begin(), order.end(), 0);
  ScoreSet grad = scores;

  for (int epoch = 0; epoch < config.max_epochs; ++epoch) {
    // Seeded shuffle, then deterministic within-batch order.
    for (int i = N - 1; i > 0; --i)
      std::swap(order[i], order[rng.uniform_int(0, i)]);

    for (int start = 0; start < N; start += config.batch_size) {
      const int end = std::min(N, start + config.batch_size);
      std::vector<int> chunk(order.begin() + start, order.begin() + end);
      std::sort(chunk.begin(), chunk.end(), [&](int a, int b) { return rank[a] < rank[b]; });

      grad.set_zero();
      double batch_value = 0;
      for (int v : chunk) batch_value += video_value_grad(ctx, scores, batch, obj, v, &grad);
      if (!std::isfinite(batch_value)) {
        result.aborted = true;
        result.diagnostic = "non-finite objective in epoch " + std::to_string(epoch) +
                            " (infeasible video under the active constraints?)";
        result.params = materialize(ctx, scores);
        return result;
      }
      adam.step(scores, grad, lr);
    }

    const double epoch_obj = full_objective();
    result.epoch_objective.push_back(epoch_obj);
    if (!std::isfinite(epoch_obj)) {
      result.aborted = true;
      result.diagnostic = "non-finite epoch objective";
      result.params = materialize(ctx, scores);
      return result;
    }
    if (epoch_obj > best + config.improvement_tol) {
      best = epoch_obj;
      stale_epochs = 0;
    } else if (++stale_epochs > config.patience) {
      lr *= config.decay_factor;
      stale_epochs = 0;
    }
  }
  result.params = materialize(ctx, scores);
  return result;
}

std::pair<std::vector<std::vector<int>>, std::vector<std::vector<int>>> reference_regions(
    const TaskBatch& batch) {
  std::vector<std::vector<int>> states(batch.num_videos());
  std::vector<std::vector<int>> durations(batch.num_videos());
  const int S = batch.task->num_steps();
  for (int v = 0; v < batch.num_videos(); ++v) {
    const Segmentation seg = frames_to_segmentation(batch.labels[v]);
    for (const Region& r : seg.regions) {
      states[v].push_back(r.label.is_background() ? S : r.label.step_index());
      durations[v].push_back(r.duration);
    }
  }
  return {states, durations};
}

}  // namespace

ModelParams fit_supervised_generative(const TaskBatch& batch, const TrainConfig& config,
                                      std::vector<std::string>* notes) {
  config.check();
  if (!batch.labeled() || batch.task == nullptr)
    throw ValidationError("fit_supervised_generative: needs labeled videos");
  const StateSpace space = plain_space(*batch.task);
  const int L = space.num_states();
  const int C = L;
  const int F = batch.feature_dim();
  const double k = config.smoothing;

  Eigen::VectorXd init_counts = Eigen::VectorXd::Zero(L);
  Eigen::MatrixXd trans_counts = Eigen::MatrixXd::Zero(L, L);
  Eigen::VectorXd dur_sum = Eigen::VectorXd::Zero(C);
  Eigen::VectorXd dur_n = Eigen::VectorXd::Zero(C);
  Eigen::MatrixXd feat_sum = Eigen::MatrixXd::Zero(C, F);
  Eigen::VectorXd feat_n = Eigen::VectorXd::Zero(C);
  int max_dur_seen = 1;
  int max_len = 1;

  auto [states, durations] = reference_regions(batch);
  for (int v = 0; v < batch.num_videos(); ++v) {
    max_len = std::max(max_len, static_cast<int>(batch.features[v].rows()));
    const auto& st = states[v];
    const auto& du = durations[v];
    init_counts[st[0]] += 1;
    for (std::size_t s = 1; s < st.size(); ++s) trans_counts(st[s - 1], st[s]) += 1;
    for (std::size_t s = 0; s < st.size(); ++s) {
      dur_sum[st[s]] += du[s];
      dur_n[st[s]] += 1;
      max_dur_seen = std::max(max_dur_seen, du[s]);
    }
    int t = 0;
    for (std::size_t s = 0; s < st.size(); ++s) {
      for (int u = t; u < t + du[s]; ++u) feat_sum.row(st[s]) += batch.features[v].row(u);
      feat_n[st[s]] += du[s];
      t += du[s];
    }
  }

  ModelParams p;
  p.space = space;
  p.init_log.resize(L);
  const double init_total = init_counts.sum() + k * L;
  for (int r = 0; r < L; ++r)
    p.init_log[r] = init_total > 0 ? std::log((init_counts[r] + k) / init_total) : -std::log(L);
  p.trans_log.resize(L, L);
  for (int r = 0; r < L; ++r) {
    const double row_total = trans_counts.row(r).sum() + k * L;
    for (int s = 0; s < L; ++s)
      p.trans_log(r, s) =
          row_total > 0 ? std::log((trans_counts(r, s) + k) / row_total) : -std::log(L);
  }
  p.final_log = Eigen::VectorXd::Zero(L);

  const double global_mean_dur =
      dur_n.sum() > 0 ? dur_sum.sum() / dur_n.sum() : batch.mean_length() / C;
  p.dur_mean.resize(C);
  const Eigen::VectorXd global_feat_mean =
      feat_n.sum() > 0 ? Eigen::VectorXd(feat_sum.colwise().sum() / feat_n.sum()) :
                         Eigen::VectorXd::Zero(F);
  p.emit_mean.resize(C, F);
  for (int c = 0; c < C; ++c) {
    if (dur_n[c] > 0) {
      p.dur_mean[c] = dur_sum[c] / dur_n[c];
    } else {
      p.dur_mean[c] = std::max(1.0, global_mean_dur);
      if (notes) notes->push_back("label '" + space.names[c] + "' never observed; duration mean defaulted");
    }
    if (feat_n[c] > 0) {
      p.emit_mean.row(c) = feat_sum.row(c) / feat_n[c];
    } else {
      p.emit_mean.row(c) = global_feat_mean.transpose();
      if (notes) notes->push_back("label '" + space.names[c] + "' never observed; emission mean set to global mean");
    }
  }
  p.var_diag = batch.cov.variance;

  const int derived = default_max_duration(p.dur_mean, max_len);
  p.max_duration = config.max_duration > 0
                       ? config.max_duration
                       : std::min(max_len, std::max(derived, max_dur_seen));
  p.check();
  return p;
}

TrainResult train_unsupervised(const TaskBatch& batch, const TrainConfig& config,
                               const OrderedStateSpace* ordered, const ScoreSet* warm_start) {
  config.check();
  if (batch.num_videos() < 1) throw ValidationError("train_unsupervised: empty batch");

  TrainContext ctx;
  ctx.space = ordered != nullptr ? ordered->space : plain_space(*batch.task);
  ctx.support = ordered != nullptr ? support_of(*ordered) : full_support(ctx.space.num_states());
  ctx.var_diag = batch.cov.variance;

  Rng rng(config.seed);
  ScoreSet scores = warm_start != nullptr ? *warm_start : initial_scores(ctx, batch, rng);

  int max_len = 1;
  for (const Eigen::MatrixXd& f : batch.features)
    max_len = std::max(max_len, static_cast<int>(f.rows()));
  ctx.max_duration =
      config.max_duration > 0
          ? config.max_duration
          : default_max_duration(scores.dur_raw.unaryExpr([](double x) { return softplus(x); }),
                                 max_len);

  ObjectiveSpec obj;
  return run_training(ctx, std::move(scores), batch, config, obj, rng);
}

TrainResult train_discriminative(const TaskBatch& batch, const TrainConfig& config) {
  config.check();
  if (!batch.labeled()) throw ValidationError("train_discriminative: needs labeled videos");

  TrainContext ctx;
  ctx.space = plain_space(*batch.task);
  ctx.support = full_support(ctx.space.num_states());
  ctx.var_diag = batch.cov.variance;

  Rng rng(config.seed);
  ScoreSet scores = initial_scores(ctx, batch, rng);

  ObjectiveSpec obj;
  obj.discriminative = true;
  std::tie(obj.ref_states, obj.ref_durations) = reference_regions(batch);

  int max_len = 1, max_ref_dur = 1;
  for (const Eigen::MatrixXd& f : batch.features)
    max_len = std::max(max_len, static_cast<int>(f.rows()));
  for (const auto& durs : obj.ref_durations)
    for (int d : durs) max_ref_dur = std::max(max_ref_dur, d);
  const int derived = default_max_duration(
      scores.dur_raw.unaryExpr([](double x) { return softplus(x); }), max_len);
  // The reference joint must stay representable.
  ctx.max_duration = std::max(config.max_duration > 0 ? config.max_duration : derived,
                              max_ref_dur);

  return run_training(ctx, std::move(scores), batch, config, obj, rng);
}

}  // namespace seglab
