#include "seglab/model.hpp"

#include <algorithm>
#include <cmath>

#include "seglab/logmath.hpp"

namespace seglab {

int StateSpace::num_classes() const {
  int c = 0;
  for (int x : cls) c = std::max(c, x + 1);
  return c;
}

StateSpace plain_space(const TaskDefinition& task) {
  StateSpace s;
  const int steps = task.num_steps();
  for (int j = 0; j < steps; ++j) {
    s.base.push_back(Label::step(j));
    s.cls.push_back(j);
    s.names.push_back(task.steps[j]);
  }
  s.base.push_back(Label::background());
  s.cls.push_back(steps);
  s.names.push_back("bkg");
  return s;
}

void ModelParams::check() const {
  const int L = num_states();
  const int C = num_classes();
  if (L < 1 || C < 1) throw ValidationError("model has no states");
  if (static_cast<int>(space.cls.size()) != L || init_log.size() != L ||
      trans_log.rows() != L || trans_log.cols() != L || final_log.size() != L)
    throw ValidationError("model structure arrays have inconsistent sizes");
  if (emit_mean.rows() != C || emit_mean.cols() != feature_dim())
    throw ValidationError("emission mean shape mismatch");
  if (max_duration < 1) throw ValidationError("max_duration must be >= 1");
  for (int c = 0; c < C; ++c)
    if (!(dur_mean[c] > 0)) throw ValidationError("duration mean must be > 0");
  for (int f = 0; f < feature_dim(); ++f)
    if (!(var_diag[f] > 0)) throw ValidationError("variance must be > 0");

  auto check_row = [&](const Eigen::VectorXd& row, const char* what) {
    double total = 0;
    for (int i = 0; i < row.size(); ++i)
      if (row[i] != kNegInf) total += std::exp(row[i]);
    if (total > 0 && std::abs(total - 1.0) > 1e-6)
      throw ValidationError(std::string(what) + " does not normalize");
  };
  check_row(init_log, "initial distribution");
  for (int i = 0; i < L; ++i) check_row(trans_log.row(i), "transition row");
}

Eigen::MatrixXd duration_log_table(const Eigen::VectorXd& lambda, int max_d) {
  const int C = static_cast<int>(lambda.size());
  Eigen::MatrixXd table(C, max_d);
  for (int c = 0; c < C; ++c) {
    const double log_l = std::log(lambda[c]);
    double norm = kNegInf;
    for (int d = 1; d <= max_d; ++d) {
      const double raw = d * log_l - lambda[c] - std::lgamma(d + 1.0);
      table(c, d - 1) = raw;
      norm = log_add(norm, raw);
    }
    table.row(c).array() -= norm;
  }
  return table;
}

Eigen::VectorXd truncated_duration_mean(const Eigen::VectorXd& lambda, int max_d) {
  const Eigen::MatrixXd table = duration_log_table(lambda, max_d);
  Eigen::VectorXd mean(lambda.size());
  for (int c = 0; c < lambda.size(); ++c) {
    double m = 0;
    for (int d = 1; d <= max_d; ++d) m += d * std::exp(table(c, d - 1));
    mean[c] = m;
  }
  return mean;
}

double duration_log_pmf(const ModelParams& params, int state, int d) {
  if (d < 1 || d > params.max_duration)
    throw std::out_of_range("duration outside {1..max_duration}");
  const int c = params.space.cls[state];
  const double lambda = params.dur_mean[c];
  const double log_l = std::log(lambda);
  double norm = kNegInf;
  for (int k = 1; k <= params.max_duration; ++k)
    norm = log_add(norm, k * log_l - lambda - std::lgamma(k + 1.0));
  return d * log_l - lambda - std::lgamma(d + 1.0) - norm;
}

double emission_log_prob(const ModelParams& params, const Eigen::VectorXd& x, int state) {
  if (x.size() != params.feature_dim())
    throw ValidationError("emission_log_prob: feature dim mismatch");
  const int c = params.space.cls[state];
  const Eigen::ArrayXd diff = x.array() - params.emit_mean.row(c).transpose().array();
  const Eigen::ArrayXd var = params.var_diag.array();
  const double quad = (diff.square() / var).sum();
  const double log_det = var.log().sum();
  return -0.5 * (params.feature_dim() * std::log(2.0 * M_PI) + log_det + quad);
}

Eigen::MatrixXd emission_log_probs(const ModelParams& params, const Eigen::MatrixXd& features) {
  if (features.cols() != params.feature_dim())
    throw ValidationError("emission_log_probs: feature dim mismatch");
  const int T = static_cast<int>(features.rows());
  const int C = params.num_classes();
  const Eigen::ArrayXd inv_var = params.var_diag.array().inverse();
  const double base =
      -0.5 * (params.feature_dim() * std::log(2.0 * M_PI) + params.var_diag.array().log().sum());
  Eigen::MatrixXd out(T, C);
  for (int c = 0; c < C; ++c) {
    Eigen::MatrixXd centered = features.rowwise() - params.emit_mean.row(c);
    out.col(c) =
        (centered.array().square().rowwise() * inv_var.transpose()).rowwise().sum() * -0.5 +
        base;
  }
  return out;
}

SampleResult sample(const ModelParams& params, int num_timesteps, Rng& rng) {
  if (num_timesteps < 1) throw ValidationError("sample: T must be >= 1");
  params.check();
  const Eigen::MatrixXd dur_table = duration_log_table(params.dur_mean, params.max_duration);

  SampleResult out;
  int covered = 0;
  int state = rng.categorical_log(params.init_log);
  while (covered < num_timesteps) {
    const int c = params.space.cls[state];
    int d = rng.categorical_log(dur_table.row(c).transpose()) + 1;
    d = std::min(d, num_timesteps - covered);  // truncate the final region
    out.states.push_back(state);
    out.seg.regions.push_back({params.space.base[state], d});
    covered += d;
    if (covered < num_timesteps) state = rng.categorical_log(params.trans_log.row(state).transpose());
  }

  out.features.resize(num_timesteps, params.feature_dim());
  int t = 0;
  for (std::size_t k = 0; k < out.states.size(); ++k) {
    const int c = params.space.cls[out.states[k]];
    for (int i = 0; i < out.seg.regions[k].duration; ++i, ++t)
      for (int f = 0; f < params.feature_dim(); ++f)
        out.features(t, f) =
            params.emit_mean(c, f) + std::sqrt(params.var_diag[f]) * rng.gaussian();
  }
  return out;
}

Eigen::MatrixXd expected_state_marginals(const ModelParams& params, int num_timesteps) {
  const int L = params.num_states();
  const int D = params.max_duration;
  const Eigen::MatrixXd dur_table = duration_log_table(params.dur_mean, params.max_duration);

  // starts(u, r): probability a region with state r starts at timestep u
  // under the ancestral process (regions drawn until they cover T; the
  // final truncation does not change which state covers t < T).
  Eigen::MatrixXd starts = Eigen::MatrixXd::Zero(num_timesteps, L);
  for (int r = 0; r < L; ++r)
    starts(0, r) = params.init_log[r] == kNegInf ? 0.0 : std::exp(params.init_log[r]);
  Eigen::MatrixXd trans = params.trans_log.unaryExpr(
      [](double x) { return x == kNegInf ? 0.0 : std::exp(x); });
  Eigen::MatrixXd dur = dur_table.unaryExpr([](double x) { return std::exp(x); });

  for (int u = 1; u < num_timesteps; ++u) {
    for (int prev_u = std::max(0, u - D); prev_u < u; ++prev_u) {
      const int d = u - prev_u;
      for (int rp = 0; rp < L; ++rp) {
        const double p_start = starts(prev_u, rp) * dur(params.space.cls[rp], d - 1);
        if (p_start == 0) continue;
        for (int r = 0; r < L; ++r) starts(u, r) += p_start * trans(rp, r);
      }
    }
  }

  // A region starting at u with duration d covers u..u+d-1; truncation at T
  // only trims coverage, so occupancy(t) sums starts(u) over d reaching t.
  Eigen::MatrixXd occupancy = Eigen::MatrixXd::Zero(num_timesteps, L);
  for (int u = 0; u < num_timesteps; ++u) {
    for (int r = 0; r < L; ++r) {
      if (starts(u, r) == 0) continue;
      const int c = params.space.cls[r];
      for (int d = 1; d <= D; ++d) {
        const double pd = dur(c, d - 1);
        if (pd == 0) continue;
        const int end = std::min(u + d, num_timesteps);
        for (int t = u; t < end; ++t) occupancy(t, r) += starts(u, r) * pd;
      }
    }
  }
  return occupancy;
}

}  // namespace seglab
