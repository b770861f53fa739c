#include "seglab/lattice.hpp"

#include <algorithm>
#include <cmath>

#include "seglab/logmath.hpp"

namespace seglab {

namespace {

// Everything the forward recursion computes, kept so the adjoint pass can
// re-derive its softmax weights without recomputation.
struct ForwardTables {
  Eigen::MatrixXd emission;   // T x C, class emission log densities + mask
  Eigen::MatrixXd cum;        // (T+1) x C prefix sums, row 0 = 0
  Eigen::MatrixXd dur;        // C x D normalized log pmf
  Eigen::MatrixXd dur_tail;   // C x D log P(duration >= d), survival scoring
  Eigen::MatrixXd alpha;      // (T+1) x L, row 0 unused
  Eigen::MatrixXd beta;       // (T+1) x L, beta(u,r)=lse_{r'} alpha(u,r')+trans(r',r)
  double total = kNegInf;
  int T = 0, L = 0, C = 0, D = 0;
};

int state_of_label(const StateSpace& space, Label label) {
  int found = -1;
  for (int r = 0; r < space.num_states(); ++r) {
    if (space.base[r] == label) {
      if (found >= 0)
        throw ValidationError("log_joint: label maps to multiple states; use the state form");
      found = r;
    }
  }
  if (found < 0) throw ValidationError("log_joint: label not in the model's state space");
  return found;
}

void build_score_tables(const ModelParams& params, const Eigen::MatrixXd& features,
                        const EmissionMask* mask, ForwardTables& tb) {
  tb.T = static_cast<int>(features.rows());
  tb.L = params.num_states();
  tb.C = params.num_classes();
  // Longest region that fits in this video. The pmf stays normalized over
  // the model's full {1..max_duration} support regardless of T.
  tb.D = std::min(params.max_duration, tb.T);

  tb.emission = emission_log_probs(params, features);
  if (mask != nullptr) {
    if (mask->penalty.rows() != tb.T || mask->penalty.cols() != tb.C)
      throw ValidationError("emission mask shape mismatch");
    tb.emission += mask->penalty;
  }
  tb.cum.resize(tb.T + 1, tb.C);
  tb.cum.row(0).setZero();
  for (int t = 1; t <= tb.T; ++t) tb.cum.row(t) = tb.cum.row(t - 1) + tb.emission.row(t - 1);

  tb.dur = duration_log_table(params.dur_mean, params.max_duration);
  if (params.final_duration_survival) {
    tb.dur_tail.resize(tb.C, params.max_duration);
    for (int c = 0; c < tb.C; ++c) {
      double acc = kNegInf;
      for (int d = params.max_duration; d >= 1; --d) {
        acc = log_add(acc, tb.dur(c, d - 1));
        tb.dur_tail(c, d - 1) = acc;
      }
    }
  }
}

double region_duration_score(const ModelParams& params, const ForwardTables& tb, int cls,
                             int d, bool at_boundary) {
  if (params.final_duration_survival && at_boundary) return tb.dur_tail(cls, d - 1);
  return tb.dur(cls, d - 1);
}

void run_forward(const ModelParams& params, const Eigen::MatrixXd& features,
                 const EmissionMask* mask, ForwardTables& tb) {
  build_score_tables(params, features, mask, tb);
  tb.alpha.setConstant(tb.T + 1, tb.L, kNegInf);
  tb.beta.setConstant(tb.T + 1, tb.L, kNegInf);

  for (int t = 1; t <= tb.T; ++t) {
    for (int r = 0; r < tb.L; ++r) {
      const int c = params.space.cls[r];
      double acc = kNegInf;
      for (int d = 1; d <= std::min(tb.D, t); ++d) {
        const double incoming = (t - d == 0) ? params.init_log[r] : tb.beta(t - d, r);
        if (incoming == kNegInf) continue;
        const double score = incoming + region_duration_score(params, tb, c, d, t == tb.T) +
                             (tb.cum(t, c) - tb.cum(t - d, c));
        acc = log_add(acc, score);
      }
      tb.alpha(t, r) = acc;
    }
    if (t < tb.T) {
      for (int r = 0; r < tb.L; ++r) {
        double acc = kNegInf;
        for (int rp = 0; rp < tb.L; ++rp) {
          if (tb.alpha(t, rp) == kNegInf || params.trans_log(rp, r) == kNegInf) continue;
          acc = log_add(acc, tb.alpha(t, rp) + params.trans_log(rp, r));
        }
        tb.beta(t, r) = acc;
      }
    }
  }

  tb.total = kNegInf;
  for (int r = 0; r < tb.L; ++r) {
    if (tb.alpha(tb.T, r) == kNegInf || params.final_log[r] == kNegInf) continue;
    tb.total = log_add(tb.total, tb.alpha(tb.T, r) + params.final_log[r]);
  }
}

}  // namespace

ForwardResult forward_log_marginal(const ModelParams& params, const Eigen::MatrixXd& features,
                                   const EmissionMask* mask) {
  if (features.rows() < 1) throw ValidationError("forward: T must be >= 1");
  ForwardTables tb;
  run_forward(params, features, mask, tb);
  return {tb.total, tb.total != kNegInf};
}

LatticeGradients zero_gradients(const ModelParams& params, int num_timesteps) {
  LatticeGradients g;
  g.d_emission = Eigen::MatrixXd::Zero(num_timesteps, params.num_classes());
  g.d_duration = Eigen::MatrixXd::Zero(params.num_classes(), params.max_duration);
  g.d_init = Eigen::VectorXd::Zero(params.num_states());
  g.d_trans = Eigen::MatrixXd::Zero(params.num_states(), params.num_states());
  return g;
}

ForwardResult forward_with_gradients(const ModelParams& params, const Eigen::MatrixXd& features,
                                     const EmissionMask* mask, LatticeGradients& grads) {
  ForwardTables tb;
  run_forward(params, features, mask, tb);
  if (tb.total == kNegInf) return {tb.total, false};

  Eigen::MatrixXd bar_alpha = Eigen::MatrixXd::Zero(tb.T + 1, tb.L);
  Eigen::MatrixXd bar_beta = Eigen::MatrixXd::Zero(tb.T + 1, tb.L);
  Eigen::MatrixXd bar_cum = Eigen::MatrixXd::Zero(tb.T + 1, tb.C);

  for (int r = 0; r < tb.L; ++r)
    if (tb.alpha(tb.T, r) != kNegInf && params.final_log[r] != kNegInf)
      bar_alpha(tb.T, r) = std::exp(tb.alpha(tb.T, r) + params.final_log[r] - tb.total);

  for (int t = tb.T; t >= 1; --t) {
    if (t < tb.T) {
      // alpha(t, .) is read only through beta(t, .).
      for (int r = 0; r < tb.L; ++r) {
        const double bar = bar_beta(t, r);
        if (bar == 0.0 || tb.beta(t, r) == kNegInf) continue;
        for (int rp = 0; rp < tb.L; ++rp) {
          if (tb.alpha(t, rp) == kNegInf || params.trans_log(rp, r) == kNegInf) continue;
          const double w =
              std::exp(tb.alpha(t, rp) + params.trans_log(rp, r) - tb.beta(t, r));
          bar_alpha(t, rp) += w * bar;
          grads.d_trans(rp, r) += w * bar;
        }
      }
    }
    for (int r = 0; r < tb.L; ++r) {
      const double bar = bar_alpha(t, r);
      if (bar == 0.0 || tb.alpha(t, r) == kNegInf) continue;
      const int c = params.space.cls[r];
      for (int d = 1; d <= std::min(tb.D, t); ++d) {
        const double incoming = (t - d == 0) ? params.init_log[r] : tb.beta(t - d, r);
        if (incoming == kNegInf) continue;
        const bool at_boundary = (t == tb.T);
        const double score = incoming + region_duration_score(params, tb, c, d, at_boundary) +
                             (tb.cum(t, c) - tb.cum(t - d, c));
        const double w = std::exp(score - tb.alpha(t, r)) * bar;
        if (w == 0.0) continue;
        if (params.final_duration_survival && at_boundary) {
          // Tail mass: distribute over the pmf entries it sums.
          for (int dp = d; dp <= params.max_duration; ++dp)
            grads.d_duration(c, dp - 1) +=
                w * std::exp(tb.dur(c, dp - 1) - tb.dur_tail(c, d - 1));
        } else {
          grads.d_duration(c, d - 1) += w;
        }
        bar_cum(t, c) += w;
        bar_cum(t - d, c) -= w;
        if (t - d == 0)
          grads.d_init[r] += w;
        else
          bar_beta(t - d, r) += w;
      }
    }
  }

  // cum(t) = cum(t-1) + emission(t-1): suffix sums give the emission bars.
  Eigen::RowVectorXd suffix = Eigen::RowVectorXd::Zero(tb.C);
  for (int t = tb.T; t >= 1; --t) {
    suffix += bar_cum.row(t);
    grads.d_emission.row(t - 1) += suffix;
  }
  return {tb.total, true};
}

DecodeResult viterbi_decode(const ModelParams& params, const Eigen::MatrixXd& features,
                            const EmissionMask* mask) {
  ForwardTables tb;
  build_score_tables(params, features, mask, tb);

  Eigen::MatrixXd best(tb.T + 1, tb.L);
  best.setConstant(kNegInf);
  Eigen::MatrixXd best_in(tb.T + 1, tb.L);  // max over predecessors, per state
  best_in.setConstant(kNegInf);
  Eigen::MatrixXi best_in_arg = Eigen::MatrixXi::Constant(tb.T + 1, tb.L, -1);
  Eigen::MatrixXi back_d = Eigen::MatrixXi::Constant(tb.T + 1, tb.L, -1);

  for (int t = 1; t <= tb.T; ++t) {
    for (int r = 0; r < tb.L; ++r) {
      const int c = params.space.cls[r];
      for (int d = 1; d <= std::min(tb.D, t); ++d) {
        const double incoming = (t - d == 0) ? params.init_log[r] : best_in(t - d, r);
        if (incoming == kNegInf) continue;
        const double score = incoming + region_duration_score(params, tb, c, d, t == tb.T) +
                             (tb.cum(t, c) - tb.cum(t - d, c));
        if (score > best(t, r)) {  // strict: keeps the shortest duration on ties
          best(t, r) = score;
          back_d(t, r) = d;
        }
      }
    }
    if (t < tb.T) {
      for (int r = 0; r < tb.L; ++r) {
        for (int rp = 0; rp < tb.L; ++rp) {
          if (best(t, rp) == kNegInf || params.trans_log(rp, r) == kNegInf) continue;
          const double score = best(t, rp) + params.trans_log(rp, r);
          if (score > best_in(t, r)) {  // strict: keeps the lowest predecessor on ties
            best_in(t, r) = score;
            best_in_arg(t, r) = rp;
          }
        }
      }
    }
  }

  double total = kNegInf;
  int last = -1;
  for (int r = 0; r < tb.L; ++r) {
    if (best(tb.T, r) == kNegInf || params.final_log[r] == kNegInf) continue;
    const double score = best(tb.T, r) + params.final_log[r];
    if (score > total) {
      total = score;
      last = r;
    }
  }
  if (last < 0)
    throw ValidationError(
        "viterbi_decode: no valid segmentation (check ordering constraints vs. video length "
        "and max_duration)");

  DecodeResult out;
  out.score = total;
  int t = tb.T;
  int r = last;
  while (t > 0) {
    const int d = back_d(t, r);
    out.states.push_back(r);
    out.seg.regions.push_back({params.space.base[r], d});
    const int prev_t = t - d;
    if (prev_t > 0) r = best_in_arg(prev_t, r);
    t = prev_t;
  }
  std::reverse(out.states.begin(), out.states.end());
  std::reverse(out.seg.regions.begin(), out.seg.regions.end());
  return out;
}

double log_joint_states(const ModelParams& params, const std::vector<int>& states,
                        const std::vector<int>& durations, const Eigen::MatrixXd& features,
                        const EmissionMask* mask) {
  if (states.size() != durations.size() || states.empty())
    throw ValidationError("log_joint: empty or mismatched region lists");
  ForwardTables tb;
  build_score_tables(params, features, mask, tb);

  int total_dur = 0;
  for (int d : durations) total_dur += d;
  if (total_dur != tb.T)
    throw ValidationError("log_joint: segmentation does not partition the video");

  double score = params.init_log[states[0]];
  int t = 0;
  const int K = static_cast<int>(states.size());
  for (int k = 0; k < K; ++k) {
    const int r = states[k];
    const int c = params.space.cls[r];
    const int d = durations[k];
    if (d < 1) throw ValidationError("log_joint: region duration < 1");
    if (d > tb.D) return kNegInf;
    if (k > 0) {
      const double tr = params.trans_log(states[k - 1], r);
      if (tr == kNegInf) return kNegInf;
      score += tr;
    }
    score += region_duration_score(params, tb, c, d, k == K - 1);
    score += tb.cum(t + d, c) - tb.cum(t, c);
    t += d;
  }
  score += params.final_log[states[K - 1]];
  return score;
}

double log_joint(const ModelParams& params, const Segmentation& seg,
                 const Eigen::MatrixXd& features, const EmissionMask* mask) {
  std::vector<int> states, durations;
  states.reserve(seg.regions.size());
  for (const Region& r : seg.regions) {
    states.push_back(state_of_label(params.space, r.label));
    durations.push_back(r.duration);
  }
  return log_joint_states(params, states, durations, features, mask);
}

int default_max_duration(const Eigen::VectorXd& dur_mean, int num_timesteps) {
  double cap = 1.0;
  for (int c = 0; c < dur_mean.size(); ++c)
    cap = std::max(cap, std::ceil(dur_mean[c] + 6.0 * std::sqrt(dur_mean[c])));
  return std::max(1, std::min(num_timesteps, static_cast<int>(cap)));
}

}  // namespace seglab
