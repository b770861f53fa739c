#include "seglab/features.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace seglab {

int PcaModel::output_dim() const {
  int total = 0;
  for (const FeatureGroupSpec& s : specs) total += s.components;
  return total;
}

namespace {

// PCA of one column block via eigendecomposition of the population
// covariance. Components are sign-fixed so the largest-magnitude entry of
// each eigenvector is positive.
PcaGroupModel fit_group(const Eigen::MatrixXd& frames, const FeatureGroupSpec& spec) {
  const int n = static_cast<int>(frames.rows());
  const int dim = static_cast<int>(frames.cols());
  if (spec.components > dim)
    throw ValidationError("pca_fit: group '" + spec.name + "' requests " +
                          std::to_string(spec.components) + " components from " +
                          std::to_string(dim) + " dims");
  if (n < spec.components)
    throw ValidationError("pca_fit: group '" + spec.name + "' has " + std::to_string(n) +
                          " frames for " + std::to_string(spec.components) + " components");

  PcaGroupModel out;
  out.mean = frames.colwise().mean();
  Eigen::MatrixXd centered = frames.rowwise() - out.mean.transpose();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  // Eigenvalues come back ascending; take the top `components` in
  // descending order.
  const Eigen::VectorXd& values = eig.eigenvalues();
  const Eigen::MatrixXd& vectors = eig.eigenvectors();
  const double total_var = std::max(values.sum(), 0.0);

  out.projection.resize(dim, spec.components);
  out.explained_variance_ratio.resize(spec.components);
  out.effective_components = 0;
  for (int c = 0; c < spec.components; ++c) {
    const int src = dim - 1 - c;
    Eigen::VectorXd v = vectors.col(src);
    int argmax = 0;
    v.cwiseAbs().maxCoeff(&argmax);
    if (v[argmax] < 0) v = -v;
    out.projection.col(c) = v;
    const double ev = std::max(values[src], 0.0);
    out.explained_variance_ratio[c] = total_var > 0 ? ev / total_var : 0.0;
    if (ev > 1e-12) ++out.effective_components;
  }
  return out;
}

Eigen::MatrixXd task_group_frames(const Dataset& ds, const std::string& task_id,
                                  int col_begin, int dim) {
  long total = 0;
  for (const VideoInstance& v : ds.videos)
    if (v.task_id == task_id) total += v.num_timesteps();
  Eigen::MatrixXd frames(total, dim);
  long row = 0;
  for (const VideoInstance& v : ds.videos) {
    if (v.task_id != task_id) continue;
    frames.middleRows(row, v.num_timesteps()) =
        v.features.middleCols(col_begin, dim);
    row += v.num_timesteps();
  }
  return frames;
}

}  // namespace

PcaModel pca_fit(const Dataset& ds, const std::vector<FeatureGroupSpec>& specs) {
  PcaModel model;
  model.specs = specs;
  int total_raw = 0;
  for (const FeatureGroupSpec& s : specs) total_raw += s.raw_dim;

  for (const TaskDefinition& task : ds.tasks) {
    auto videos = ds.videos_of_task(task.task_id);
    if (videos.empty()) continue;
    if (videos.front()->feature_dim() != total_raw)
      throw ValidationError("pca_fit: task '" + task.task_id + "' features have " +
                            std::to_string(videos.front()->feature_dim()) +
                            " dims but group specs sum to " + std::to_string(total_raw));
    std::vector<PcaGroupModel> group_models;
    int col = 0;
    for (const FeatureGroupSpec& spec : specs) {
      group_models.push_back(
          fit_group(task_group_frames(ds, task.task_id, col, spec.raw_dim), spec));
      col += spec.raw_dim;
    }
    model.by_task.emplace(task.task_id, std::move(group_models));
  }
  return model;
}

Eigen::MatrixXd pca_transform(const PcaModel& model, const std::string& task_id,
                              const Eigen::MatrixXd& features) {
  auto it = model.by_task.find(task_id);
  if (it == model.by_task.end())
    throw ValidationError("pca_transform: no PCA fitted for task '" + task_id + "'");
  const std::vector<PcaGroupModel>& groups = it->second;

  Eigen::MatrixXd out(features.rows(), model.output_dim());
  int in_col = 0, out_col = 0;
  for (std::size_t g = 0; g < model.specs.size(); ++g) {
    const FeatureGroupSpec& spec = model.specs[g];
    const PcaGroupModel& pg = groups[g];
    Eigen::MatrixXd centered =
        features.middleCols(in_col, spec.raw_dim).rowwise() - pg.mean.transpose();
    out.middleCols(out_col, spec.components) = centered * pg.projection;
    in_col += spec.raw_dim;
    out_col += spec.components;
  }
  return out;
}

DiagCovariance empirical_diag_cov(const std::vector<const Eigen::MatrixXd*>& frames,
                                  double floor) {
  long n = 0;
  for (const Eigen::MatrixXd* m : frames) n += m->rows();
  if (n < 2) throw ValidationError("empirical_diag_cov: needs at least 2 frames");
  const int dim = static_cast<int>(frames.front()->cols());

  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  for (const Eigen::MatrixXd* m : frames) sum += m->colwise().sum().transpose();
  const Eigen::VectorXd mean = sum / static_cast<double>(n);

  Eigen::VectorXd ss = Eigen::VectorXd::Zero(dim);
  for (const Eigen::MatrixXd* m : frames) {
    Eigen::MatrixXd centered = m->rowwise() - mean.transpose();
    ss += centered.array().square().colwise().sum().matrix().transpose();
  }
  DiagCovariance cov;
  cov.variance = (ss / static_cast<double>(n)).cwiseMax(floor);
  return cov;
}

Eigen::MatrixXd narration_pool(const std::vector<TimedEmbedding>& words, int num_timesteps,
                               int window, bool normalize) {
  if (window < 3 || window % 2 == 0)
    throw ValidationError("narration_pool: window must be odd and >= 3");
  const int half = window / 2;
  // Hanning taper over the window, zero at both ends; e.g. window 5 gives
  // [0, 0.5, 1, 0.5, 0] at integer offsets -2..2.
  std::vector<double> taper(window);
  for (int i = 0; i < window; ++i)
    taper[i] = 0.5 * (1.0 - std::cos(2.0 * M_PI * i / (window - 1)));

  int dim = -1;
  for (const TimedEmbedding& w : words) {
    if (dim < 0) dim = static_cast<int>(w.vector.size());
    if (w.vector.size() != dim)
      throw ValidationError("narration_pool: mismatched embedding dims");
  }
  if (dim < 0) dim = 0;

  Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(num_timesteps, dim);
  Eigen::VectorXd weight_sum = Eigen::VectorXd::Zero(num_timesteps);
  for (const TimedEmbedding& w : words) {
    const int center = static_cast<int>(std::lround(w.time));
    for (int off = -half; off <= half; ++off) {
      const int t = center + off;
      if (t < 0 || t >= num_timesteps) continue;
      const double weight = taper[off + half];
      pooled.row(t) += weight * w.vector.transpose();
      weight_sum[t] += weight;
    }
  }
  if (normalize)
    for (int t = 0; t < num_timesteps; ++t)
      if (weight_sum[t] > 0) pooled.row(t) /= weight_sum[t];
  return pooled;
}

}  // namespace seglab
