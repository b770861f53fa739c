#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace seglab {

/// Seeded RNG used everywhere randomness is needed. Keeps all draws behind
/// one interface so runs are reproducible at a fixed seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform double in [0, 1).
  double uniform() {
    return std::generate_canonical<double, 53>(engine_);
  }

  /// Standard normal via Box-Muller; avoids std::normal_distribution so the
  /// draw sequence is pinned by this code, not the standard library.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  /// Uniform integer in [lo, hi] inclusive.
  int uniform_int(int lo, int hi) {
    if (hi < lo) throw std::invalid_argument("uniform_int: empty range");
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next() % span);
  }

  /// Draw an index from a categorical given log-probabilities (entries may
  /// be -inf). The finite entries are assumed to normalize.
  int categorical_log(const Eigen::VectorXd& log_p) {
    double u = uniform();
    double acc = 0.0;
    int last_finite = -1;
    for (int i = 0; i < log_p.size(); ++i) {
      if (!std::isfinite(log_p[i])) continue;
      last_finite = i;
      acc += std::exp(log_p[i]);
      if (u < acc) return i;
    }
    if (last_finite < 0)
      throw std::runtime_error("categorical_log: no finite entries");
    return last_finite;  // guard against rounding of the cumulative sum
  }

  std::uint64_t next() { return engine_(); }

  /// Derive an independent stream (per video, per epoch, ...).
  Rng fork(std::uint64_t salt) {
    return Rng(next() ^ (salt * 0x9e3779b97f4a7c15ULL));
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace seglab
