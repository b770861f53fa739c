#pragma once

#include <cstdint>
#include <filesystem>

#include "seglab/model_io.hpp"
#include "seglab/types.hpp"

namespace seglab {

/// Shape of a synthetic dataset. Emission means are placed with exact
/// pairwise distance `separation` (in units of the unit standard
/// deviation); structural parameters alternate background and steps, with
/// the background duration mean calibrated so the expected background
/// fraction matches `bg_fraction` exactly under the sampling process.
struct SynthSpec {
  int num_tasks = 1;
  int steps = 3;
  int videos = 50;
  int t_min = 40;
  int t_max = 80;
  double separation = 5.0;
  int feature_dim = 8;
  double bg_fraction = 0.4;
  double step_duration_mean = 6.0;
  std::uint64_t seed = 1;
  bool narration = false;  // derive constraint intervals from the references
  int narration_pad = 3;

  void check() const;
};

struct SynthResult {
  Dataset dataset;  // videos carry reference annotations (and constraints)
  ModelBundle truth;
  double expected_background_fraction = 0.0;  // exact, averaged over T range
};

SynthResult synth_generate(const SynthSpec& spec);

/// Writes manifest + feature files + ground-truth model under out_dir.
void write_synth(const SynthResult& result, const std::filesystem::path& out_dir);

}  // namespace seglab
