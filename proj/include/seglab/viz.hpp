#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "seglab/types.hpp"

namespace seglab {

/// One horizontal bar of a timeline figure.
struct TimelineRow {
  std::string name;  // e.g. "pred", "GT"
  Segmentation seg;
};

/// Stacked per-video timeline: x axis is timesteps in seconds, one row per
/// system plus the reference. Steps are colored by index, background is
/// left uncolored.
struct Timeline {
  std::string video_id;
  int num_timesteps = 0;
  std::vector<TimelineRow> rows;
};

/// Renders the timeline as an SVG document (one <rect> per region).
std::string render_svg(const Timeline& timeline);

void write_svg(const Timeline& timeline, const std::filesystem::path& path);

}  // namespace seglab
