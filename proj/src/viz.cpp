#include "seglab/viz.hpp"

#include <fstream>
#include <sstream>

namespace seglab {

namespace {

constexpr int kPxPerStep = 6;
constexpr int kRowHeight = 26;
constexpr int kRowGap = 8;
constexpr int kLeftMargin = 90;
constexpr int kTopMargin = 28;

const char* kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948",
                          "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac", "#86bcb6", "#d37295"};

std::string color_of(Label label) {
  if (label.is_background()) return "#ffffff";
  return kPalette[label.step_index() % (sizeof kPalette / sizeof kPalette[0])];
}

}  // namespace

std::string render_svg(const Timeline& timeline) {
  for (const TimelineRow& row : timeline.rows)
    if (row.seg.total_duration() != timeline.num_timesteps)
      throw ValidationError("render_svg: row '" + row.name + "' does not cover the video");

  const int width = kLeftMargin + timeline.num_timesteps * kPxPerStep + 20;
  const int height =
      kTopMargin + static_cast<int>(timeline.rows.size()) * (kRowHeight + kRowGap) + 30;

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "  <text x=\"" << kLeftMargin << "\" y=\"16\">" << timeline.video_id
      << " (timesteps in seconds)</text>\n";

  int y = kTopMargin;
  for (const TimelineRow& row : timeline.rows) {
    svg << "  <text x=\"6\" y=\"" << y + kRowHeight / 2 + 4 << "\">" << row.name << "</text>\n";
    int t = 0;
    for (const Region& r : row.seg.regions) {
      const int x = kLeftMargin + t * kPxPerStep;
      const int w = r.duration * kPxPerStep;
      svg << "  <rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << w << "\" height=\""
          << kRowHeight << "\" fill=\"" << color_of(r.label)
          << "\" stroke=\"#666666\" stroke-width=\"0.5\"/>\n";
      t += r.duration;
    }
    y += kRowHeight + kRowGap;
  }

  // Axis ticks every 10 timesteps.
  for (int t = 0; t <= timeline.num_timesteps; t += 10) {
    const int x = kLeftMargin + t * kPxPerStep;
    svg << "  <text x=\"" << x << "\" y=\"" << y + 14 << "\" fill=\"#444444\">" << t
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_svg(const Timeline& timeline, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write image: " + path.string());
  out << render_svg(timeline);
}

}  // namespace seglab
