#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "qvdp/dataset.hpp"

namespace qvdp {

enum class PlotKind { heatmap, lines, phase_space };

struct PlotSpec {
  PlotKind kind = PlotKind::heatmap;
  std::string x;
  std::string y;
  std::string color;  // heatmap / phase_space value column
  std::string group;  // lines: one curve per distinct value; empty for a single curve
  std::string title;
  // Heatmap colour map over (-pi, pi]; default: on for columns named like a phase.
  std::optional<bool> cyclic;
  int width = 720;
  int height = 540;
};

// SVG text. Throws InvalidArgument on an empty dataset or missing columns.
std::string render_svg(const Dataset& data, const PlotSpec& spec);
void render_plot(const Dataset& data, const PlotSpec& spec, const std::filesystem::path& out);

PlotKind parse_plot_kind(const std::string& name);

}  // namespace qvdp
