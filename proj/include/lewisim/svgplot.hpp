#pragma once

#include <string>
#include <vector>

namespace lewisim {

enum class PlotKind { kLosses, kNstepSweep, kAlphaSweep, kToposimVsGen };

PlotKind plot_kind_from_name(const std::string& name);

// Renders a deterministic SVG chart from training CSV logs (losses) or a
// sweep summary CSV (the other kinds). Throws ConfigError when a required
// column is missing, naming it.
void render_plot(PlotKind kind, const std::vector<std::string>& csv_paths,
                 const std::string& out_path);

}  // namespace lewisim
