#include "lewisim/svgplot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "lewisim/env.hpp"

namespace lewisim {

namespace {

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
      if (columns[i] == name) return static_cast<int>(i);
    throw ConfigError("plot: missing column '" + name + "'");
  }
};

Table read_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("plot: cannot open CSV: " + path);
  Table t;
  std::string line;
  bool header = true;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.push_back("");
    if (header) {
      t.columns = cells;
      header = false;
    } else {
      cells.resize(t.columns.size());
      t.rows.push_back(cells);
    }
  }
  return t;
}

struct Series {
  std::string label;
  std::string color;
  std::vector<std::pair<double, double>> points;
  bool line = true;
};

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

void render_chart(const std::string& out_path, const std::vector<Series>& series,
                  const std::string& xlabel, const std::string& ylabel) {
  const double width = 640, height = 420;
  const double left = 64, right = 20, top = 24, bottom = 48;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool any = false;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      if (!any) {
        xmin = xmax = x;
        ymin = ymax = y;
        any = true;
      }
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto sx = [&](double x) {
    return left + (x - xmin) / (xmax - xmin) * (width - left - right);
  };
  auto sy = [&](double y) {
    return height - bottom - (y - ymin) / (ymax - ymin) * (height - top - bottom);
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
     << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  os << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  // Axes.
  os << "<line x1=\"" << num(left) << "\" y1=\"" << num(height - bottom) << "\" x2=\""
     << num(width - right) << "\" y2=\"" << num(height - bottom)
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left)
     << "\" y2=\"" << num(height - bottom) << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 5.0;
    const double yv = ymin + (ymax - ymin) * i / 5.0;
    os << "<line x1=\"" << num(sx(xv)) << "\" y1=\"" << num(height - bottom) << "\" x2=\""
       << num(sx(xv)) << "\" y2=\"" << num(height - bottom + 4) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << num(sx(xv)) << "\" y=\"" << num(height - bottom + 18)
       << "\" font-size=\"11\" text-anchor=\"middle\">" << tick_label(xv) << "</text>\n";
    os << "<line x1=\"" << num(left - 4) << "\" y1=\"" << num(sy(yv)) << "\" x2=\""
       << num(left) << "\" y2=\"" << num(sy(yv)) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << num(left - 8) << "\" y=\"" << num(sy(yv) + 4)
       << "\" font-size=\"11\" text-anchor=\"end\">" << tick_label(yv) << "</text>\n";
  }
  os << "<text x=\"" << num((left + width - right) / 2) << "\" y=\"" << num(height - 12)
     << "\" font-size=\"12\" text-anchor=\"middle\">" << xlabel << "</text>\n";
  os << "<text x=\"16\" y=\"" << num((top + height - bottom) / 2)
     << "\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
     << num((top + height - bottom) / 2) << ")\">" << ylabel << "</text>\n";

  // Series.
  for (const auto& s : series) {
    if (s.line && s.points.size() > 1) {
      os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
      for (const auto& [x, y] : s.points) os << num(sx(x)) << "," << num(sy(y)) << " ";
      os << "\"/>\n";
    }
    for (const auto& [x, y] : s.points)
      os << "<circle cx=\"" << num(sx(x)) << "\" cy=\"" << num(sy(y))
         << "\" r=\"2.5\" fill=\"" << s.color << "\"/>\n";
  }
  // Legend.
  double ly = top + 8;
  for (const auto& s : series) {
    os << "<rect x=\"" << num(width - right - 150) << "\" y=\"" << num(ly - 8)
       << "\" width=\"10\" height=\"10\" fill=\"" << s.color << "\"/>\n";
    os << "<text x=\"" << num(width - right - 136) << "\" y=\"" << num(ly + 1)
       << "\" font-size=\"11\">" << s.label << "</text>\n";
    ly += 16;
  }
  os << "</svg>\n";

  std::ofstream f(out_path, std::ios::trunc);
  if (!f) throw ConfigError("plot: cannot open output: " + out_path);
  f << os.str();
}

double to_double(const std::string& s) { return std::strtod(s.c_str(), nullptr); }

std::vector<Series> losses_series(const std::vector<std::string>& paths) {
  std::vector<Series> series;
  const char* cols[4] = {"info_train", "info_test", "adapt_train", "adapt_test"};
  int color = 0;
  for (const auto& path : paths) {
    Table t = read_csv(path);
    const int upd = t.col("update");
    for (const char* c : cols) {
      Series s;
      s.label = paths.size() > 1 ? path + ":" + c : std::string(c);
      s.color = kPalette[color++ % 8];
      const int ci = t.col(c);
      for (const auto& row : t.rows) {
        if (row[static_cast<std::size_t>(ci)].empty()) continue;
        s.points.emplace_back(to_double(row[static_cast<std::size_t>(upd)]),
                              to_double(row[static_cast<std::size_t>(ci)]));
      }
      series.push_back(std::move(s));
    }
  }
  return series;
}

std::vector<Series> sweep_series(const std::vector<std::string>& paths, bool toposim_too) {
  std::vector<Series> series;
  Series gen{"generalization", kPalette[0], {}, true};
  Series topo{"toposim", kPalette[1], {}, true};
  std::map<double, std::pair<double, int>> gen_mean, topo_mean;
  for (const auto& path : paths) {
    Table t = read_csv(path);
    const int vc = t.col("value");
    const int gc = t.col("generalization");
    const int tc = t.col("toposim");
    for (const auto& row : t.rows) {
      const double v = to_double(row[static_cast<std::size_t>(vc)]);
      if (!row[static_cast<std::size_t>(gc)].empty()) {
        auto& acc = gen_mean[v];
        acc.first += to_double(row[static_cast<std::size_t>(gc)]);
        acc.second += 1;
      }
      if (toposim_too && !row[static_cast<std::size_t>(tc)].empty()) {
        auto& acc = topo_mean[v];
        acc.first += to_double(row[static_cast<std::size_t>(tc)]);
        acc.second += 1;
      }
    }
  }
  for (const auto& [v, acc] : gen_mean) gen.points.emplace_back(v, acc.first / acc.second);
  series.push_back(std::move(gen));
  if (toposim_too) {
    for (const auto& [v, acc] : topo_mean) topo.points.emplace_back(v, acc.first / acc.second);
    series.push_back(std::move(topo));
  }
  return series;
}

std::vector<Series> scatter_series(const std::vector<std::string>& paths) {
  Series s{"runs", kPalette[0], {}, false};
  for (const auto& path : paths) {
    Table t = read_csv(path);
    const int gc = t.col("generalization");
    const int tc = t.col("toposim");
    for (const auto& row : t.rows) {
      if (row[static_cast<std::size_t>(gc)].empty() || row[static_cast<std::size_t>(tc)].empty())
        continue;
      s.points.emplace_back(to_double(row[static_cast<std::size_t>(tc)]),
                            to_double(row[static_cast<std::size_t>(gc)]));
    }
  }
  return {s};
}

}  // namespace

PlotKind plot_kind_from_name(const std::string& name) {
  if (name == "losses") return PlotKind::kLosses;
  if (name == "nstep-sweep") return PlotKind::kNstepSweep;
  if (name == "alpha-sweep") return PlotKind::kAlphaSweep;
  if (name == "toposim-vs-gen") return PlotKind::kToposimVsGen;
  throw ConfigError("plot: unknown kind '" + name + "'");
}

void render_plot(PlotKind kind, const std::vector<std::string>& csv_paths,
                 const std::string& out_path) {
  if (csv_paths.empty()) throw ConfigError("plot: no CSV inputs");
  switch (kind) {
    case PlotKind::kLosses:
      render_chart(out_path, losses_series(csv_paths), "update", "loss (nats)");
      break;
    case PlotKind::kNstepSweep:
      render_chart(out_path, sweep_series(csv_paths, true), "n_step", "score");
      break;
    case PlotKind::kAlphaSweep:
      render_chart(out_path, sweep_series(csv_paths, false), "alpha", "generalization");
      break;
    case PlotKind::kToposimVsGen:
      render_chart(out_path, scatter_series(csv_paths), "toposim", "generalization");
      break;
  }
}

}  // namespace lewisim
