#include "sqmc/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace sqmc {
namespace {

double parse_positive(const std::string& field, std::size_t line) {
  double v = 0.0;
  try {
    std::size_t used = 0;
    v = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
  } catch (const std::exception&) {
    throw std::runtime_error("malformed CSV at line " + std::to_string(line) + ": '" + field +
                             "' is not a number");
  }
  if (!(v > 0.0) || !std::isfinite(v)) {
    throw std::runtime_error("CSV line " + std::to_string(line) + ": value " + field +
                             " cannot be drawn on a log scale");
  }
  return v;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace

PlotData plot_data_from_csv(const CsvTable& table) {
  if (table.rows.empty()) throw std::runtime_error("CSV contains no data rows");
  PlotData data;
  std::size_t series_col, x_col, y_col;
  if (table.column("mode") && table.column("wall_time_ms")) {
    series_col = *table.column("mode");
    y_col = *table.column("wall_time_ms");
    data.y_label = "wall time (ms)";
  } else if (table.column("engine") && table.column("variance")) {
    series_col = *table.column("engine");
    y_col = *table.column("variance");
    data.y_label = "variance";
  } else {
    throw std::runtime_error("CSV is neither a timing nor a variance summary table");
  }
  x_col = table.require_column("N");
  data.x_label = "N";

  std::map<std::string, std::map<double, std::vector<double>>> grouped;
  std::vector<std::string> order;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    const auto line = table.line_numbers[r];
    if (row[y_col] == "NA") continue;
    const double x = parse_positive(row[x_col], line);
    const double y = parse_positive(row[y_col], line);
    if (!grouped.contains(row[series_col])) order.push_back(row[series_col]);
    grouped[row[series_col]][x].push_back(y);
  }
  if (grouped.empty()) throw std::runtime_error("CSV contains no plottable values");
  for (const auto& name : order) {
    PlotSeries s{name, {}};
    for (const auto& [x, ys] : grouped[name]) s.points.emplace_back(x, median(ys));
    data.series.push_back(std::move(s));
  }
  return data;
}

std::string render_svg(const PlotData& data) {
  constexpr double width = 640, height = 480, left = 80, right = 160, top = 30, bottom = 60;
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const auto& s : data.series) {
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, std::log10(x));
      xmax = std::max(xmax, std::log10(x));
      ymin = std::min(ymin, std::log10(y));
      ymax = std::max(ymax, std::log10(y));
    }
  }
  if (xmax - xmin < 1e-9) xmin -= 0.5, xmax += 0.5;
  if (ymax - ymin < 1e-9) ymin -= 0.5, ymax += 0.5;
  const double pw = width - left - right, ph = height - top - bottom;
  const auto px = [&](double x) { return left + (std::log10(x) - xmin) / (xmax - xmin) * pw; };
  const auto py = [&](double y) { return top + ph - (std::log10(y) - ymin) / (ymax - ymin) * ph; };

  std::ostringstream svg;
  svg.precision(6);
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\""
      << top + ph << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
      << "\" stroke=\"black\"/>\n";
  svg << "<text x=\"" << left + pw / 2 << "\" y=\"" << height - 15
      << "\" text-anchor=\"middle\" font-size=\"14\">" << data.x_label << " (log scale)</text>\n";
  svg << "<text x=\"20\" y=\"" << top + ph / 2 << "\" text-anchor=\"middle\" font-size=\"14\" "
      << "transform=\"rotate(-90 20 " << top + ph / 2 << ")\">" << data.y_label
      << " (log scale)</text>\n";
  for (int e = static_cast<int>(std::ceil(xmin)); e <= static_cast<int>(std::floor(xmax)); ++e) {
    svg << "<text x=\"" << px(std::pow(10.0, e)) << "\" y=\"" << top + ph + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">1e" << e << "</text>\n";
  }
  for (int e = static_cast<int>(std::ceil(ymin)); e <= static_cast<int>(std::floor(ymax)); ++e) {
    svg << "<text x=\"" << left - 6 << "\" y=\"" << py(std::pow(10.0, e)) + 4
        << "\" text-anchor=\"end\" font-size=\"11\">1e" << e << "</text>\n";
  }
  for (std::size_t i = 0; i < data.series.size(); ++i) {
    const auto& s = data.series[i];
    const char* colour = kPalette[i % std::size(kPalette)];
    svg << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"2\" points=\"";
    for (std::size_t k = 0; k < s.points.size(); ++k) {
      svg << (k ? " " : "") << px(s.points[k].first) << ',' << py(s.points[k].second);
    }
    svg << "\"/>\n";
    for (const auto& [x, y] : s.points) {
      svg << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"4\" fill=\"" << colour
          << "\"/>\n";
    }
    const double ly = top + 20 + 20 * static_cast<double>(i);
    svg << "<rect x=\"" << left + pw + 15 << "\" y=\"" << ly - 8 << "\" width=\"12\" height=\"4\" fill=\""
        << colour << "\"/>\n";
    svg << "<text x=\"" << left + pw + 32 << "\" y=\"" << ly << "\" font-size=\"12\">" << s.name
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void cmd_plot(const std::filesystem::path& csv, const std::filesystem::path& out) {
  const auto svg = render_svg(plot_data_from_csv(read_csv(csv)));
  std::ofstream file(out);
  if (!file) throw std::runtime_error("cannot write " + out.string());
  file << svg;
}

}  // namespace sqmc
