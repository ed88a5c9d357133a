#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sqmc/csv.hpp"

namespace sqmc {

struct PlotSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;  // (N, value), ascending N
};

struct PlotData {
  std::string x_label;
  std::string y_label;
  std::vector<PlotSeries> series;
};

/// Extracts series from a timing CSV (median wall_time_ms per mode and N)
/// or a variance summary CSV (variance per engine and N). Throws
/// std::runtime_error on empty data, unknown layout, or non-positive values
/// (the message names the CSV line).
PlotData plot_data_from_csv(const CsvTable& table);

/// Log-log chart: one polyline and one circle marker per point per series.
std::string render_svg(const PlotData& data);

/// Reads `csv`, writes the SVG to `out`. Nothing is written on error.
void cmd_plot(const std::filesystem::path& csv, const std::filesystem::path& out);

}  // namespace sqmc
