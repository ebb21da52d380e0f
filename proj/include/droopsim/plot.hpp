#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "droopsim/simulator.hpp"

namespace droopsim {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct Chart {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
};

/// Standalone SVG line chart. Output depends only on the input values.
std::string render_svg(const Chart& chart);

Chart power_chart(const TimeSeries& ts);
Chart voltage_chart(const TimeSeries& ts);
Chart frequency_chart(const TimeSeries& ts);

/// Reads a time-series CSV and writes power.svg, voltage.svg and frequency.svg
/// into `out_dir` (created if needed). Nothing is written when the CSV is
/// rejected. Returns the written paths.
std::vector<std::filesystem::path> emit_plots(const std::filesystem::path& csv_path,
                                              const std::filesystem::path& out_dir);

}  // namespace droopsim
