#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace forecastad {

/// One polyline of a line chart.
struct Series {
    std::string name;
    std::vector<double> x, y;
};

/// Writes a simple SVG line chart with axes and per-series colors.
void write_svg_line_chart(const std::filesystem::path& path, const std::string& title,
                          const std::vector<Series>& series);

/// Writes an SVG histogram of `values` with `bins` equal-width bins.
void write_svg_histogram(const std::filesystem::path& path, const std::string& title,
                         const std::vector<double>& values, int bins);

/// Writes an 8-bit grayscale PNG; values are clamped to [0,1] then scaled.
/// Uses stored (uncompressed) deflate blocks, so no compression library is
/// needed.
void write_png_grayscale(const std::filesystem::path& path, const std::vector<double>& pixels,
                         int height, int width);

}  // namespace forecastad
