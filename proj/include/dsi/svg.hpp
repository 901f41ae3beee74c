#pragma once

// Minimal deterministic SVG line/band plots. CSV is the contract; these are
// convenience output, but the bytes must be reproducible for fixed input.

#include <string>
#include <vector>

namespace dsi {

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> y_std;  // optional band, empty or same length as y
};

struct PlotMeta {
    std::string title;
    std::string x_label;
    std::string y_label;
};

std::string render_svg_plot(const std::vector<PlotSeries>& series,
                            const PlotMeta& meta);

void emit_plot(const std::vector<PlotSeries>& series, const PlotMeta& meta,
               const std::string& path);

}  // namespace dsi
