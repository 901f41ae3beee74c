#include "dsi/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dsi {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kMarginL = 64, kMarginR = 20, kMarginT = 36, kMarginB = 48;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

std::string render_svg_plot(const std::vector<PlotSeries>& series,
                            const PlotMeta& meta) {
    if (series.empty())
        throw std::invalid_argument("render_svg_plot: no series to draw");
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size() || s.x.empty())
            throw std::invalid_argument("render_svg_plot: bad series " + s.name);
        if (!s.y_std.empty() && s.y_std.size() != s.y.size())
            throw std::invalid_argument("render_svg_plot: band length mismatch");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double band = s.y_std.empty() ? 0.0 : s.y_std[i];
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i] - band);
            ymax = std::max(ymax, s.y[i] + band);
        }
    }
    if (xmax == xmin) {
        xmin -= 1.0;
        xmax += 1.0;
    }
    if (ymax == ymin) {
        ymin -= 1.0;
        ymax += 1.0;
    }
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;

    const double pw = kWidth - kMarginL - kMarginR;
    const double ph = kHeight - kMarginT - kMarginB;
    auto px = [&](double x) { return kMarginL + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) { return kMarginT + (ymax - y) / (ymax - ymin) * ph; };

    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fmt(kWidth)
       << "\" height=\"" << fmt(kHeight) << "\" viewBox=\"0 0 " << fmt(kWidth) << ' '
       << fmt(kHeight) << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << fmt(kWidth / 2) << "\" y=\"20\" text-anchor=\"middle\" "
          "font-family=\"sans-serif\" font-size=\"14\">"
       << escape(meta.title) << "</text>\n";

    // axes with 5 ticks per side
    os << "<g stroke=\"#333\" stroke-width=\"1\" font-family=\"sans-serif\" "
          "font-size=\"11\" fill=\"#333\">\n";
    os << "<line x1=\"" << fmt(kMarginL) << "\" y1=\"" << fmt(kMarginT) << "\" x2=\""
       << fmt(kMarginL) << "\" y2=\"" << fmt(kHeight - kMarginB) << "\"/>\n";
    os << "<line x1=\"" << fmt(kMarginL) << "\" y1=\"" << fmt(kHeight - kMarginB)
       << "\" x2=\"" << fmt(kWidth - kMarginR) << "\" y2=\"" << fmt(kHeight - kMarginB)
       << "\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double fx = xmin + (xmax - xmin) * t / 4.0;
        const double fy = ymin + (ymax - ymin) * t / 4.0;
        os << "<text x=\"" << fmt(px(fx)) << "\" y=\"" << fmt(kHeight - kMarginB + 16)
           << "\" text-anchor=\"middle\" stroke=\"none\">" << fmt(fx) << "</text>\n";
        os << "<text x=\"" << fmt(kMarginL - 6) << "\" y=\"" << fmt(py(fy) + 4)
           << "\" text-anchor=\"end\" stroke=\"none\">" << fmt(fy) << "</text>\n";
    }
    os << "</g>\n";
    os << "<text x=\"" << fmt(kMarginL + pw / 2) << "\" y=\"" << fmt(kHeight - 10)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
       << escape(meta.x_label) << "</text>\n";
    os << "<text x=\"16\" y=\"" << fmt(kMarginT + ph / 2)
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
          "transform=\"rotate(-90 16 "
       << fmt(kMarginT + ph / 2) << ")\">" << escape(meta.y_label) << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = kPalette[si % 8];
        if (!s.y_std.empty()) {
            os << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" "
                  "stroke=\"none\" points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i)
                os << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i] + s.y_std[i])) << ' ';
            for (std::size_t i = s.x.size(); i-- > 0;)
                os << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i] - s.y_std[i])) << ' ';
            os << "\"/>\n";
        }
        if (s.x.size() > 1) {
            os << "<polyline fill=\"none\" stroke=\"" << color
               << "\" stroke-width=\"1.5\" points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i)
                os << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i])) << ' ';
            os << "\"/>\n";
        }
        for (std::size_t i = 0; i < s.x.size(); ++i)
            os << "<circle cx=\"" << fmt(px(s.x[i])) << "\" cy=\"" << fmt(py(s.y[i]))
               << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        os << "<text x=\"" << fmt(kWidth - kMarginR - 4) << "\" y=\""
           << fmt(kMarginT + 14 + 14 * static_cast<double>(si))
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\" "
              "fill=\""
           << color << "\">" << escape(s.name) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

void emit_plot(const std::vector<PlotSeries>& series, const PlotMeta& meta,
               const std::string& path) {
    const std::string svg = render_svg_plot(series, meta);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("emit_plot: cannot open " + path);
    os.write(svg.data(), static_cast<std::streamsize>(svg.size()));
    if (!os) throw std::runtime_error("emit_plot: write failed for " + path);
}

}  // namespace dsi
