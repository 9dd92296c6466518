#pragma once

// Minimal SVG line plots (polylines, axes, optional guide line). No external
// plotting dependency.

#include <algorithm>
#include <cmath>
#include <ostream>
#include <string>
#include <vector>

namespace helmiter {

struct SvgSeries {
    std::string label;
    std::string color = "#1f77b4";
    std::vector<double> x, y;
};

struct SvgPlot {
    std::string title;
    std::string x_label, y_label;
    std::vector<SvgSeries> series;
    double guide_y = std::numeric_limits<double>::quiet_NaN();  // horizontal guide
    bool log_y = false;
    int width = 640, height = 420;
};

inline void write_svg(const SvgPlot& plot, std::ostream& os) {
    const double ml = 60, mr = 20, mt = 30, mb = 45;
    const double pw = plot.width - ml - mr, ph = plot.height - mt - mb;

    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    auto fy = [&](double v) { return plot.log_y ? std::log10(std::max(v, 1e-300)) : v; };
    for (const auto& s : plot.series) {
        for (double v : s.x) { xmin = std::min(xmin, v); xmax = std::max(xmax, v); }
        for (double v : s.y) { ymin = std::min(ymin, fy(v)); ymax = std::max(ymax, fy(v)); }
    }
    if (std::isfinite(plot.guide_y)) {
        ymin = std::min(ymin, fy(plot.guide_y));
        ymax = std::max(ymax, fy(plot.guide_y));
    }
    if (!(xmax > xmin)) { xmin -= 0.5; xmax += 0.5; }
    if (!(ymax > ymin)) { ymin -= 0.5; ymax += 0.5; }
    double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto X = [&](double v) { return ml + (v - xmin) / (xmax - xmin) * pw; };
    auto Y = [&](double v) { return mt + ph - (fy(v) - ymin) / (ymax - ymin) * ph; };

    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << plot.width << "' height='"
       << plot.height << "'>\n";
    os << "<rect width='100%' height='100%' fill='white'/>\n";
    os << "<text x='" << plot.width / 2 << "' y='18' text-anchor='middle' font-size='14'>"
       << plot.title << "</text>\n";
    // axes
    os << "<line x1='" << ml << "' y1='" << mt + ph << "' x2='" << ml + pw << "' y2='" << mt + ph
       << "' stroke='black'/>\n";
    os << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << mt + ph
       << "' stroke='black'/>\n";
    for (int i = 0; i <= 4; ++i) {
        double tx = xmin + (xmax - xmin) * i / 4.0;
        double ty = ymin + (ymax - ymin) * i / 4.0;
        os << "<text x='" << X(tx) << "' y='" << mt + ph + 16
           << "' text-anchor='middle' font-size='10'>" << tx << "</text>\n";
        double label = plot.log_y ? std::pow(10.0, ty) : ty;
        os << "<text x='" << ml - 6 << "' y='" << mt + ph - (ty - ymin) / (ymax - ymin) * ph + 3
           << "' text-anchor='end' font-size='10'>" << label << "</text>\n";
    }
    os << "<text x='" << ml + pw / 2 << "' y='" << plot.height - 8
       << "' text-anchor='middle' font-size='12'>" << plot.x_label << "</text>\n";
    os << "<text x='14' y='" << mt + ph / 2 << "' text-anchor='middle' font-size='12' "
       << "transform='rotate(-90 14 " << mt + ph / 2 << ")'>" << plot.y_label << "</text>\n";

    if (std::isfinite(plot.guide_y)) {
        os << "<line x1='" << ml << "' y1='" << Y(plot.guide_y) << "' x2='" << ml + pw << "' y2='"
           << Y(plot.guide_y) << "' stroke='#888' stroke-dasharray='6,4'/>\n";
    }

    double legend_y = mt + 10;
    for (const auto& s : plot.series) {
        os << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5' points='";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            os << X(s.x[i]) << ',' << Y(s.y[i]) << ' ';
        os << "'/>\n";
        os << "<line x1='" << ml + pw - 120 << "' y1='" << legend_y << "' x2='" << ml + pw - 100
           << "' y2='" << legend_y << "' stroke='" << s.color << "' stroke-width='2'/>\n";
        os << "<text x='" << ml + pw - 94 << "' y='" << legend_y + 4 << "' font-size='11'>"
           << s.label << "</text>\n";
        legend_y += 16;
    }
    os << "</svg>\n";
}

} // namespace helmiter
