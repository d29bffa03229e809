#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "bm/rng.hpp"

namespace bm {

/// Schematic 2-D scatter/polyline rendering. Layout is fixed-size with
/// padded data bounds and light axes; nothing here is pixel-contractual.
struct SvgPointSet {
    std::vector<Vec> points;  // 2-D
    std::string color = "#1f77b4";
    double radius = 2.0;
};

struct SvgPolyline {
    std::vector<Vec> points;
    std::string color = "#9467bd";
    double width = 0.8;
};

inline std::string render_svg(const std::vector<SvgPointSet>& sets,
                              const std::vector<SvgPolyline>& lines) {
    const double W = 640, H = 640, margin = 48;

    double lo_x = 0, hi_x = 0, lo_y = 0, hi_y = 0;
    bool any = false;
    auto grow = [&](const Vec& p) {
        if (!any) {
            lo_x = hi_x = p[0];
            lo_y = hi_y = p[1];
            any = true;
        } else {
            lo_x = std::min(lo_x, p[0]);
            hi_x = std::max(hi_x, p[0]);
            lo_y = std::min(lo_y, p[1]);
            hi_y = std::max(hi_y, p[1]);
        }
    };
    for (const auto& s : sets)
        for (const auto& p : s.points) grow(p);
    for (const auto& l : lines)
        for (const auto& p : l.points) grow(p);
    if (!any) {
        lo_x = lo_y = -1;
        hi_x = hi_y = 1;
    }
    const double pad_x = std::max(1e-9, 0.05 * (hi_x - lo_x) + 1e-6);
    const double pad_y = std::max(1e-9, 0.05 * (hi_y - lo_y) + 1e-6);
    lo_x -= pad_x;
    hi_x += pad_x;
    lo_y -= pad_y;
    hi_y += pad_y;

    auto sx = [&](double x) { return margin + (x - lo_x) / (hi_x - lo_x) * (W - 2 * margin); };
    auto sy = [&](double y) { return H - margin - (y - lo_y) / (hi_y - lo_y) * (H - 2 * margin); };

    std::ostringstream os;
    os.precision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
       << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
    os << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";

    // axes with min/max tick labels
    os << "<line x1=\"" << margin << "\" y1=\"" << H - margin << "\" x2=\"" << W - margin
       << "\" y2=\"" << H - margin << "\" stroke=\"#444\"/>\n";
    os << "<line x1=\"" << margin << "\" y1=\"" << margin << "\" x2=\"" << margin << "\" y2=\""
       << H - margin << "\" stroke=\"#444\"/>\n";
    os << "<text x=\"" << margin << "\" y=\"" << H - margin + 16 << "\" font-size=\"11\">" << lo_x
       << "</text>\n";
    os << "<text x=\"" << W - margin - 30 << "\" y=\"" << H - margin + 16
       << "\" font-size=\"11\">" << hi_x << "</text>\n";
    os << "<text x=\"" << 4 << "\" y=\"" << H - margin << "\" font-size=\"11\">" << lo_y
       << "</text>\n";
    os << "<text x=\"" << 4 << "\" y=\"" << margin + 4 << "\" font-size=\"11\">" << hi_y
       << "</text>\n";

    for (const auto& l : lines) {
        if (l.points.empty()) continue;
        os << "<polyline fill=\"none\" stroke=\"" << l.color << "\" stroke-width=\"" << l.width
           << "\" stroke-opacity=\"0.55\" points=\"";
        for (const auto& p : l.points) os << sx(p[0]) << ',' << sy(p[1]) << ' ';
        os << "\"/>\n";
    }
    for (const auto& s : sets) {
        for (const auto& p : s.points) {
            os << "<circle cx=\"" << sx(p[0]) << "\" cy=\"" << sy(p[1]) << "\" r=\"" << s.radius
               << "\" fill=\"" << s.color << "\" fill-opacity=\"0.75\"/>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace bm
