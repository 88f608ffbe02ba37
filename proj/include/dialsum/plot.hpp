#pragma once

// Grouped-bar-chart rendering of flow matrices to standalone SVG files.

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>

#include "dialsum/evaluation.hpp"

namespace dialsum {
namespace plot {

inline std::string flow_matrix_svg(const evaluation::FlowMatrix& m, const std::string& title) {
    const double width = 860, height = 420;
    const double left = 60, right = 20, top = 50, bottom = 60;
    const double plot_w = width - left - right;
    const double plot_h = height - top - bottom;
    static const char* colors[3] = {"#4C72B0", "#DD8452", "#55A868"};
    static const char* labels[10] = {"[0.0,0.1)", "[0.1,0.2)", "[0.2,0.3)", "[0.3,0.4)",
                                     "[0.4,0.5)", "[0.5,0.6)", "[0.6,0.7)", "[0.7,0.8)",
                                     "[0.8,0.9)", "[0.9,1.0]"};

    double max_cell = 0.0;
    for (const auto& row : m.cells) {
        for (double c : row) max_cell = std::max(max_cell, c);
    }
    if (max_cell <= 0.0) max_cell = 1.0;
    const double y_max = max_cell * 1.15;

    std::ostringstream svg;
    svg << std::fixed << std::setprecision(2);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"16\">" << title << "</text>\n";

    // y axis with four gridlines
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = y_max * tick / 4.0;
        const double y = top + plot_h * (1.0 - v / y_max);
        svg << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << left + plot_w
            << "\" y2=\"" << y << "\" stroke=\"#dddddd\"/>\n";
        svg << "<text x=\"" << left - 6 << "\" y=\"" << y + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
            << std::setprecision(3) << v << std::setprecision(2) << "</text>\n";
    }

    const double group_w = plot_w / 10.0;
    const double bar_w = group_w / 4.0;
    for (std::size_t bucket = 0; bucket < 10; ++bucket) {
        const double gx = left + group_w * static_cast<double>(bucket);
        for (std::size_t row = 0; row < 3; ++row) {
            const double v = m.cells[row][bucket];
            const double h = plot_h * (v / y_max);
            const double x = gx + bar_w * (0.5 + static_cast<double>(row));
            svg << "<rect x=\"" << x << "\" y=\"" << top + plot_h - h << "\" width=\""
                << bar_w * 0.9 << "\" height=\"" << h << "\" fill=\"" << colors[row]
                << "\"/>\n";
        }
        svg << "<text x=\"" << gx + group_w / 2 << "\" y=\"" << top + plot_h + 16
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\" "
            << "transform=\"rotate(30 " << gx + group_w / 2 << " " << top + plot_h + 16
            << ")\">" << labels[bucket] << "</text>\n";
    }

    // legend
    for (std::size_t row = 0; row < 3; ++row) {
        const double x = left + 110.0 * static_cast<double>(row);
        svg << "<rect x=\"" << x << "\" y=\"" << height - 22 << "\" width=\"12\" height=\"12\" "
            << "fill=\"" << colors[row] << "\"/>\n";
        svg << "<text x=\"" << x + 17 << "\" y=\"" << height - 12
            << "\" font-family=\"sans-serif\" font-size=\"12\">S" << row + 1 << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

inline void write_flow_matrix_svg(const std::string& path, const evaluation::FlowMatrix& m,
                                  const std::string& title) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write plot file " + path);
    out << flow_matrix_svg(m, title);
}

}  // namespace plot
}  // namespace dialsum
