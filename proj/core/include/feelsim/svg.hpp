#pragma once

#include <string>
#include <vector>

namespace feelsim {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

// Renders a plain SVG line chart (axes, ticks, legend, one polyline per
// series). Non-finite points are skipped. Returns the SVG document.
std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label,
                              const std::vector<Series>& series);

}  // namespace feelsim
