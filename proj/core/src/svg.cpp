#include "feelsim/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace feelsim {

namespace {

constexpr int kWidth = 760;
constexpr int kHeight = 420;
constexpr int kLeft = 70;
constexpr int kRight = 190;  // leaves room for the legend
constexpr int kTop = 40;
constexpr int kBottom = 50;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
                          "#bcbd22", "#e377c2"};

std::string esc(const std::string& s) {
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

std::string num(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

// Round tick step to 1/2/5 * 10^k.
double nice_step(double span, int target_ticks) {
    if (!(span > 0.0)) return 1.0;
    const double raw = span / std::max(1, target_ticks);
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double frac = raw / mag;
    double step = 10.0;
    if (frac <= 1.0) step = 1.0;
    else if (frac <= 2.0) step = 2.0;
    else if (frac <= 5.0) step = 5.0;
    return step * mag;
}

}  // namespace

std::string render_line_chart(const std::string& title, const std::string& x_label,
                              const std::string& y_label,
                              const std::vector<Series>& series) {
    double xmin = std::numeric_limits<double>::infinity();
    double xmax = -xmin;
    double ymin = xmin;
    double ymax = -xmin;
    for (const Series& s : series) {
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    }
    if (!(xmin <= xmax)) {
        xmin = 0.0;
        xmax = 1.0;
    }
    if (!(ymin <= ymax)) {
        ymin = 0.0;
        ymax = 1.0;
    }
    if (xmax == xmin) xmax = xmin + 1.0;
    if (ymax == ymin) {
        ymax += 0.5;
        ymin -= 0.5;
    } else {
        const double pad = 0.05 * (ymax - ymin);
        ymin -= pad;
        ymax += pad;
    }

    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (x - xmin) / (xmax - xmin) * plot_w; };
    auto py = [&](double y) { return kTop + (1.0 - (y - ymin) / (ymax - ymin)) * plot_h; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
        << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << ' '
        << kHeight << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"22\" font-size=\"15\" "
        << "text-anchor=\"middle\" font-family=\"sans-serif\">" << esc(title)
        << "</text>\n";

    // Axis frame.
    svg << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w
        << "\" height=\"" << plot_h
        << "\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\"/>\n";

    const double xstep = nice_step(xmax - xmin, 6);
    for (double x = std::ceil(xmin / xstep) * xstep; x <= xmax + 1e-9 * xstep;
         x += xstep) {
        svg << "<line x1=\"" << px(x) << "\" y1=\"" << kTop + plot_h << "\" x2=\""
            << px(x) << "\" y2=\"" << kTop + plot_h + 5
            << "\" stroke=\"#333\"/>\n";
        svg << "<text x=\"" << px(x) << "\" y=\"" << kTop + plot_h + 20
            << "\" font-size=\"11\" text-anchor=\"middle\" "
            << "font-family=\"sans-serif\">" << num(x) << "</text>\n";
    }
    const double ystep = nice_step(ymax - ymin, 6);
    for (double y = std::ceil(ymin / ystep) * ystep; y <= ymax + 1e-9 * ystep;
         y += ystep) {
        svg << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << py(y) << "\" x2=\""
            << kLeft << "\" y2=\"" << py(y) << "\" stroke=\"#333\"/>\n";
        svg << "<line x1=\"" << kLeft << "\" y1=\"" << py(y) << "\" x2=\""
            << kLeft + plot_w << "\" y2=\"" << py(y)
            << "\" stroke=\"#eee\"/>\n";
        svg << "<text x=\"" << kLeft - 9 << "\" y=\"" << py(y) + 4
            << "\" font-size=\"11\" text-anchor=\"end\" "
            << "font-family=\"sans-serif\">" << num(y) << "</text>\n";
    }
    svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << kHeight - 12
        << "\" font-size=\"13\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\">" << esc(x_label) << "</text>\n";
    svg << "<text x=\"18\" y=\"" << kTop + plot_h / 2
        << "\" font-size=\"13\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" transform=\"rotate(-90 18 "
        << kTop + plot_h / 2 << ")\">" << esc(y_label) << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const Series& s = series[si];
        const char* color = kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))];
        svg << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.8\" points=\"";
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            svg << num(px(s.x[i])) << ',' << num(py(s.y[i])) << ' ';
        }
        svg << "\"/>\n";
        const double ly = kTop + 16.0 + 18.0 * static_cast<double>(si);
        svg << "<line x1=\"" << kLeft + plot_w + 12 << "\" y1=\"" << ly
            << "\" x2=\"" << kLeft + plot_w + 34 << "\" y2=\"" << ly
            << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        svg << "<text x=\"" << kLeft + plot_w + 40 << "\" y=\"" << ly + 4
            << "\" font-size=\"11\" font-family=\"sans-serif\">" << esc(s.name)
            << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace feelsim
