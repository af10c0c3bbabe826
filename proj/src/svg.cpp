#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "dtse/bench.hpp"

namespace dtse::bench {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

std::string tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
};

struct Panel {
    double x = 0, y = 0, w = 0, h = 0;
    std::string title;
    std::string xlabel;
    std::vector<Series> series;
};

void draw_panel(std::ostringstream& out, const Panel& p, const std::map<std::string, std::string>& colors) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : p.series)
        for (auto [x, y] : s.points) {
            x0 = std::min(x0, x);
            x1 = std::max(x1, x);
            y0 = std::min(y0, y);
            y1 = std::max(y1, y);
        }
    if (!std::isfinite(x0)) return;
    if (x1 == x0) { x0 -= 0.5; x1 += 0.5; }
    if (y1 == y0) { y0 -= 0.5 * std::max(std::abs(y0), 1e-6); y1 += 0.5 * std::max(std::abs(y1), 1e-6); }
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;

    const double left = p.x + 60, right = p.x + p.w - 10, top = p.y + 30, bottom = p.y + p.h - 40;
    auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * (right - left); };
    auto sy = [&](double y) { return bottom - (y - y0) / (y1 - y0) * (bottom - top); };

    out << "<g>\n";
    out << "<text x=\"" << num((left + right) / 2) << "\" y=\"" << num(p.y + 18)
        << "\" text-anchor=\"middle\" font-size=\"13\">" << p.title << "</text>\n";
    out << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(right - left) << "\" height=\""
        << num(bottom - top) << "\" fill=\"none\" stroke=\"#444\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double yv = y0 + (y1 - y0) * i / 4.0;
        const double xv = x0 + (x1 - x0) * i / 4.0;
        out << "<text x=\"" << num(left - 4) << "\" y=\"" << num(sy(yv) + 4)
            << "\" text-anchor=\"end\" font-size=\"10\">" << tick(yv) << "</text>\n";
        out << "<text x=\"" << num(sx(xv)) << "\" y=\"" << num(bottom + 14)
            << "\" text-anchor=\"middle\" font-size=\"10\">" << tick(xv) << "</text>\n";
    }
    out << "<text x=\"" << num((left + right) / 2) << "\" y=\"" << num(bottom + 30)
        << "\" text-anchor=\"middle\" font-size=\"11\">" << p.xlabel << "</text>\n";
    for (const auto& s : p.series) {
        const auto& color = colors.at(s.label);
        out << "<polyline class=\"series\" data-series=\"" << s.label << "\" fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.points.size(); ++i)
            out << (i ? " " : "") << num(sx(s.points[i].first)) << ',' << num(sy(s.points[i].second));
        out << "\"/>\n";
        if (s.points.size() <= 12)
            for (auto [x, y] : s.points)
                out << "<circle cx=\"" << num(sx(x)) << "\" cy=\"" << num(sy(y)) << "\" r=\"2.5\" fill=\"" << color
                    << "\"/>\n";
    }
    out << "</g>\n";
}

void legend(std::ostringstream& out, const std::vector<std::string>& labels,
            const std::map<std::string, std::string>& colors, double x, double y) {
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double lx = x + 130.0 * static_cast<double>(i);
        out << "<line x1=\"" << num(lx) << "\" y1=\"" << num(y) << "\" x2=\"" << num(lx + 20) << "\" y2=\"" << num(y)
            << "\" stroke=\"" << colors.at(labels[i]) << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << num(lx + 25) << "\" y=\"" << num(y + 4) << "\" font-size=\"11\">" << labels[i]
            << "</text>\n";
    }
}

std::map<std::string, std::string> assign_colors(const std::vector<std::string>& labels) {
    std::map<std::string, std::string> colors;
    for (std::size_t i = 0; i < labels.size(); ++i) colors[labels[i]] = kPalette[i % std::size(kPalette)];
    return colors;
}

std::string header(double w, double h) {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(w) << "\" height=\"" << num(h)
        << "\" viewBox=\"0 0 " << num(w) << ' ' << num(h) << "\" font-family=\"sans-serif\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    return out.str();
}

}  // namespace

std::string sweep_svg(std::span<const SummaryRow> summary) {
    std::vector<std::string> metrics, methods;
    for (const auto& s : summary) {
        if (std::find(metrics.begin(), metrics.end(), s.metric) == metrics.end()) metrics.push_back(s.metric);
        if (std::find(methods.begin(), methods.end(), s.method) == methods.end()) methods.push_back(s.method);
    }
    const auto colors = assign_colors(methods);
    const double pw = 320, ph = 260;
    const double width = pw * static_cast<double>(std::max<std::size_t>(metrics.size(), 1));
    const double height = ph + 40;
    std::ostringstream out;
    out << header(width, height);
    for (std::size_t m = 0; m < metrics.size(); ++m) {
        Panel panel{pw * static_cast<double>(m), 0, pw, ph, "mean " + metrics[m] + " vs missing ratio", "alpha", {}};
        for (const auto& method : methods) {
            Series s{method, {}};
            for (const auto& row : summary)
                if (row.metric == metrics[m] && row.method == method) s.points.emplace_back(row.alpha, row.mean);
            if (s.points.empty()) continue;
            std::sort(s.points.begin(), s.points.end());
            panel.series.push_back(std::move(s));
        }
        draw_panel(out, panel, colors);
    }
    legend(out, methods, colors, 20, ph + 20);
    out << "</svg>\n";
    return out.str();
}

std::string timeseries_svg(const Trace& trace) {
    std::vector<std::string> labels{"truth"};
    for (const auto& e : trace.estimates) labels.push_back(e.first);
    const auto colors = assign_colors(labels);
    const double width = 720, ph = 320;
    std::ostringstream out;
    out << header(width, ph + 40);
    Panel panel{0, 0, width, ph, "|V| at " + trace.node + " (alpha " + tick(trace.alpha) + ", seed " +
                                      std::to_string(trace.seed) + ")", "time step", {}};
    Series truth{"truth", {}};
    for (std::size_t i = 0; i < trace.steps.size(); ++i)
        truth.points.emplace_back(static_cast<double>(trace.steps[i]), trace.truth[i]);
    panel.series.push_back(std::move(truth));
    for (const auto& [name, values] : trace.estimates) {
        Series s{name, {}};
        for (std::size_t i = 0; i < trace.steps.size() && i < values.size(); ++i)
            if (std::isfinite(values[i])) s.points.emplace_back(static_cast<double>(trace.steps[i]), values[i]);
        if (!s.points.empty()) panel.series.push_back(std::move(s));
    }
    draw_panel(out, panel, colors);
    legend(out, labels, colors, 20, ph + 20);
    out << "</svg>\n";
    return out.str();
}

}  // namespace dtse::bench
