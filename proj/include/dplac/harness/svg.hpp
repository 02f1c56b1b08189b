#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "dplac/core/error.hpp"

namespace dplac::harness::svg {

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> lo;  // optional band, same length as y
    std::vector<double> hi;
};

struct Polyline {
    std::vector<std::array<double, 2>> points;
    std::string stroke = "#1f77b4";
    double width = 1.5;
    bool dashed = false;
    int group = -1;  // >= 0: drawn as a <polyline> inside the group's <g>; otherwise a plain <path>
};

inline constexpr std::array<const char*, 8> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                                     "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

/// Axis frame with a fixed 640x400 canvas and linear data mapping.
class Canvas {
public:
    Canvas(std::string title, std::string xlabel, std::string ylabel)
        : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)) {}

    void include(double x, double y) {
        if (!std::isfinite(x) || !std::isfinite(y)) return;
        x0_ = std::min(x0_, x);
        x1_ = std::max(x1_, x);
        y0_ = std::min(y0_, y);
        y1_ = std::max(y1_, y);
    }

    void equal_aspect() { equal_ = true; }

    void add(std::string element) { body_.push_back(std::move(element)); }

    [[nodiscard]] double px(double x) const { return kLeft + (x - lo_x()) / span_x() * plot_w(); }
    [[nodiscard]] double py(double y) const { return kTop + plot_h() - (y - lo_y()) / span_y() * plot_h(); }

    [[nodiscard]] std::string path(const std::vector<std::array<double, 2>>& pts) const {
        std::string d;
        bool pen = false;
        for (const auto& p : pts) {
            if (!std::isfinite(p[0]) || !std::isfinite(p[1])) {
                pen = false;
                continue;
            }
            d += (pen ? " L" : " M") + num(px(p[0])) + "," + num(py(p[1]));
            pen = true;
        }
        return d.empty() ? d : d.substr(1);
    }

    [[nodiscard]] std::string render(const std::vector<std::string>& legend = {},
                                     const std::vector<std::string>& colors = {}) const {
        std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" height=\"400\" viewBox=\"0 0 640 400\">\n";
        s += "<rect width=\"640\" height=\"400\" fill=\"white\"/>\n";
        s += "<text x=\"320\" y=\"20\" text-anchor=\"middle\" font-size=\"14\" font-family=\"sans-serif\">" +
             escape(title_) + "</text>\n";
        s += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(plot_w()) + "\" height=\"" +
             num(plot_h()) + "\" fill=\"none\" stroke=\"black\"/>\n";
        for (int i = 0; i <= 4; ++i) {
            const double fx = lo_x() + span_x() * i / 4.0;
            const double fy = lo_y() + span_y() * i / 4.0;
            s += "<text x=\"" + num(px(fx)) + "\" y=\"" + num(kTop + plot_h() + 16) +
                 "\" text-anchor=\"middle\" font-size=\"10\" font-family=\"sans-serif\">" + tick(fx) + "</text>\n";
            s += "<text x=\"" + num(kLeft - 6) + "\" y=\"" + num(py(fy) + 3) +
                 "\" text-anchor=\"end\" font-size=\"10\" font-family=\"sans-serif\">" + tick(fy) + "</text>\n";
        }
        s += "<text x=\"" + num(kLeft + plot_w() / 2) + "\" y=\"392\" text-anchor=\"middle\" font-size=\"12\" "
             "font-family=\"sans-serif\">" + escape(xlabel_) + "</text>\n";
        s += "<text x=\"14\" y=\"" + num(kTop + plot_h() / 2) + "\" text-anchor=\"middle\" font-size=\"12\" "
             "font-family=\"sans-serif\" transform=\"rotate(-90 14 " + num(kTop + plot_h() / 2) + ")\">" +
             escape(ylabel_) + "</text>\n";
        for (const auto& b : body_) s += b + "\n";
        for (std::size_t i = 0; i < legend.size(); ++i) {
            const double y = kTop + 12 + 14.0 * static_cast<double>(i);
            const std::string c = i < colors.size() ? colors[i] : kPalette[i % kPalette.size()];
            s += "<rect x=\"" + num(kLeft + plot_w() - 150) + "\" y=\"" + num(y - 8) +
                 "\" width=\"10\" height=\"10\" fill=\"" + c + "\"/>\n";
            s += "<text x=\"" + num(kLeft + plot_w() - 135) + "\" y=\"" + num(y) +
                 "\" font-size=\"10\" font-family=\"sans-serif\">" + escape(legend[i]) + "</text>\n";
        }
        s += "</svg>\n";
        return s;
    }

private:
    static constexpr double kLeft = 70.0;
    static constexpr double kTop = 30.0;
    [[nodiscard]] static double plot_w() { return 540.0; }
    [[nodiscard]] static double plot_h() { return 320.0; }

    [[nodiscard]] bool empty() const { return x0_ > x1_; }
    [[nodiscard]] double lo_x() const { return empty() ? 0.0 : x0_ - pad(x1_ - x0_, 0) * (equal_ ? extra_x() : 0.0); }
    [[nodiscard]] double lo_y() const { return empty() ? 0.0 : y0_ - pad(y1_ - y0_, 1) * (equal_ ? extra_y() : 0.0); }
    [[nodiscard]] double span_x() const {
        if (empty()) return 1.0;
        const double s = std::max(x1_ - x0_, 1e-9);
        return equal_ ? s * (1.0 + 2.0 * extra_x()) : s;
    }
    [[nodiscard]] double span_y() const {
        if (empty()) return 1.0;
        const double s = std::max(y1_ - y0_, 1e-9);
        return equal_ ? s * (1.0 + 2.0 * extra_y()) : s;
    }
    // Equal aspect: widen the tighter axis so one data unit has the same length on both.
    [[nodiscard]] double extra_x() const {
        const double sx = std::max(x1_ - x0_, 1e-9), sy = std::max(y1_ - y0_, 1e-9);
        const double need = sy * plot_w() / plot_h();
        return need > sx ? 0.5 * (need - sx) / sx : 0.0;
    }
    [[nodiscard]] double extra_y() const {
        const double sx = std::max(x1_ - x0_, 1e-9), sy = std::max(y1_ - y0_, 1e-9);
        const double need = sx * plot_h() / plot_w();
        return need > sy ? 0.5 * (need - sy) / sy : 0.0;
    }
    [[nodiscard]] static double pad(double span, int) { return std::max(span, 1e-9); }

    static std::string tick(double v) {
        char buf[32];
        if (v != 0.0 && (std::abs(v) >= 1e5 || std::abs(v) < 1e-2)) std::snprintf(buf, sizeof buf, "%.2e", v);
        else std::snprintf(buf, sizeof buf, "%.3g", v);
        return buf;
    }

    std::string title_, xlabel_, ylabel_;
    double x0_ = 1e300, x1_ = -1e300, y0_ = 1e300, y1_ = -1e300;
    bool equal_ = false;
    std::vector<std::string> body_;
};

/// Line chart with optional shaded bands. Empty input gives empty axes.
inline std::string line_chart(const std::string& title, const std::string& xlabel, const std::string& ylabel,
                              const std::vector<Series>& series) {
    Canvas c(title, xlabel, ylabel);
    for (const auto& s : series) {
        if (s.x.size() != s.y.size()) throw ShapeError("series '" + s.name + "' has mismatched x and y");
        const bool band = !s.lo.empty();
        if (band && (s.lo.size() != s.y.size() || s.hi.size() != s.y.size()))
            throw ShapeError("series '" + s.name + "' has a band of the wrong length");
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            c.include(s.x[i], s.y[i]);
            if (band) {
                c.include(s.x[i], s.lo[i]);
                c.include(s.x[i], s.hi[i]);
            }
        }
    }
    std::vector<std::string> names, colors;
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const std::string color = kPalette[k % kPalette.size()];
        if (!s.lo.empty() && !s.x.empty()) {
            std::vector<std::array<double, 2>> poly;
            for (std::size_t i = 0; i < s.x.size(); ++i) poly.push_back({s.x[i], s.hi[i]});
            for (std::size_t i = s.x.size(); i-- > 0;) poly.push_back({s.x[i], s.lo[i]});
            c.add("<path d=\"" + c.path(poly) + " Z\" fill=\"" + color + "\" fill-opacity=\"0.2\" stroke=\"none\"/>");
        }
        std::vector<std::array<double, 2>> pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) pts.push_back({s.x[i], s.y[i]});
        if (!pts.empty())
            c.add("<path d=\"" + c.path(pts) + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>");
        names.push_back(s.name);
        colors.push_back(color);
    }
    return c.render(names, colors);
}

/// Vertical bars with optional symmetric error whiskers.
inline std::string bar_chart(const std::string& title, const std::string& ylabel, const std::vector<std::string>& labels,
                             const std::vector<double>& values, const std::vector<double>& errors = {}) {
    if (labels.size() != values.size()) throw ShapeError("bar labels and values differ in length");
    if (!errors.empty() && errors.size() != values.size()) throw ShapeError("bar errors have the wrong length");
    Canvas c(title, "", ylabel);
    const double n = static_cast<double>(values.size());
    if (!values.empty()) {
        c.include(0.0, 0.0);
        c.include(n, 0.0);
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double e = errors.empty() ? 0.0 : errors[i];
        c.include(static_cast<double>(i) + 0.5, values[i] + e);
        c.include(static_cast<double>(i) + 0.5, values[i] - e);
    }
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double x0 = c.px(static_cast<double>(i) + 0.15), x1 = c.px(static_cast<double>(i) + 0.85);
        const double y0 = c.py(0.0), y1 = c.py(values[i]);
        c.add("<rect x=\"" + num(x0) + "\" y=\"" + num(std::min(y0, y1)) + "\" width=\"" + num(x1 - x0) +
              "\" height=\"" + num(std::abs(y1 - y0)) + "\" fill=\"" + kPalette[i % kPalette.size()] + "\"/>");
        if (!errors.empty()) {
            const double xm = c.px(static_cast<double>(i) + 0.5);
            c.add("<line x1=\"" + num(xm) + "\" y1=\"" + num(c.py(values[i] - errors[i])) + "\" x2=\"" + num(xm) +
                  "\" y2=\"" + num(c.py(values[i] + errors[i])) + "\" stroke=\"black\"/>");
        }
        c.add("<text x=\"" + num(c.px(static_cast<double>(i) + 0.5)) + "\" y=\"" + num(c.py(0.0) + 12) +
              "\" text-anchor=\"middle\" font-size=\"10\" font-family=\"sans-serif\">" + escape(labels[i]) + "</text>");
    }
    return c.render();
}

/// Horizontal projection: vehicle tracks as paths plus grouped candidate
/// overlays, one <g data-stage> per group.
inline std::string polyline_plot(const std::string& title, const std::vector<Polyline>& lines,
                                 const std::vector<std::string>& legend = {},
                                 const std::vector<std::string>& legend_colors = {}) {
    Canvas c(title, "x (m)", "y (m)");
    c.equal_aspect();
    for (const auto& l : lines)
        for (const auto& p : l.points) c.include(p[0], p[1]);
    const auto style = [](const Polyline& l) {
        return "fill=\"none\" stroke=\"" + l.stroke + "\" stroke-width=\"" + num(l.width) + "\"" +
               (l.dashed ? " stroke-dasharray=\"4 3\"" : "");
    };
    std::vector<int> groups;
    for (const auto& l : lines) {
        if (l.group < 0) {
            if (!l.points.empty()) c.add("<path d=\"" + c.path(l.points) + "\" " + style(l) + "/>");
        } else if (std::find(groups.begin(), groups.end(), l.group) == groups.end()) {
            groups.push_back(l.group);
        }
    }
    for (int g : groups) {
        std::string block = "<g data-stage=\"" + std::to_string(g) + "\">";
        for (const auto& l : lines) {
            if (l.group != g) continue;
            std::string pts;
            for (const auto& p : l.points) pts += (pts.empty() ? "" : " ") + num(c.px(p[0])) + "," + num(c.py(p[1]));
            block += "\n<polyline points=\"" + pts + "\" " + style(l) + "/>";
        }
        c.add(block + "\n</g>");
    }
    return c.render(legend, legend_colors);
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot write '" + path.string() + "'");
    os << content;
}

}  // namespace dplac::harness::svg
