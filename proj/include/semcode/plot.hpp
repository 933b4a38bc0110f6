#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "semcode/error.hpp"

namespace semcode {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw Error(ErrorCode::UnknownColumn, "no column named '" + name + "'");
    }
};

inline CsvTable parse_csv(const std::string& text) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (!line.empty() && line.back() == ',') fields.push_back("");
        if (first) {
            t.header = std::move(fields);
            first = false;
        } else {
            t.rows.push_back(std::move(fields));
        }
    }
    if (t.header.empty()) throw Error(ErrorCode::MalformedHeader, "CSV has no header row");
    return t;
}

inline CsvTable load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_csv(ss.str());
}

namespace detail {

inline std::string svg_num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string tick_label(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

inline constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                           "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

}  // namespace detail

/// Renders grouped (x, y) series from a CSV into a standalone 800x600 SVG:
/// axes, ticks, legend, one polyline per group. Output depends only on the
/// input bytes.
inline std::string render_plot_svg(const CsvTable& table, const std::string& x_col,
                                   const std::string& y_col, const std::string& group_col) {
    const std::size_t xi = table.column(x_col);
    const std::size_t yi = table.column(y_col);
    const std::size_t gi = table.column(group_col);

    struct Point {
        double x, y;
    };
    std::map<std::string, std::vector<Point>> groups;
    for (const auto& row : table.rows) {
        if (row.size() <= std::max({xi, yi, gi})) continue;
        char* end = nullptr;
        const double x = std::strtod(row[xi].c_str(), &end);
        if (end == row[xi].c_str() || std::isnan(x)) continue;
        const double y = std::strtod(row[yi].c_str(), &end);
        if (end == row[yi].c_str() || std::isnan(y)) continue;
        groups[row[gi]].push_back({x, y});
    }
    if (groups.empty()) throw Error(ErrorCode::InsufficientData, "no plottable rows");

    double xmin = 0, xmax = 0, ymin = 0, ymax = 0;
    bool init = false;
    for (auto& [name, pts] : groups) {
        std::stable_sort(pts.begin(), pts.end(), [](const Point& a, const Point& b) { return a.x < b.x; });
        for (const auto& p : pts) {
            if (!init) {
                xmin = xmax = p.x;
                ymin = ymax = p.y;
                init = true;
            }
            xmin = std::min(xmin, p.x);
            xmax = std::max(xmax, p.x);
            ymin = std::min(ymin, p.y);
            ymax = std::max(ymax, p.y);
        }
    }
    if (xmax == xmin) {
        xmax += 1.0;
        xmin -= 1.0;
    }
    if (ymax == ymin) {
        ymax += 1.0;
        ymin -= 1.0;
    }
    const double xpad = 0.05 * (xmax - xmin), ypad = 0.05 * (ymax - ymin);
    xmin -= xpad;
    xmax += xpad;
    ymin -= ypad;
    ymax += ypad;

    constexpr double W = 800, H = 600, L = 80, R = 30, T = 40, B = 70;
    const auto sx = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
    const auto sy = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" viewBox=\"0 0 800 600\" "
           "width=\"800\" height=\"600\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"800\" height=\"600\" fill=\"white\"/>\n";

    // axes
    svg += "<line x1=\"" + detail::svg_num(L) + "\" y1=\"" + detail::svg_num(H - B) + "\" x2=\"" +
           detail::svg_num(W - R) + "\" y2=\"" + detail::svg_num(H - B) + "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + detail::svg_num(L) + "\" y1=\"" + detail::svg_num(T) + "\" x2=\"" +
           detail::svg_num(L) + "\" y2=\"" + detail::svg_num(H - B) + "\" stroke=\"black\"/>\n";

    for (int i = 0; i <= 5; ++i) {
        const double fx = xmin + (xmax - xmin) * i / 5.0;
        const double px = sx(fx);
        svg += "<line x1=\"" + detail::svg_num(px) + "\" y1=\"" + detail::svg_num(H - B) + "\" x2=\"" +
               detail::svg_num(px) + "\" y2=\"" + detail::svg_num(H - B + 6) + "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + detail::svg_num(px) + "\" y=\"" + detail::svg_num(H - B + 22) +
               "\" font-size=\"12\" text-anchor=\"middle\">" + detail::tick_label(fx) + "</text>\n";
        const double fy = ymin + (ymax - ymin) * i / 5.0;
        const double py = sy(fy);
        svg += "<line x1=\"" + detail::svg_num(L - 6) + "\" y1=\"" + detail::svg_num(py) + "\" x2=\"" +
               detail::svg_num(L) + "\" y2=\"" + detail::svg_num(py) + "\" stroke=\"black\"/>\n";
        svg += "<text x=\"" + detail::svg_num(L - 10) + "\" y=\"" + detail::svg_num(py + 4) +
               "\" font-size=\"12\" text-anchor=\"end\">" + detail::tick_label(fy) + "</text>\n";
    }

    svg += "<text x=\"" + detail::svg_num((L + W - R) / 2) + "\" y=\"" + detail::svg_num(H - 25) +
           "\" font-size=\"14\" text-anchor=\"middle\">" + x_col + "</text>\n";
    svg += "<text x=\"22\" y=\"" + detail::svg_num((T + H - B) / 2) +
           "\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 22 " +
           detail::svg_num((T + H - B) / 2) + ")\">" + y_col + "</text>\n";
    svg += "<text x=\"" + detail::svg_num(W / 2) + "\" y=\"24\" font-size=\"15\" text-anchor=\"middle\">" +
           y_col + " vs " + x_col + "</text>\n";

    std::size_t gi_color = 0;
    double legend_y = T + 14;
    for (const auto& [name, pts] : groups) {
        const char* color = detail::kPalette[gi_color % 8];
        std::string poly;
        for (const auto& p : pts) {
            poly += detail::svg_num(sx(p.x)) + "," + detail::svg_num(sy(p.y)) + " ";
            svg += "<circle cx=\"" + detail::svg_num(sx(p.x)) + "\" cy=\"" + detail::svg_num(sy(p.y)) +
                   "\" r=\"3\" fill=\"" + color + "\"/>\n";
        }
        svg += "<polyline points=\"" + poly + "\" fill=\"none\" stroke=\"" + std::string(color) +
               "\" stroke-width=\"1.5\"/>\n";
        svg += "<rect x=\"" + detail::svg_num(W - R - 160) + "\" y=\"" + detail::svg_num(legend_y - 9) +
               "\" width=\"12\" height=\"12\" fill=\"" + color + "\"/>\n";
        svg += "<text x=\"" + detail::svg_num(W - R - 143) + "\" y=\"" + detail::svg_num(legend_y + 1) +
               "\" font-size=\"12\">" + group_col + "=" + name + "</text>\n";
        legend_y += 18;
        ++gi_color;
    }
    svg += "</svg>\n";
    return svg;
}

/// Plots from a CSV file; refuses to write anything when there is no data.
inline void cmd_plot(const std::string& csv_path, const std::string& x_col, const std::string& y_col,
                     const std::string& group_col, const std::string& out_svg) {
    const CsvTable table = load_csv(csv_path);
    const std::string svg = render_plot_svg(table, x_col, y_col, group_col);
    std::ofstream out(out_svg, std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write '" + out_svg + "'");
    out.write(svg.data(), static_cast<std::streamsize>(svg.size()));
    if (!out) throw Error(ErrorCode::IoError, "short write to '" + out_svg + "'");
}

}  // namespace semcode
