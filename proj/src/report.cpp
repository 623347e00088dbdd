#include "ddnet/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

namespace ddnet {

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

std::string opt_fmt(const std::optional<double>& v) { return v ? fmt(*v) : "undefined"; }

const char* kPalette[8] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                           "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

}  // namespace

std::string render_line_chart(const std::vector<std::pair<std::string, std::vector<double>>>& lines,
                              const std::string& title, const std::string& y_label) {
    const int Wpx = 720, Hpx = 420, ml = 60, mr = 150, mt = 40, mb = 40;
    double ymin = 0.0, ymax = 1e-12;
    std::size_t nmax = 2;
    for (const auto& [name, ys] : lines) {
        for (double y : ys) {
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
        nmax = std::max(nmax, ys.size());
    }
    if (ymax == ymin) ymax = ymin + 1.0;

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(Wpx) +
           "\" height=\"" + std::to_string(Hpx) + "\">\n";
    svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg += "<text x=\"" + std::to_string(Wpx / 2) + "\" y=\"24\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"16\">" + title + "</text>\n";
    svg += "<text x=\"16\" y=\"" + std::to_string(Hpx / 2) +
           "\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 " +
           std::to_string(Hpx / 2) + ")\" text-anchor=\"middle\">" + y_label + "</text>\n";
    // axes
    svg += "<line x1=\"" + std::to_string(ml) + "\" y1=\"" + std::to_string(Hpx - mb) +
           "\" x2=\"" + std::to_string(Wpx - mr) + "\" y2=\"" + std::to_string(Hpx - mb) +
           "\" stroke=\"black\"/>\n";
    svg += "<line x1=\"" + std::to_string(ml) + "\" y1=\"" + std::to_string(mt) + "\" x2=\"" +
           std::to_string(ml) + "\" y2=\"" + std::to_string(Hpx - mb) + "\" stroke=\"black\"/>\n";
    for (int tick = 0; tick <= 4; ++tick) {
        const double v = ymin + (ymax - ymin) * tick / 4.0;
        const double y = (Hpx - mb) - (Hpx - mb - mt) * tick / 4.0;
        svg += "<text x=\"" + std::to_string(ml - 6) + "\" y=\"" + fmt(y + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + fmt(v) +
               "</text>\n";
    }
    int li = 0;
    for (const auto& [name, ys] : lines) {
        const char* color = kPalette[li % 8];
        std::string points;
        for (std::size_t i = 0; i < ys.size(); ++i) {
            const double x = ml + (Wpx - ml - mr) * static_cast<double>(i) /
                                      static_cast<double>(nmax - 1);
            const double y =
                (Hpx - mb) - (Hpx - mb - mt) * (ys[i] - ymin) / (ymax - ymin);
            points += fmt(x) + "," + fmt(y) + " ";
        }
        svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
               "\" stroke-width=\"1.5\" points=\"" + points + "\"/>\n";
        svg += "<text x=\"" + std::to_string(Wpx - mr + 10) + "\" y=\"" +
               std::to_string(mt + 16 * li) + "\" font-family=\"sans-serif\" font-size=\"11\" "
               "fill=\"" + color + "\">" + name + "</text>\n";
        ++li;
    }
    svg += "</svg>\n";
    return svg;
}

std::string render_heatmap(const GridField& field, const std::string& title) {
    const int cell = 10, mt = 30;
    const int Wpx = field.W * cell, Hpx = field.H * cell + mt;
    double vmin = field.values.empty() ? 0.0 : field.values[0], vmax = vmin;
    for (double v : field.values) {
        vmin = std::min(vmin, v);
        vmax = std::max(vmax, v);
    }
    if (vmax == vmin) vmax = vmin + 1.0;
    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(Wpx) +
           "\" height=\"" + std::to_string(Hpx) + "\">\n";
    svg += "<text x=\"4\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\">" + title +
           " [" + fmt(vmin) + ", " + fmt(vmax) + "]</text>\n";
    for (int y = 0; y < field.H; ++y)
        for (int x = 0; x < field.W; ++x) {
            const double t = (field.at(y, x) - vmin) / (vmax - vmin);
            const int r = static_cast<int>(std::lround(255 * t));
            const int b = static_cast<int>(std::lround(255 * (1 - t)));
            char color[8];
            std::snprintf(color, sizeof(color), "#%02x20%02x", r, b);
            svg += "<rect x=\"" + std::to_string(x * cell) + "\" y=\"" +
                   std::to_string(mt + y * cell) + "\" width=\"10\" height=\"10\" fill=\"" +
                   color + "\"/>\n";
        }
    svg += "</svg>\n";
    return svg;
}

void emit_report(const std::vector<MetricSeries>& series, const std::vector<CapProfile>& caps,
                 const std::vector<RegionalTable>& regions, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);

    {
        std::ofstream f(out_dir + "/metrics.csv");
        if (!f) throw std::runtime_error("cannot write " + out_dir + "/metrics.csv");
        f << "experiment,variable,time_index,rmse,r\n";
        for (const auto& s : series)
            for (const auto& rec : s.records)
                f << s.experiment << "," << s.variable << "," << rec.time_index << ","
                  << fmt(rec.rmse) << "," << opt_fmt(rec.r) << "\n";
    }
    {
        std::ofstream f(out_dir + "/cap.csv");
        f << "variable,metric,threshold,percent\n";
        for (const auto& c : caps)
            for (const auto& p : c.points)
                f << c.variable << "," << c.metric << "," << fmt(p.threshold) << ","
                  << fmt(p.percent) << "\n";
    }
    {
        std::ofstream f(out_dir + "/regions.csv");
        f << "region,variable,rmse,r\n";
        for (const auto& t : regions)
            for (const auto& row : t.rows)
                f << row.region << "," << t.variable << "," << fmt(row.rmse) << ","
                  << opt_fmt(row.r) << "\n";
    }

    if (!series.empty()) {
        std::vector<std::pair<std::string, std::vector<double>>> lines;
        for (const auto& s : series) {
            std::vector<double> ys;
            for (const auto& rec : s.records) ys.push_back(rec.rmse);
            lines.emplace_back(s.experiment + "/" + s.variable, std::move(ys));
        }
        std::ofstream f(out_dir + "/rmse_series.svg");
        f << render_line_chart(lines, "RMSE over time", "RMSE");
    }
    if (!caps.empty()) {
        std::vector<std::pair<std::string, std::vector<double>>> lines;
        for (const auto& c : caps) {
            std::vector<double> ys;
            for (const auto& p : c.points) ys.push_back(p.percent);
            lines.emplace_back(c.variable + "/" + c.metric, std::move(ys));
        }
        std::ofstream f(out_dir + "/cap.svg");
        f << render_line_chart(lines, "Cumulative accuracy profiles", "percent");
    }
}

}  // namespace ddnet
