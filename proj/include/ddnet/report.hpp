#pragma once

#include <string>
#include <vector>

#include "ddnet/metrics.hpp"

namespace ddnet {

struct CapProfile {
    std::string variable;
    std::string metric;  // "rmse" or "r"
    std::vector<CapPoint> points;
};

struct RegionalTable {
    std::string variable;
    std::vector<RegionMetrics> rows;
};

/// Renders metric CSV tables plus SVG line charts and heatmaps into
/// out_dir. Output is deterministic: identical inputs give identical bytes.
void emit_report(const std::vector<MetricSeries>& series, const std::vector<CapProfile>& caps,
                 const std::vector<RegionalTable>& regions, const std::string& out_dir);

/// Standalone SVG helpers, also used by the CLI.
std::string render_line_chart(const std::vector<std::pair<std::string, std::vector<double>>>& lines,
                              const std::string& title, const std::string& y_label);
std::string render_heatmap(const GridField& field, const std::string& title);

}  // namespace ddnet
