#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ddnet/grid.hpp"

namespace ddnet {

/// Per-instance verification record for one experiment and variable.
struct MetricRecord {
    int time_index = 0;
    double rmse = 0.0;
    std::optional<double> r;  // undefined for constant fields
};

struct MetricSeries {
    std::string experiment;
    std::string variable;
    std::vector<MetricRecord> records;

    double mean_rmse() const;
};

double rmse(const GridField& truth, const GridField& pred);

/// Pearson correlation; nullopt if either field is constant.
std::optional<double> corrcoef(const GridField& truth, const GridField& pred);

enum class CapDirection { Below, Above };

struct CapPoint {
    double threshold = 0.0;
    double percent = 0.0;
};

/// Percentage of instances with value <= threshold (Below) or > threshold
/// (Above), for each threshold.
std::vector<CapPoint> cap_profile(const std::vector<double>& series,
                                  const std::vector<double>& thresholds, CapDirection direction);

/// Default threshold grid: 200 evenly spaced points spanning observed min..max.
std::vector<double> default_cap_thresholds(const std::vector<double>& series, int points = 200);

/// Pairwise Pearson correlation over all cells and times of the named stacks.
/// Constant channels yield flagged-undefined entries.
struct CorrelationMatrix {
    std::vector<std::string> names;
    std::vector<std::vector<std::optional<double>>> r;
};

CorrelationMatrix correlation_matrix(
    const std::vector<std::pair<std::string, std::vector<GridField>>>& channels);

struct Region {
    std::string name;
    int y0 = 0, y1 = 0;  // [y0, y1)
    int x0 = 0, x1 = 0;  // [x0, x1)
};

struct RegionSet {
    std::vector<Region> regions;

    void validate(int H, int W) const;
    /// 2 x 4 grid of equal boxes, hemisphere x quadrant naming.
    static RegionSet default_boxes(int H, int W);
};

struct RegionMetrics {
    std::string region;
    double rmse = 0.0;
    std::optional<double> r;
};

std::vector<RegionMetrics> regional_eval(const GridField& truth, const GridField& pred,
                                         const RegionSet& regions);

}  // namespace ddnet
