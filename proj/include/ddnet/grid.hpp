#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace ddnet {

enum class Units { MicrogramPerCubicMeter, Dimensionless };

/// One scalar field on an H x W lat-lon-like grid, row-major (y, x).
struct GridField {
    int H = 0;
    int W = 0;
    std::vector<double> values;
    Units units = Units::Dimensionless;

    GridField() = default;
    GridField(int h, int w, Units u = Units::Dimensionless, double fill = 0.0)
        : H(h), W(w), values(static_cast<std::size_t>(h) * w, fill), units(u) {}

    double& at(int y, int x) { return values[static_cast<std::size_t>(y) * W + x]; }
    double at(int y, int x) const { return values[static_cast<std::size_t>(y) * W + x]; }
    std::size_t size() const { return values.size(); }

    double sum() const {
        double s = 0;
        for (double v : values) s += v;
        return s;
    }
    void clip_nonnegative() {
        for (double& v : values)
            if (v < 0) v = 0;
    }
    bool same_shape(const GridField& o) const { return H == o.H && W == o.W; }
};

/// Model state at one time: paired PM2.5 and AOD550 fields.
struct StateSnapshot {
    int time_index = 0;
    GridField pm25;    // ug/m3
    GridField aod550;  // dimensionless
};

/// Exogenous inputs for one step: 5 meteorological + 2 emission channels.
/// Geopotential is static over time and doubles as topography.
struct AuxiliaryFrame {
    int time_index = 0;
    GridField t2m, u10, v10, humidity, geopotential;
    GridField bc_emis, oc_emis;

    static constexpr int kChannels = 7;
    const GridField& channel(int i) const {
        switch (i) {
            case 0: return t2m;
            case 1: return u10;
            case 2: return v10;
            case 3: return humidity;
            case 4: return geopotential;
            case 5: return bc_emis;
            case 6: return oc_emis;
        }
        throw std::out_of_range("aux channel index");
    }
};

/// Masked, noisy AOD550 observations. Unobserved cells hold a sentinel
/// and must never be read as data.
struct ObservationSet {
    static constexpr double kSentinel = std::numeric_limits<double>::quiet_NaN();

    int time_index = 0;
    GridField values;
    std::vector<bool> mask;  // true = observed

    std::size_t observed_count() const {
        std::size_t n = 0;
        for (bool m : mask) n += m ? 1 : 0;
        return n;
    }
    bool empty() const { return observed_count() == 0; }
};

/// Timeline: step length, dataset split indices, and DA cadence.
struct TimeGrid {
    double dt_hours = 3.0;
    int T0 = 0;
    int T1 = 0;
    int T2 = 0;
    int T_end = 0;
    int k = 4;  // DA every k steps (12 h at 3 h steps)

    void validate() const {
        if (!(T0 < T1 && T1 < T2 && T2 < T_end))
            throw std::invalid_argument("time grid: need T0 < T1 < T2 < T_end");
        if (k < 1) throw std::invalid_argument("time grid: k must be >= 1");
    }
};

}  // namespace ddnet
