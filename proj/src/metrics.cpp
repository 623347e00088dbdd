#include "ddnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ddnet {

double MetricSeries::mean_rmse() const {
    if (records.empty()) return 0.0;
    double s = 0;
    for (const auto& r : records) s += r.rmse;
    return s / static_cast<double>(records.size());
}

double rmse(const GridField& truth, const GridField& pred) {
    if (!truth.same_shape(pred)) throw std::invalid_argument("rmse: shape mismatch");
    if (truth.size() == 0) throw std::invalid_argument("rmse: empty fields");
    double acc = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const double d = truth.values[i] - pred.values[i];
        acc += d * d;
    }
    return std::sqrt(acc / static_cast<double>(truth.size()));
}

namespace {

std::optional<double> pearson(const double* a, const double* b, std::size_t n) {
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double saa = 0, sbb = 0, sab = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if (saa == 0.0 || sbb == 0.0) return std::nullopt;  // constant field: R undefined
    return sab / std::sqrt(saa * sbb);
}

}  // namespace

std::optional<double> corrcoef(const GridField& truth, const GridField& pred) {
    if (!truth.same_shape(pred)) throw std::invalid_argument("corrcoef: shape mismatch");
    return pearson(truth.values.data(), pred.values.data(), truth.size());
}

std::vector<CapPoint> cap_profile(const std::vector<double>& series,
                                  const std::vector<double>& thresholds,
                                  CapDirection direction) {
    if (series.empty()) throw std::invalid_argument("cap_profile: empty series");
    std::vector<CapPoint> out;
    out.reserve(thresholds.size());
    const double K = static_cast<double>(series.size());
    for (double thr : thresholds) {
        std::size_t count = 0;
        for (double v : series)
            count += (direction == CapDirection::Below) ? (v <= thr) : (v > thr);
        out.push_back({thr, 100.0 * static_cast<double>(count) / K});
    }
    return out;
}

std::vector<double> default_cap_thresholds(const std::vector<double>& series, int points) {
    if (series.empty()) throw std::invalid_argument("cap thresholds: empty series");
    const auto [mn, mx] = std::minmax_element(series.begin(), series.end());
    std::vector<double> out(static_cast<std::size_t>(points));
    for (int i = 0; i < points; ++i)
        out[static_cast<std::size_t>(i)] =
            *mn + (*mx - *mn) * static_cast<double>(i) / static_cast<double>(points - 1);
    return out;
}

CorrelationMatrix correlation_matrix(
    const std::vector<std::pair<std::string, std::vector<GridField>>>& channels) {
    const std::size_t n = channels.size();
    CorrelationMatrix m;
    m.r.assign(n, std::vector<std::optional<double>>(n));
    std::vector<std::vector<double>> flat(n);
    for (std::size_t i = 0; i < n; ++i) {
        m.names.push_back(channels[i].first);
        for (const auto& f : channels[i].second)
            flat[i].insert(flat[i].end(), f.values.begin(), f.values.end());
        if (i > 0 && flat[i].size() != flat[0].size())
            throw std::invalid_argument("correlation_matrix: stack size mismatch");
    }
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) {
            auto r = pearson(flat[i].data(), flat[j].data(), flat[i].size());
            m.r[i][j] = r;
            m.r[j][i] = r;
        }
    return m;
}

void RegionSet::validate(int H, int W) const {
    for (const auto& rg : regions) {
        if (!(0 <= rg.y0 && rg.y0 < rg.y1 && rg.y1 <= H && 0 <= rg.x0 && rg.x0 < rg.x1 &&
              rg.x1 <= W))
            throw std::invalid_argument("region '" + rg.name + "' is empty or out of bounds");
    }
}

RegionSet RegionSet::default_boxes(int H, int W) {
    RegionSet rs;
    const char* hemi[2] = {"NHem", "SHem"};
    const char* quad[4] = {"Q1", "Q2", "Q3", "Q4"};
    for (int hy = 0; hy < 2; ++hy)
        for (int qx = 0; qx < 4; ++qx)
            rs.regions.push_back({std::string(hemi[hy]) + "-" + quad[qx], hy * H / 2,
                                  (hy + 1) * H / 2, qx * W / 4, (qx + 1) * W / 4});
    return rs;
}

std::vector<RegionMetrics> regional_eval(const GridField& truth, const GridField& pred,
                                         const RegionSet& regions) {
    if (!truth.same_shape(pred)) throw std::invalid_argument("regional_eval: shape mismatch");
    regions.validate(truth.H, truth.W);
    std::vector<RegionMetrics> out;
    for (const auto& rg : regions.regions) {
        std::vector<double> a, b;
        a.reserve(static_cast<std::size_t>((rg.y1 - rg.y0) * (rg.x1 - rg.x0)));
        for (int y = rg.y0; y < rg.y1; ++y)
            for (int x = rg.x0; x < rg.x1; ++x) {
                a.push_back(truth.at(y, x));
                b.push_back(pred.at(y, x));
            }
        double acc = 0;
        for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] - b[i]) * (a[i] - b[i]);
        RegionMetrics rm;
        rm.region = rg.name;
        rm.rmse = std::sqrt(acc / static_cast<double>(a.size()));
        rm.r = pearson(a.data(), b.data(), a.size());
        out.push_back(std::move(rm));
    }
    return out;
}

}  // namespace ddnet
