#pragma once

#include <chrono>
#include <optional>

#include "ddnet/assimilator.hpp"
#include "ddnet/metrics.hpp"

namespace ddnet {

/// Supplies the estimated forecast error at a DA time; either DANet-backed
/// or the explicitly-labeled truth oracle used as an upper-bound harness.
using ErrorEstimator =
    std::function<ErrorField(const GridField& aod_forecast, const ObservationSet& obs)>;

template <class S>
ErrorEstimator danet_estimator(NetworkWeights<S>& danet, const NetworkSpec& spec,
                               const ChannelStats& st) {
    return [&danet, spec, st](const GridField& f, const ObservationSet& o) {
        return estimate_error(danet, spec, st, f, o);
    };
}

/// Truth-oracle stub: err = truth - forecast, so the analysis equals truth
/// exactly. Reads truth by construction; never use outside harnesses.
inline ErrorEstimator truth_oracle_estimator(const DatasetReader& ds) {
    return [&ds](const GridField& f, const ObservationSet& o) {
        const GridField truth = ds.state(o.time_index).aod550;
        ErrorField err{o.time_index, GridField(f.H, f.W, Units::Dimensionless)};
        for (std::size_t i = 0; i < f.size(); ++i)
            err.error.values[i] = truth.values[i] - f.values[i];
        return err;
    };
}

struct CycleResult {
    MetricSeries aod_forecast_metrics;   // per forecast step
    MetricSeries pm25_forecast_metrics;  // per forecast step
    MetricSeries aod_analysis_metrics;   // per analysis time
    std::vector<int> analysis_times;
    std::vector<std::pair<int, StateSnapshot>> snapshots;  // emitted forecast states
    std::vector<double> cycle_seconds;  // wall clock per DA cycle
};

namespace detail {

inline void record_step(CycleResult& res, const DatasetReader& ds, int t, const GridField& pm,
                        const GridField& aod, int emit_cadence) {
    const StateSnapshot truth = ds.state(t);
    res.aod_forecast_metrics.records.push_back(
        {t, rmse(truth.aod550, aod), corrcoef(truth.aod550, aod)});
    res.pm25_forecast_metrics.records.push_back(
        {t, rmse(truth.pm25, pm), corrcoef(truth.pm25, pm)});
    if (emit_cadence > 0 && t % emit_cadence == 0) {
        StateSnapshot s;
        s.time_index = t;
        s.pm25 = pm;
        s.aod550 = aod;
        res.snapshots.emplace_back(t, std::move(s));
    }
}

}  // namespace detail

/// The operational cycle: initial analysis from truth, k-step PredNet
/// rollouts, observation preprocessing, DANet error estimation and
/// analysis update, reinitialization, repeated to the horizon.
template <class S>
CycleResult run_operational(NetworkWeights<S>& prednet, const NetworkSpec& spec,
                            const ChannelStats& st, const DatasetReader& ds,
                            const CycleSettings& cfg, const ErrorEstimator& estimator,
                            const ObsPolicy& policy = {}, std::optional<int> start = {}) {
    const int t0 = start.value_or(ds.time().T2);
    if (t0 < ds.time().T2)
        throw std::invalid_argument("run_operational: segment must start at or after T2");
    if (t0 + cfg.horizon >= ds.time().T_end)
        throw std::invalid_argument("run_operational: segment shorter than horizon");

    CycleResult res;
    res.aod_forecast_metrics = {"operational", "aod550", {}};
    res.pm25_forecast_metrics = {"operational", "pm25", {}};
    res.aod_analysis_metrics = {"operational-analysis", "aod550", {}};

    GridField analysis_aod = ds.state(t0).aod550;  // Step 1: initial analysis = truth
    int t = t0;
    while (t < t0 + cfg.horizon) {
        const auto cycle_start = std::chrono::steady_clock::now();
        const int steps = std::min(cfg.k, t0 + cfg.horizon - t);
        std::vector<AuxiliaryFrame> aux;
        for (int i = 1; i <= steps; ++i) aux.push_back(ds.aux(t + i));
        auto rollout = forecast_rollout(prednet, spec, st, analysis_aod, aux, steps);  // Step 2
        for (int i = 0; i < steps; ++i)
            detail::record_step(res, ds, t + i + 1, rollout[static_cast<std::size_t>(i)].first,
                                rollout[static_cast<std::size_t>(i)].second, cfg.emit_cadence);
        t += steps;
        const GridField& forecast_aod = rollout.back().second;
        analysis_aod = forecast_aod;
        if (t < t0 + cfg.horizon && steps == cfg.k && ds.has_obs(t)) {
            ObservationSet obs = preprocess_observations(ds.obs(t), policy);  // Step 3
            if (!obs.empty()) {
                ErrorField err = estimator(forecast_aod, obs);               // Step 4
                analysis_aod = analysis_update(forecast_aod, err);           // Steps 4-5
                res.analysis_times.push_back(t);
                const GridField truth = ds.state(t).aod550;
                res.aod_analysis_metrics.records.push_back(
                    {t, rmse(truth, analysis_aod), corrcoef(truth, analysis_aod)});
            }
        }
        res.cycle_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - cycle_start)
                .count());
    }
    return res;
}

/// PredNet-only baseline: one uninterrupted rollout over the horizon from
/// the same initial condition, with the same metric recording.
template <class S>
CycleResult run_prednet_only(NetworkWeights<S>& prednet, const NetworkSpec& spec,
                             const ChannelStats& st, const DatasetReader& ds,
                             const CycleSettings& cfg, std::optional<int> start = {}) {
    const int t0 = start.value_or(ds.time().T2);
    if (t0 + cfg.horizon >= ds.time().T_end)
        throw std::invalid_argument("run_prednet_only: segment shorter than horizon");

    CycleResult res;
    res.aod_forecast_metrics = {"prednet-only", "aod550", {}};
    res.pm25_forecast_metrics = {"prednet-only", "pm25", {}};
    res.aod_analysis_metrics = {"prednet-only", "aod550", {}};

    std::vector<AuxiliaryFrame> aux;
    for (int i = 1; i <= cfg.horizon; ++i) aux.push_back(ds.aux(t0 + i));
    auto rollout = forecast_rollout(prednet, spec, st, ds.state(t0).aod550, aux, cfg.horizon);
    for (int i = 0; i < cfg.horizon; ++i)
        detail::record_step(res, ds, t0 + i + 1, rollout[static_cast<std::size_t>(i)].first,
                            rollout[static_cast<std::size_t>(i)].second, cfg.emit_cadence);
    return res;
}

}  // namespace ddnet
