#pragma once

#include "ddnet/forecaster.hpp"

namespace ddnet {

/// Outlier policy for raw observations: a z-score rule plus an absolute
/// physical cap (a pure z-rule misses gross outliers in heavy-tailed
/// small samples).
struct ObsPolicy {
    double z_threshold = 4.0;
    double abs_cap = 5.0;  // AOD550 above this is unphysical here
};

/// Removes outliers and clips observed values at zero. An all-masked
/// result is a valid signal to skip the DA step.
inline ObservationSet preprocess_observations(const ObservationSet& raw, const ObsPolicy& policy) {
    ObservationSet out = raw;
    std::vector<double> vals;
    for (std::size_t i = 0; i < raw.mask.size(); ++i)
        if (raw.mask[i]) vals.push_back(raw.values.values[i]);
    if (vals.empty()) return out;
    double mean = 0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double var = 0;
    for (double v : vals) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(vals.size()));
    for (std::size_t i = 0; i < out.mask.size(); ++i) {
        if (!out.mask[i]) continue;
        const double v = out.values.values[i];
        const bool z_out = sd > 0 && std::abs(v - mean) > policy.z_threshold * sd;
        if (z_out || v > policy.abs_cap) {
            out.mask[i] = false;
            out.values.values[i] = ObservationSet::kSentinel;
        } else {
            out.values.values[i] = std::max(0.0, v);
        }
    }
    return out;
}

/// One DANet training sample: 2-channel input (AOD forecast, zero-filled
/// masked discrepancy) and the full-grid forecast-error label.
struct DAPair {
    int time_index = 0;
    GridField aod_forecast;
    GridField discrepancy;  // obs - forecast at observed cells, 0 elsewhere
    GridField label;        // truth - forecast, defined everywhere
};

inline DAPair make_da_pair(int time_index, const GridField& aod_forecast,
                           const ObservationSet& obs, const GridField& truth_aod) {
    DAPair p;
    p.time_index = time_index;
    p.aod_forecast = aod_forecast;
    p.discrepancy = GridField(aod_forecast.H, aod_forecast.W, Units::Dimensionless);
    p.label = GridField(aod_forecast.H, aod_forecast.W, Units::Dimensionless);
    for (std::size_t i = 0; i < aod_forecast.size(); ++i) {
        if (obs.mask[i])
            p.discrepancy.values[i] = obs.values.values[i] - aod_forecast.values[i];
        p.label.values[i] = truth_aod.values[i] - aod_forecast.values[i];
    }
    return p;
}

/// DANet channel scaling: the forecast channel reuses the PredNet AOD
/// statistics; discrepancy and label are zero-mean by construction and are
/// scaled by the AOD std only.
template <class S>
Tensor<S> assemble_da_input(const GridField& aod_forecast, const GridField& discrepancy,
                            const ChannelStats& st) {
    const int H = aod_forecast.H, W = aod_forecast.W;
    const std::size_t plane = aod_forecast.size();
    const double mean = st.out_mean[1], inv = 1.0 / st.out_std[1];
    std::vector<S> data(2 * plane);
    for (std::size_t i = 0; i < plane; ++i) {
        data[i] = static_cast<S>((aod_forecast.values[i] - mean) * inv);
        data[plane + i] = static_cast<S>(discrepancy.values[i] * inv);
    }
    return Tensor<S>({1, 2, H, W}, std::move(data));
}

/// Builds the DANet training set over [T1, T2): for each DA time, a k-step
/// PredNet rollout from the previous truth point, paired with the
/// preprocessed observation and the truth error. DA times without usable
/// observations are skipped.
template <class S>
std::vector<DAPair> build_da_training_set(NetworkWeights<S>& prednet, const NetworkSpec& spec,
                                          const ChannelStats& st, const DatasetReader& ds,
                                          const ObsPolicy& policy = {}) {
    const TimeGrid& tg = ds.time();
    std::vector<DAPair> pairs;
    for (int tau = tg.T1 + tg.k; tau < tg.T2; tau += tg.k) {
        if (!ds.has_obs(tau)) continue;
        ObservationSet obs = preprocess_observations(ds.obs(tau), policy);
        if (obs.empty()) continue;
        std::vector<AuxiliaryFrame> aux;
        for (int t = tau - tg.k + 1; t <= tau; ++t) aux.push_back(ds.aux(t));
        auto rollout = forecast_rollout(prednet, spec, st, ds.state(tau - tg.k).aod550, aux, tg.k);
        pairs.push_back(make_da_pair(tau, rollout.back().second, obs, ds.state(tau).aod550));
    }
    return pairs;
}

/// DANet training on the assembled pairs; MSE + Adam on normalized
/// channels, trailing-fraction validation, best-validation weights.
template <class S>
TrainResult<S> train_danet(const std::vector<DAPair>& pairs, const NetworkSpec& spec,
                           const TrainSettings& cfg, const ChannelStats& st,
                           std::uint64_t init_seed,
                           const std::function<void(const EpochLog&)>& on_epoch = {}) {
    if (pairs.empty()) throw std::invalid_argument("train_danet: empty pair list");
    const auto n_val = static_cast<std::size_t>(
        std::max(1.0, cfg.validation_fraction * static_cast<double>(pairs.size())));
    if (pairs.size() < n_val + 1) throw std::invalid_argument("train_danet: too few pairs");
    std::vector<std::size_t> train_idx, val_idx;
    for (std::size_t i = 0; i + n_val < pairs.size(); ++i) train_idx.push_back(i);
    for (std::size_t i = pairs.size() - n_val; i < pairs.size(); ++i) val_idx.push_back(i);

    const double label_inv = 1.0 / st.out_std[1];
    auto label_tensor = [&](const DAPair& p) {
        std::vector<S> data(p.label.size());
        for (std::size_t i = 0; i < data.size(); ++i)
            data[i] = static_cast<S>(p.label.values[i] * label_inv);
        return Tensor<S>({1, 1, p.label.H, p.label.W}, std::move(data));
    };

    NetworkWeights<S> weights = build_danet<S>(spec, init_seed);
    AdamState<S> opt;
    opt.cfg.learning_rate = cfg.learning_rate;

    auto eval_val = [&] {
        double acc = 0;
        for (std::size_t i : val_idx) {
            Tensor<S> x = assemble_da_input<S>(pairs[i].aod_forecast, pairs[i].discrepancy, st);
            acc += static_cast<double>(
                mse_loss(forward_net(weights, spec, x, BNMode::Infer), label_tensor(pairs[i]))
                    .item());
        }
        return acc / static_cast<double>(val_idx.size());
    };

    TrainResult<S> result;
    result.weights = clone_weights(weights);
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;
    std::mt19937_64 shuffle_rng(cfg.shuffle_seed);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(train_idx.begin(), train_idx.end(), shuffle_rng);
        double train_acc = 0;
        for (std::size_t i : train_idx) {
            weights.zero_grad();
            Tensor<S> x = assemble_da_input<S>(pairs[i].aod_forecast, pairs[i].discrepancy, st);
            Tensor<S> loss =
                mse_loss(forward_net(weights, spec, x, BNMode::Train), label_tensor(pairs[i]));
            loss.backward();
            adam_step(weights, opt);
            train_acc += static_cast<double>(loss.item());
        }
        EpochLog log{epoch, train_acc / static_cast<double>(train_idx.size()), eval_val()};
        result.log.push_back(log);
        if (on_epoch) on_epoch(log);
        if (log.val_loss < best_val) {
            best_val = log.val_loss;
            result.weights = clone_weights(weights);
            since_best = 0;
        } else if (++since_best >= cfg.early_stop_patience) {
            break;
        }
    }
    return result;
}

/// DANet inference: estimated forecast error over the full grid, including
/// unobserved cells.
template <class S>
ErrorField estimate_error(NetworkWeights<S>& danet, const NetworkSpec& spec,
                          const ChannelStats& st, const GridField& aod_forecast,
                          const ObservationSet& obs) {
    if (!aod_forecast.same_shape(obs.values))
        throw std::invalid_argument("estimate_error: shape mismatch");
    GridField disc(aod_forecast.H, aod_forecast.W, Units::Dimensionless);
    for (std::size_t i = 0; i < disc.size(); ++i)
        if (obs.mask[i]) disc.values[i] = obs.values.values[i] - aod_forecast.values[i];
    Tensor<S> x = assemble_da_input<S>(aod_forecast, disc, st);
    Tensor<S> y = forward_net(danet, spec, x, BNMode::Infer);
    ErrorField out{obs.time_index, GridField(aod_forecast.H, aod_forecast.W, Units::Dimensionless)};
    for (std::size_t i = 0; i < out.error.size(); ++i)
        out.error.values[i] = static_cast<double>(y.data()[i]) * st.out_std[1];
    return out;
}

/// Analysis state: forecast plus estimated error, clipped at zero.
inline GridField analysis_update(const GridField& aod_forecast, const ErrorField& err) {
    if (!aod_forecast.same_shape(err.error))
        throw std::invalid_argument("analysis_update: shape mismatch");
    GridField out(aod_forecast.H, aod_forecast.W, aod_forecast.units);
    for (std::size_t i = 0; i < out.size(); ++i)
        out.values[i] = std::max(0.0, aod_forecast.values[i] + err.error.values[i]);
    return out;
}

}  // namespace ddnet
