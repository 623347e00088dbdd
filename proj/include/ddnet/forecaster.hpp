#pragma once

#include <array>
#include <functional>
#include <random>

#include "ddnet/config.hpp"
#include "ddnet/dataset.hpp"
#include "ddnet/network.hpp"

namespace ddnet {

/// Per-channel z-score statistics for the 8 PredNet input channels
/// (AOD550 + 7 auxiliary) and the 2 output channels (PM2.5, AOD550).
/// Computed on the training segment only.
struct ChannelStats {
    std::array<double, 8> in_mean{}, in_std{};
    std::array<double, 2> out_mean{}, out_std{};
};

inline ChannelStats compute_channel_stats(const DatasetReader& ds, int t0, int t1,
                                          int stride = 8) {
    if (t1 - t0 < 2) throw std::invalid_argument("channel stats: segment too short");
    ChannelStats st;
    std::array<double, 8> in_sum{}, in_sq{};
    std::array<double, 2> out_sum{}, out_sq{};
    std::size_t count = 0;
    for (int t = t0; t + 1 < t1; t += stride) {
        const StateSnapshot s1 = ds.state(t + 1);
        const StateSnapshot s0 = ds.state(t);
        const AuxiliaryFrame aux = ds.aux(t + 1);
        const std::size_t n = s0.aod550.size();
        for (std::size_t i = 0; i < n; ++i) {
            const double in[8] = {s0.aod550.values[i],       aux.t2m.values[i],
                                  aux.u10.values[i],          aux.v10.values[i],
                                  aux.humidity.values[i],     aux.geopotential.values[i],
                                  aux.bc_emis.values[i],      aux.oc_emis.values[i]};
            for (int c = 0; c < 8; ++c) {
                in_sum[c] += in[c];
                in_sq[c] += in[c] * in[c];
            }
            const double out[2] = {s1.pm25.values[i], s1.aod550.values[i]};
            for (int c = 0; c < 2; ++c) {
                out_sum[c] += out[c];
                out_sq[c] += out[c] * out[c];
            }
        }
        count += n;
    }
    const double N = static_cast<double>(count);
    for (int c = 0; c < 8; ++c) {
        st.in_mean[c] = in_sum[c] / N;
        st.in_std[c] = std::max(1e-6, std::sqrt(std::max(0.0, in_sq[c] / N - st.in_mean[c] * st.in_mean[c])));
    }
    for (int c = 0; c < 2; ++c) {
        st.out_mean[c] = out_sum[c] / N;
        st.out_std[c] = std::max(1e-6, std::sqrt(std::max(0.0, out_sq[c] / N - st.out_mean[c] * st.out_mean[c])));
    }
    return st;
}

/// Normalized 8-channel PredNet input [1,8,H,W] from the current AOD550
/// and the next step's auxiliary frame.
template <class S>
Tensor<S> assemble_forecast_input(const GridField& aod, const AuxiliaryFrame& aux_next,
                                  const ChannelStats& st) {
    if (!aod.same_shape(aux_next.t2m))
        throw std::invalid_argument("assemble_forecast_input: grid shape mismatch");
    const int H = aod.H, W = aod.W;
    const std::size_t plane = aod.size();
    std::vector<S> data(8 * plane);
    const GridField* chans[8] = {&aod,
                                 &aux_next.t2m,
                                 &aux_next.u10,
                                 &aux_next.v10,
                                 &aux_next.humidity,
                                 &aux_next.geopotential,
                                 &aux_next.bc_emis,
                                 &aux_next.oc_emis};
    for (int c = 0; c < 8; ++c) {
        const double mean = st.in_mean[c], inv = 1.0 / st.in_std[c];
        const auto& v = chans[c]->values;
        for (std::size_t i = 0; i < plane; ++i)
            data[c * plane + i] = static_cast<S>((v[i] - mean) * inv);
    }
    return Tensor<S>({1, 8, H, W}, std::move(data));
}

template <class S>
Tensor<S> normalized_label(const StateSnapshot& truth, const ChannelStats& st) {
    const std::size_t plane = truth.pm25.size();
    std::vector<S> data(2 * plane);
    const GridField* chans[2] = {&truth.pm25, &truth.aod550};
    for (int c = 0; c < 2; ++c)
        for (std::size_t i = 0; i < plane; ++i)
            data[c * plane + i] =
                static_cast<S>((chans[c]->values[i] - st.out_mean[c]) / st.out_std[c]);
    return Tensor<S>({1, 2, truth.pm25.H, truth.pm25.W}, std::move(data));
}

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

template <class S>
struct TrainResult {
    NetworkWeights<S> weights;
    std::vector<EpochLog> log;
};

template <class S>
NetworkWeights<S> clone_weights(const NetworkWeights<S>& w) {
    NetworkWeights<S> out;
    for (const auto& p : w.params) out.add(p.name, p.value.clone_detached(), p.trainable);
    return out;
}

/// Supervised PredNet training on the [T0, T1) segment: input is the
/// normalized current AOD plus next-step auxiliaries, label the normalized
/// next-step (PM2.5, AOD550). MSE + Adam, trailing-fraction validation
/// split, best-validation weights returned.
template <class S>
TrainResult<S> train_prednet(const DatasetReader& ds, const NetworkSpec& spec,
                             const TrainSettings& cfg, const ChannelStats& st,
                             std::uint64_t init_seed,
                             const std::function<void(const EpochLog&)>& on_epoch = {}) {
    const int t0 = ds.time().T0, t1 = ds.time().T1;
    if (t1 - t0 < 2) throw std::invalid_argument("train_prednet: segment has < 2 steps");

    std::vector<int> steps;
    for (int t = t0; t + 1 < t1; t += cfg.sample_stride) steps.push_back(t);
    const auto n_val = static_cast<std::size_t>(
        std::max(1.0, cfg.validation_fraction * static_cast<double>(steps.size())));
    if (steps.size() < n_val + 1) throw std::invalid_argument("train_prednet: segment too short");
    std::vector<int> train_steps(steps.begin(), steps.end() - static_cast<long>(n_val));
    std::vector<int> val_steps(steps.end() - static_cast<long>(n_val), steps.end());

    NetworkWeights<S> weights = build_prednet<S>(spec, init_seed);
    AdamState<S> opt;
    opt.cfg.learning_rate = cfg.learning_rate;

    auto eval_val = [&] {
        double acc = 0;
        for (int t : val_steps) {
            Tensor<S> x = assemble_forecast_input<S>(ds.state(t).aod550, ds.aux(t + 1), st);
            Tensor<S> y = forward_net(weights, spec, x, BNMode::Infer);
            acc += static_cast<double>(mse_loss(y, normalized_label<S>(ds.state(t + 1), st)).item());
        }
        return acc / static_cast<double>(val_steps.size());
    };

    TrainResult<S> result;
    result.weights = clone_weights(weights);
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;
    std::mt19937_64 shuffle_rng(cfg.shuffle_seed);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::shuffle(train_steps.begin(), train_steps.end(), shuffle_rng);
        double train_acc = 0;
        for (int t : train_steps) {
            weights.zero_grad();
            Tensor<S> x = assemble_forecast_input<S>(ds.state(t).aod550, ds.aux(t + 1), st);
            Tensor<S> y = forward_net(weights, spec, x, BNMode::Train);
            Tensor<S> loss = mse_loss(y, normalized_label<S>(ds.state(t + 1), st));
            loss.backward();
            adam_step(weights, opt);
            train_acc += static_cast<double>(loss.item());
        }
        EpochLog log{epoch, train_acc / static_cast<double>(train_steps.size()), eval_val()};
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

/// One forecast step: assemble input, run PredNet in infer mode,
/// denormalize, clip at zero.
template <class S>
std::pair<GridField, GridField> forecast_step(NetworkWeights<S>& weights, const NetworkSpec& spec,
                                              const ChannelStats& st, const GridField& aod,
                                              const AuxiliaryFrame& aux_next) {
    Tensor<S> x = assemble_forecast_input<S>(aod, aux_next, st);
    Tensor<S> y = forward_net(weights, spec, x, BNMode::Infer);
    const int H = aod.H, W = aod.W;
    const std::size_t plane = aod.size();
    GridField pm(H, W, Units::MicrogramPerCubicMeter), ao(H, W, Units::Dimensionless);
    for (std::size_t i = 0; i < plane; ++i) {
        pm.values[i] = std::max(
            0.0, static_cast<double>(y.data()[i]) * st.out_std[0] + st.out_mean[0]);
        ao.values[i] = std::max(
            0.0, static_cast<double>(y.data()[plane + i]) * st.out_std[1] + st.out_mean[1]);
    }
    return {std::move(pm), std::move(ao)};
}

/// Autoregressive rollout: each predicted AOD550 feeds the next step;
/// PM2.5 is output-only and never fed back.
template <class S>
std::vector<std::pair<GridField, GridField>> forecast_rollout(
    NetworkWeights<S>& weights, const NetworkSpec& spec, const ChannelStats& st,
    const GridField& initial_aod, const std::vector<AuxiliaryFrame>& aux_series, int n_steps) {
    if (static_cast<int>(aux_series.size()) < n_steps)
        throw std::invalid_argument("forecast_rollout: insufficient aux frames");
    std::vector<std::pair<GridField, GridField>> out;
    out.reserve(static_cast<std::size_t>(n_steps));
    const GridField* aod = &initial_aod;
    for (int i = 0; i < n_steps; ++i) {
        out.push_back(forecast_step(weights, spec, st, *aod, aux_series[static_cast<std::size_t>(i)]));
        aod = &out.back().second;
    }
    return out;
}

/// Forecast error per Eq-style bookkeeping: truth minus forecast, exactly.
struct ErrorField {
    int time_index = 0;
    GridField error;
};

inline std::pair<ErrorField, ErrorField> forecast_error(const StateSnapshot& truth,
                                                        const GridField& pm25_forecast,
                                                        const GridField& aod_forecast) {
    if (!truth.pm25.same_shape(pm25_forecast) || !truth.aod550.same_shape(aod_forecast))
        throw std::invalid_argument("forecast_error: shape mismatch");
    ErrorField epm{truth.time_index, GridField(truth.pm25.H, truth.pm25.W, truth.pm25.units)};
    ErrorField eao{truth.time_index, GridField(truth.aod550.H, truth.aod550.W, truth.aod550.units)};
    for (std::size_t i = 0; i < truth.pm25.size(); ++i) {
        epm.error.values[i] = truth.pm25.values[i] - pm25_forecast.values[i];
        eao.error.values[i] = truth.aod550.values[i] - aod_forecast.values[i];
    }
    return {std::move(epm), std::move(eao)};
}

}  // namespace ddnet
