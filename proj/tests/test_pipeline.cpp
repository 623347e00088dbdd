#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "ddnet/opsloop.hpp"

using namespace ddnet;
namespace fs = std::filesystem;

namespace {

WorldConfig tiny_world() {
    WorldConfig cfg = WorldConfig::desk_default();
    cfg.H = 8;
    cfg.W = 12;
    cfg.burn_in_steps = 10;
    cfg.sources = {{3, 4, 500.0, 700.0, 1.2}};
    return cfg;
}

TimeGrid tiny_time() {
    TimeGrid tg;
    tg.T0 = 0;
    tg.T1 = 24;
    tg.T2 = 36;
    tg.T_end = 48;
    tg.k = 4;
    return tg;
}

const DatasetReader& tiny_reader() {
    static const std::string dir = [] {
        auto d = (fs::temp_directory_path() / "ddnet_test_pipeline_ds").string();
        fs::remove_all(d);
        generate_dataset(tiny_world(), tiny_time(), d);
        return d;
    }();
    static const DatasetReader ds(dir);
    return ds;
}

NetworkSpec small_prednet_spec() { return {8, 2, 4, {3, 1}, 3}; }
NetworkSpec small_danet_spec() { return {2, 1, 4, {3, 1}, 3}; }

template <class S>
void zero_all(NetworkWeights<S>& w) {
    for (auto& p : w.params)
        std::fill(p.value.data().begin(), p.value.data().end(), S(0));
}

TrainSettings fast_train(int epochs, double lr) {
    TrainSettings t;
    t.epochs = epochs;
    t.learning_rate = lr;
    t.sample_stride = 2;
    t.validation_fraction = 0.2;
    t.early_stop_patience = 50;
    return t;
}

}  // namespace

TEST_CASE("compute_channel_stats matches a direct recomputation") {
    const auto& ds = tiny_reader();
    const ChannelStats st = compute_channel_stats(ds, 0, 10, /*stride=*/1);

    // channel 0 is AOD550 at the input time
    double sum = 0, sq = 0;
    std::size_t n = 0;
    for (int t = 0; t + 1 < 10; ++t) {
        const GridField a = ds.state(t).aod550;
        for (double v : a.values) {
            sum += v;
            sq += v * v;
            ++n;
        }
    }
    const double mean = sum / static_cast<double>(n);
    const double sd = std::sqrt(sq / static_cast<double>(n) - mean * mean);
    CHECK(st.in_mean[0] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(st.in_std[0] == doctest::Approx(sd).epsilon(1e-9));
    for (int c = 0; c < 8; ++c) CHECK(st.in_std[c] >= 1e-6);
    CHECK(st.out_mean[0] > 0.0);  // PM2.5 is positive everywhere
    CHECK(st.out_mean[1] > 0.0);
}

TEST_CASE("assemble_forecast_input: z-scored channels in the documented order") {
    const auto& ds = tiny_reader();
    const ChannelStats st = compute_channel_stats(ds, 0, 20, 1);
    const GridField aod = ds.state(5).aod550;
    const AuxiliaryFrame aux = ds.aux(6);
    const auto x = assemble_forecast_input<double>(aod, aux, st);
    REQUIRE(x.shape() == Shape{1, 8, 8, 12});
    const std::size_t plane = aod.size();
    CHECK(x.data()[3] ==
          doctest::Approx((aod.values[3] - st.in_mean[0]) / st.in_std[0]).epsilon(1e-12));
    CHECK(x.data()[plane + 7] ==
          doctest::Approx((aux.t2m.values[7] - st.in_mean[1]) / st.in_std[1]).epsilon(1e-12));
    CHECK(x.data()[6 * plane + 1] ==
          doctest::Approx((aux.bc_emis.values[1] - st.in_mean[6]) / st.in_std[6]).epsilon(1e-12));
}

TEST_CASE("forecast_step on an all-zero network returns the clipped channel means") {
    const auto& ds = tiny_reader();
    const ChannelStats st = compute_channel_stats(ds, 0, 20, 1);
    const NetworkSpec spec = small_prednet_spec();
    auto w = build_prednet<double>(spec, 1);
    zero_all(w);
    auto [pm, ao] = forecast_step(w, spec, st, ds.state(5).aod550, ds.aux(6));
    for (double v : pm.values) CHECK(v == doctest::Approx(st.out_mean[0]).epsilon(1e-12));
    for (double v : ao.values) CHECK(v == doctest::Approx(st.out_mean[1]).epsilon(1e-12));
}

TEST_CASE("forecast_rollout chains forecast_step exactly, feeding AOD back") {
    const auto& ds = tiny_reader();
    const ChannelStats st = compute_channel_stats(ds, 0, 20, 1);
    const NetworkSpec spec = small_prednet_spec();
    auto w = build_prednet<double>(spec, 42);  // random init: nontrivial feedback

    std::vector<AuxiliaryFrame> aux{ds.aux(6), ds.aux(7), ds.aux(8)};
    const GridField initial = ds.state(5).aod550;
    const auto rolled = forecast_rollout(w, spec, st, initial, aux, 3);
    REQUIRE(rolled.size() == 3);

    const GridField* prev = &initial;
    for (int i = 0; i < 3; ++i) {
        auto step = forecast_step(w, spec, st, *prev, aux[static_cast<std::size_t>(i)]);
        CHECK(rolled[static_cast<std::size_t>(i)].first.values == step.first.values);
        CHECK(rolled[static_cast<std::size_t>(i)].second.values == step.second.values);
        prev = &rolled[static_cast<std::size_t>(i)].second;
    }
    CHECK_THROWS_AS(forecast_rollout(w, spec, st, ds.state(5).aod550, aux, 4),
                    std::invalid_argument);
}

TEST_CASE("train_prednet: loss drops, runs are deterministic") {
    const auto& ds = tiny_reader();
    const ChannelStats st = compute_channel_stats(ds, 0, ds.time().T1, 1);
    const NetworkSpec spec = small_prednet_spec();
    const TrainSettings cfg = fast_train(3, 1e-3);

    int callbacks = 0;
    auto r1 = train_prednet<double>(ds, spec, cfg, st, 7,
                                    [&](const EpochLog&) { ++callbacks; });
    REQUIRE(!r1.log.empty());
    CHECK(callbacks == static_cast<int>(r1.log.size()));
    CHECK(r1.log.back().train_loss < r1.log.front().train_loss);
    for (const auto& e : r1.log) {
        CHECK(std::isfinite(e.train_loss));
        CHECK(std::isfinite(e.val_loss));
    }

    auto r2 = train_prednet<double>(ds, spec, cfg, st, 7);
    REQUIRE(r2.weights.params.size() == r1.weights.params.size());
    for (std::size_t i = 0; i < r1.weights.params.size(); ++i)
        CHECK(r1.weights.params[i].value.data() == r2.weights.params[i].value.data());
}

TEST_CASE("forecast_error is exactly truth minus forecast") {
    StateSnapshot truth;
    truth.time_index = 3;
    truth.pm25 = GridField(2, 2, Units::MicrogramPerCubicMeter, 4.0);
    truth.aod550 = GridField(2, 2, Units::Dimensionless, 0.5);
    GridField pm(2, 2, Units::MicrogramPerCubicMeter, 1.5);
    GridField ao(2, 2, Units::Dimensionless, 0.8);
    auto [epm, eao] = forecast_error(truth, pm, ao);
    CHECK(epm.time_index == 3);
    for (double v : epm.error.values) CHECK(v == 2.5);
    for (double v : eao.error.values) CHECK(v == doctest::Approx(-0.3));
}

TEST_CASE("preprocess_observations: absolute cap, z-rule, and clipping") {
    ObservationSet raw;
    raw.time_index = 1;
    raw.values = GridField(1, 5, Units::Dimensionless, ObservationSet::kSentinel);
    raw.mask.assign(5, true);
    const double vals[5] = {1.0, 1.0, 1.0, 1.0, 100.0};
    for (int i = 0; i < 5; ++i) raw.values.values[static_cast<std::size_t>(i)] = vals[i];

    // z of the gross outlier is only ~2 in this 5-sample set; the cap must catch it
    ObservationSet out = preprocess_observations(raw, {});
    CHECK(!out.mask[4]);
    CHECK(std::isnan(out.values.values[4]));
    for (int i = 0; i < 4; ++i) CHECK(out.mask[static_cast<std::size_t>(i)]);
    CHECK(out.observed_count() == 4);

    // tight cluster plus a moderate point: the z-rule alone rejects it
    ObservationSet raw2;
    raw2.values = GridField(1, 40, Units::Dimensionless, 1.0);
    raw2.mask.assign(40, true);
    raw2.values.values[0] = 0.99;  // break exact constancy
    raw2.values.values[39] = 1.5;
    ObservationSet out2 = preprocess_observations(raw2, {});
    CHECK(!out2.mask[39]);

    // negative observed values clip to zero, unobserved cells untouched
    ObservationSet raw3;
    raw3.values = GridField(1, 3, Units::Dimensionless, ObservationSet::kSentinel);
    raw3.mask.assign(3, false);
    raw3.mask[1] = true;
    raw3.values.values[1] = -0.2;
    ObservationSet out3 = preprocess_observations(raw3, {});
    CHECK(out3.mask[1]);
    CHECK(out3.values.values[1] == 0.0);

    ObservationSet empty;
    empty.values = GridField(1, 3, Units::Dimensionless, ObservationSet::kSentinel);
    empty.mask.assign(3, false);
    CHECK(preprocess_observations(empty, {}).empty());
}

TEST_CASE("make_da_pair: discrepancy only at observed cells, label everywhere") {
    GridField fc(1, 4, Units::Dimensionless);
    GridField truth(1, 4, Units::Dimensionless);
    for (int i = 0; i < 4; ++i) {
        fc.values[static_cast<std::size_t>(i)] = 0.1 * i;
        truth.values[static_cast<std::size_t>(i)] = 0.1 * i + 0.05;
    }
    ObservationSet obs;
    obs.values = GridField(1, 4, Units::Dimensionless, ObservationSet::kSentinel);
    obs.mask.assign(4, false);
    obs.mask[2] = true;
    obs.values.values[2] = 0.33;

    DAPair p = make_da_pair(9, fc, obs, truth);
    CHECK(p.time_index == 9);
    CHECK(p.discrepancy.values[0] == 0.0);
    CHECK(p.discrepancy.values[2] == doctest::Approx(0.33 - 0.2));
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(p.label.values[i] == doctest::Approx(0.05));
}

TEST_CASE("assemble_da_input scales by the AOD statistics only") {
    ChannelStats st;
    st.out_mean = {10.0, 0.4};
    st.out_std = {5.0, 0.2};
    GridField fc(1, 2, Units::Dimensionless);
    fc.values = {0.6, 0.2};
    GridField disc(1, 2, Units::Dimensionless);
    disc.values = {0.1, 0.0};
    auto x = assemble_da_input<double>(fc, disc, st);
    REQUIRE(x.shape() == Shape{1, 2, 1, 2});
    CHECK(x.data()[0] == doctest::Approx((0.6 - 0.4) / 0.2));
    CHECK(x.data()[1] == doctest::Approx((0.2 - 0.4) / 0.2));
    CHECK(x.data()[2] == doctest::Approx(0.1 / 0.2));
    CHECK(x.data()[3] == 0.0);
}

TEST_CASE("build_da_training_set covers the DA-set window") {
    const auto& ds = tiny_reader();
    const ChannelStats st = compute_channel_stats(ds, 0, ds.time().T1, 1);
    const NetworkSpec spec = small_prednet_spec();
    auto w = build_prednet<double>(spec, 3);
    zero_all(w);

    const auto pairs = build_da_training_set(w, spec, st, ds);
    REQUIRE(pairs.size() == 2);  // DA times 28 and 32 inside [T1, T2)
    CHECK(pairs[0].time_index == 28);
    CHECK(pairs[1].time_index == 32);
    for (const auto& p : pairs) {
        // zero network forecasts the AOD mean everywhere
        for (double v : p.aod_forecast.values)
            CHECK(v == doctest::Approx(st.out_mean[1]).epsilon(1e-12));
        const GridField truth = ds.state(p.time_index).aod550;
        for (std::size_t i = 0; i < truth.size(); ++i)
            CHECK(p.label.values[i] ==
                  doctest::Approx(truth.values[i] - st.out_mean[1]).epsilon(1e-9));
        const ObservationSet obs = preprocess_observations(ds.obs(p.time_index), {});
        for (std::size_t i = 0; i < obs.mask.size(); ++i)
            if (!obs.mask[i]) CHECK(p.discrepancy.values[i] == 0.0);
    }
}

TEST_CASE("train_danet drives the loss to zero on perfect-forecast pairs") {
    const auto& ds = tiny_reader();
    const ChannelStats st = compute_channel_stats(ds, 0, ds.time().T1, 1);

    // perfect forecasts: obs equals the forecast, label is exactly zero
    std::vector<DAPair> pairs;
    for (int t = 4; t <= 24; t += 4) {
        const GridField truth = ds.state(t).aod550;
        ObservationSet obs;
        obs.time_index = t;
        obs.values = truth;
        obs.mask.assign(truth.size(), true);
        pairs.push_back(make_da_pair(t, truth, obs, truth));
        for (double v : pairs.back().label.values) REQUIRE(v == 0.0);
    }

    const NetworkSpec spec = small_danet_spec();
    auto r = train_danet<double>(pairs, spec, fast_train(40, 1e-2), st, 5);
    REQUIRE(!r.log.empty());
    CHECK(r.log.back().train_loss < 1e-3);
    CHECK(r.log.back().train_loss < r.log.front().train_loss);

    ObservationSet obs;
    obs.time_index = 4;
    obs.values = ds.state(4).aod550;
    obs.mask.assign(obs.values.size(), true);
    ErrorField err = estimate_error(r.weights, spec, st, ds.state(4).aod550, obs);
    CHECK(rmse(GridField(8, 12), err.error) < 0.1 * st.out_std[1]);
}

TEST_CASE("estimate_error on a zero network is zero; analysis_update clips") {
    const auto& ds = tiny_reader();
    const ChannelStats st = compute_channel_stats(ds, 0, ds.time().T1, 1);
    const NetworkSpec spec = small_danet_spec();
    auto w = build_danet<double>(spec, 1);
    zero_all(w);

    const GridField fc = ds.state(8).aod550;
    ErrorField err = estimate_error(w, spec, st, fc, ds.obs(8));
    CHECK(err.time_index == 8);
    for (double v : err.error.values) CHECK(v == 0.0);

    GridField analysis = analysis_update(fc, err);
    CHECK(analysis.values == fc.values);

    err.error = GridField(fc.H, fc.W, Units::Dimensionless, -1e9);
    analysis = analysis_update(fc, err);
    for (double v : analysis.values) CHECK(v == 0.0);
}

TEST_CASE("run_operational with the truth oracle recovers truth at every analysis") {
    const auto& ds = tiny_reader();
    const ChannelStats st = compute_channel_stats(ds, 0, ds.time().T1, 1);
    const NetworkSpec spec = small_prednet_spec();
    auto w = build_prednet<double>(spec, 3);
    zero_all(w);

    CycleSettings cycle;
    cycle.k = 4;
    cycle.horizon = 8;
    cycle.emit_cadence = 4;
    auto res = run_operational(w, spec, st, ds, cycle, truth_oracle_estimator(ds));
    REQUIRE(res.analysis_times == std::vector<int>{40});
    for (const auto& rec : res.aod_analysis_metrics.records)
        CHECK(rec.rmse == doctest::Approx(0.0));
    CHECK(res.aod_forecast_metrics.records.size() == 8);
    CHECK(res.cycle_seconds.size() == 2);
    REQUIRE(res.snapshots.size() == 2);  // t = 40 and 44
    CHECK(res.snapshots[0].first == 40);
    CHECK(res.snapshots[1].first == 44);

    CHECK_THROWS_AS(
        run_operational(w, spec, st, ds, cycle, truth_oracle_estimator(ds), {}, 20),
        std::invalid_argument);
    CycleSettings long_cycle = cycle;
    long_cycle.horizon = 100;
    CHECK_THROWS_AS(
        run_operational(w, spec, st, ds, long_cycle, truth_oracle_estimator(ds)),
        std::invalid_argument);
}

TEST_CASE("a DA interval at or beyond the horizon reduces to the baseline rollout") {
    const auto& ds = tiny_reader();
    const ChannelStats st = compute_channel_stats(ds, 0, ds.time().T1, 1);
    const NetworkSpec spec = small_prednet_spec();
    auto w = build_prednet<double>(spec, 21);  // random init: nontrivial dynamics

    CycleSettings cycle;
    cycle.k = 8;
    cycle.horizon = 8;
    cycle.emit_cadence = 0;
    auto ops = run_operational(w, spec, st, ds, cycle, truth_oracle_estimator(ds));
    auto base = run_prednet_only(w, spec, st, ds, cycle);

    CHECK(ops.analysis_times.empty());
    REQUIRE(ops.aod_forecast_metrics.records.size() == base.aod_forecast_metrics.records.size());
    for (std::size_t i = 0; i < base.aod_forecast_metrics.records.size(); ++i) {
        CHECK(ops.aod_forecast_metrics.records[i].rmse ==
              base.aod_forecast_metrics.records[i].rmse);
        CHECK(ops.pm25_forecast_metrics.records[i].rmse ==
              base.pm25_forecast_metrics.records[i].rmse);
    }
}

TEST_CASE("operational and baseline agree bit-exactly over the first DA interval") {
    const auto& ds = tiny_reader();
    const ChannelStats st = compute_channel_stats(ds, 0, ds.time().T1, 1);
    const NetworkSpec spec = small_prednet_spec();
    auto w = build_prednet<double>(spec, 21);

    CycleSettings cycle;
    cycle.k = 4;
    cycle.horizon = 8;
    cycle.emit_cadence = 0;
    auto ops = run_operational(w, spec, st, ds, cycle, truth_oracle_estimator(ds));
    auto base = run_prednet_only(w, spec, st, ds, cycle);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(ops.aod_forecast_metrics.records[i].time_index ==
              base.aod_forecast_metrics.records[i].time_index);
        CHECK(ops.aod_forecast_metrics.records[i].rmse ==
              base.aod_forecast_metrics.records[i].rmse);
    }
}
