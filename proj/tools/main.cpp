#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "ddnet/checkpoint.hpp"
#include "ddnet/gradcheck.hpp"
#include "ddnet/opsloop.hpp"
#include "ddnet/report.hpp"

namespace fs = std::filesystem;
using namespace ddnet;

namespace {

constexpr const char* kToolVersion = "ddnet 1.0.0";

struct CommonOpts {
    std::string config;
    std::string preset;
    std::string out;
    std::string data;
    std::uint64_t seed = 0;
    bool seed_set = false;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool needs_data) {
    cmd->add_option("--config", o.config, "experiment config file (JSON)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--preset", o.preset, "base preset")
        ->check(CLI::IsMember({"desk", "reference"}));
    cmd->add_option("--out", o.out, "output directory (default: timestamped under runs/)");
    cmd->add_option("--seed", o.seed, "override the world seed")
        ->each([&o](const std::string&) { o.seed_set = true; });
    if (needs_data)
        cmd->add_option("--data", o.data, "dataset directory")->required()
            ->check(CLI::ExistingDirectory);
}

ExperimentConfig resolve_config(const CommonOpts& o) {
    ExperimentConfig cfg = load_experiment_config(o.config, o.preset);
    if (o.seed_set) cfg.world.seed = o.seed;
    return cfg;
}

std::string make_run_dir(const CommonOpts& o, const std::string& name) {
    std::string dir = o.out;
    if (dir.empty()) {
        const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        std::tm tm{};
        gmtime_r(&now, &tm);
        char stamp[32];
        std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
        dir = "runs/" + name + "-" + stamp;
    }
    fs::create_directories(dir);
    return dir;
}

void echo_run_metadata(const ExperimentConfig& cfg, const std::string& dir) {
    std::ofstream cf(dir + "/config.json");
    cf << to_json(cfg).dump(2) << "\n";
    std::ofstream vf(dir + "/version.txt");
    vf << kToolVersion << "\n";
}

void write_training_log(const std::vector<EpochLog>& log, const std::string& path) {
    std::ofstream f(path);
    f << "epoch,train_loss,val_loss\n";
    for (const auto& e : log) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "%d,%.10g,%.10g\n", e.epoch, e.train_loss, e.val_loss);
        f << buf;
    }
}

std::string thousands(std::int64_t v) {
    const std::string raw = std::to_string(v);
    std::string out;
    int c = 0;
    for (auto it = raw.rbegin(); it != raw.rend(); ++it) {
        if (c && c % 3 == 0) out.push_back(',');
        out.push_back(*it);
        ++c;
    }
    return {out.rbegin(), out.rend()};
}

/// DDNET_THREADS caps worker parallelism. All current commands are
/// single-process and sequential, so any value >= 1 is accepted as-is.
int resolve_threads() {
    const char* env = std::getenv("DDNET_THREADS");
    if (!env) return 1;
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1)
        throw std::invalid_argument("DDNET_THREADS must be a positive integer, got '" +
                                    std::string(env) + "'");
    return static_cast<int>(v);
}

template <class F>
int dispatch_precision(const std::string& precision, F&& f) {
    if (precision == "f64") return f(double{});
    return f(float{});
}

ChannelStats stats_for(const DatasetReader& ds) {
    return compute_channel_stats(ds, ds.time().T0, ds.time().T1, /*stride=*/8);
}

/// CAP profiles over a metric series: RMSE counted below-threshold,
/// R counted above-threshold.
std::vector<CapProfile> cap_profiles_from(const MetricSeries& s) {
    std::vector<double> rmse_series, r_series;
    for (const auto& rec : s.records) {
        rmse_series.push_back(rec.rmse);
        if (rec.r) r_series.push_back(*rec.r);
    }
    std::vector<CapProfile> caps;
    if (!rmse_series.empty())
        caps.push_back({s.variable, "rmse",
                        cap_profile(rmse_series, default_cap_thresholds(rmse_series),
                                    CapDirection::Below)});
    if (!r_series.empty())
        caps.push_back({s.variable, "r",
                        cap_profile(r_series, default_cap_thresholds(r_series),
                                    CapDirection::Above)});
    return caps;
}

void write_snapshots(const CycleResult& res, const std::string& dir) {
    for (const auto& [t, snap] : res.snapshots) {
        char name[48];
        std::snprintf(name, sizeof(name), "%s/snapshot_%06d.fld", dir.c_str(), t);
        write_field_file(name, {{"pm25", snap.pm25}, {"aod550", snap.aod550}});
    }
}

void write_cycle_report(const CycleResult& res, const DatasetReader& ds,
                        const std::string& dir) {
    std::vector<MetricSeries> series{res.aod_forecast_metrics, res.pm25_forecast_metrics};
    if (!res.aod_analysis_metrics.records.empty()) series.push_back(res.aod_analysis_metrics);

    auto caps = cap_profiles_from(res.aod_forecast_metrics);
    for (auto& c : cap_profiles_from(res.pm25_forecast_metrics)) caps.push_back(std::move(c));

    std::vector<RegionalTable> regions;
    if (!res.snapshots.empty()) {
        const auto& [t, snap] = res.snapshots.back();
        const RegionSet boxes = RegionSet::default_boxes(snap.aod550.H, snap.aod550.W);
        regions.push_back({"aod550", regional_eval(ds.state(t).aod550, snap.aod550, boxes)});
        regions.push_back({"pm25", regional_eval(ds.state(t).pm25, snap.pm25, boxes)});
    }
    emit_report(series, caps, regions, dir);

    std::ofstream f(dir + "/cycle_seconds.csv");
    f << "cycle,seconds\n";
    for (std::size_t i = 0; i < res.cycle_seconds.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%zu,%.6f\n", i, res.cycle_seconds[i]);
        f << buf;
    }
    write_snapshots(res, dir);
}

// ---- subcommand bodies ----------------------------------------------------

int cmd_gen_data(const CommonOpts& o) {
    const ExperimentConfig cfg = resolve_config(o);
    const std::string dir = make_run_dir(o, "gen-data");
    generate_dataset(cfg.world, cfg.time, dir);
    echo_run_metadata(cfg, dir);
    std::printf("gen-data: %d steps on %dx%d grid, seed %llu, world hash %08x -> %s\n",
                cfg.time.T_end, cfg.world.H, cfg.world.W,
                static_cast<unsigned long long>(cfg.world.seed), world_config_hash(cfg.world),
                dir.c_str());
    return 0;
}

int cmd_train_prednet(const CommonOpts& o) {
    const ExperimentConfig cfg = resolve_config(o);
    const DatasetReader ds(o.data);
    const std::string dir = make_run_dir(o, "train-prednet");
    echo_run_metadata(cfg, dir);
    const ChannelStats st = stats_for(ds);
    return dispatch_precision(cfg.prednet_train.precision, [&](auto tag) {
        using S = decltype(tag);
        auto result = train_prednet<S>(ds, cfg.prednet, cfg.prednet_train, st, cfg.prednet_seed,
                                       [](const EpochLog& e) {
                                           std::printf("  epoch %d: train %.6f val %.6f\n",
                                                       e.epoch, e.train_loss, e.val_loss);
                                       });
        write_training_log(result.log, dir + "/training_log.csv");
        save_checkpoint(result.weights, cfg.prednet, dir + "/prednet.ckpt");
        std::printf("train-prednet: %zu epochs, best val %.6f -> %s/prednet.ckpt\n",
                    result.log.size(), result.log.back().val_loss, dir.c_str());
        return 0;
    });
}

int cmd_eval_rollout(const CommonOpts& o, const std::string& ckpt_path, int start, int steps) {
    const ExperimentConfig cfg = resolve_config(o);
    const DatasetReader ds(o.data);
    const std::string dir = make_run_dir(o, "eval-rollout");
    echo_run_metadata(cfg, dir);
    const int t0 = (start < 0) ? ds.time().T2 : start;
    if (t0 < 0 || t0 + steps >= ds.time().T_end)
        throw std::invalid_argument("eval-rollout: start+steps must stay before T_end");
    const ChannelStats st = stats_for(ds);
    return dispatch_precision(cfg.prednet_train.precision, [&](auto tag) {
        using S = decltype(tag);
        auto ckpt = load_checkpoint<S>(ckpt_path);
        std::vector<AuxiliaryFrame> aux;
        for (int i = 1; i <= steps; ++i) aux.push_back(ds.aux(t0 + i));
        auto rollout =
            forecast_rollout(ckpt.weights, ckpt.spec, st, ds.state(t0).aod550, aux, steps);
        MetricSeries aod{"rollout", "aod550", {}}, pm{"rollout", "pm25", {}};
        for (int i = 0; i < steps; ++i) {
            const StateSnapshot truth = ds.state(t0 + i + 1);
            const auto& [pf, af] = rollout[static_cast<std::size_t>(i)];
            aod.records.push_back({t0 + i + 1, rmse(truth.aod550, af), corrcoef(truth.aod550, af)});
            pm.records.push_back({t0 + i + 1, rmse(truth.pm25, pf), corrcoef(truth.pm25, pf)});
        }
        emit_report({aod, pm}, cap_profiles_from(aod), {}, dir);
        std::printf("eval-rollout: %d steps from t=%d, mean AOD RMSE %.5f -> %s\n", steps, t0,
                    aod.mean_rmse(), dir.c_str());
        return 0;
    });
}

int cmd_build_da_set(const CommonOpts& o, const std::string& ckpt_path) {
    const ExperimentConfig cfg = resolve_config(o);
    const DatasetReader ds(o.data);
    const std::string dir = make_run_dir(o, "build-da-set");
    echo_run_metadata(cfg, dir);
    const ChannelStats st = stats_for(ds);
    return dispatch_precision(cfg.prednet_train.precision, [&](auto tag) {
        using S = decltype(tag);
        auto ckpt = load_checkpoint<S>(ckpt_path);
        const auto pairs = build_da_training_set(ckpt.weights, ckpt.spec, st, ds);
        nlohmann::json times = nlohmann::json::array();
        for (const auto& p : pairs) {
            char name[48];
            std::snprintf(name, sizeof(name), "%s/dapair_%06d.fld", dir.c_str(), p.time_index);
            write_field_file(name, {{"aod_forecast", p.aod_forecast},
                                    {"discrepancy", p.discrepancy},
                                    {"label", p.label}});
            times.push_back(p.time_index);
        }
        nlohmann::json manifest = {{"dataset", o.data},
                                   {"world_config_hash", world_config_hash(ds.world())},
                                   {"times", times}};
        std::ofstream mf(dir + "/da_manifest.json");
        mf << manifest.dump(2) << "\n";
        std::printf("build-da-set: %zu pairs over [%d, %d) -> %s\n", pairs.size(),
                    ds.time().T1, ds.time().T2, dir.c_str());
        return 0;
    });
}

std::vector<DAPair> read_da_set(const std::string& da_dir) {
    std::ifstream mf(da_dir + "/da_manifest.json");
    if (!mf) throw std::runtime_error("cannot open " + da_dir + "/da_manifest.json");
    nlohmann::json manifest;
    mf >> manifest;
    std::vector<DAPair> pairs;
    for (int t : manifest.at("times").get<std::vector<int>>()) {
        char name[48];
        std::snprintf(name, sizeof(name), "%s/dapair_%06d.fld", da_dir.c_str(), t);
        FieldFile f = read_field_file(name);
        DAPair p;
        p.time_index = t;
        p.aod_forecast = f.channel("aod_forecast");
        p.discrepancy = f.channel("discrepancy");
        p.label = f.channel("label");
        pairs.push_back(std::move(p));
    }
    return pairs;
}

int cmd_train_danet(const CommonOpts& o, const std::string& da_dir) {
    const ExperimentConfig cfg = resolve_config(o);
    const DatasetReader ds(o.data);
    const std::string dir = make_run_dir(o, "train-danet");
    echo_run_metadata(cfg, dir);
    const ChannelStats st = stats_for(ds);
    const auto pairs = read_da_set(da_dir);
    return dispatch_precision(cfg.danet_train.precision, [&](auto tag) {
        using S = decltype(tag);
        auto result = train_danet<S>(pairs, cfg.danet, cfg.danet_train, st, cfg.danet_seed,
                                     [](const EpochLog& e) {
                                         std::printf("  epoch %d: train %.6f val %.6f\n",
                                                     e.epoch, e.train_loss, e.val_loss);
                                     });
        write_training_log(result.log, dir + "/training_log.csv");
        save_checkpoint(result.weights, cfg.danet, dir + "/danet.ckpt");
        std::printf("train-danet: %zu pairs, %zu epochs, best val %.6f -> %s/danet.ckpt\n",
                    pairs.size(), result.log.size(), result.log.back().val_loss, dir.c_str());
        return 0;
    });
}

int cmd_run_cycle(const CommonOpts& o, const std::string& prednet_path,
                  const std::string& danet_path, int start) {
    const ExperimentConfig cfg = resolve_config(o);
    const DatasetReader ds(o.data);
    const bool assimilate = !danet_path.empty();
    const std::string dir = make_run_dir(o, assimilate ? "run-operational" : "run-baseline");
    echo_run_metadata(cfg, dir);
    const ChannelStats st = stats_for(ds);
    std::optional<int> t0;
    if (start >= 0) t0 = start;
    return dispatch_precision(cfg.prednet_train.precision, [&](auto tag) {
        using S = decltype(tag);
        auto prednet = load_checkpoint<S>(prednet_path);
        CycleResult res;
        if (assimilate) {
            auto danet = load_checkpoint<S>(danet_path);
            res = run_operational(prednet.weights, prednet.spec, st, ds, cfg.cycle,
                                  danet_estimator(danet.weights, danet.spec, st), {}, t0);
        } else {
            res = run_prednet_only(prednet.weights, prednet.spec, st, ds, cfg.cycle, t0);
        }
        write_cycle_report(res, ds, dir);
        std::printf("%s: %d steps, mean AOD RMSE %.5f, mean PM2.5 RMSE %.5f, %zu analyses -> %s\n",
                    assimilate ? "run-operational" : "run-baseline", cfg.cycle.horizon,
                    res.aod_forecast_metrics.mean_rmse(), res.pm25_forecast_metrics.mean_rmse(),
                    res.analysis_times.size(), dir.c_str());
        return 0;
    });
}

std::vector<std::pair<int, StateSnapshot>> read_snapshots(const std::string& run_dir) {
    std::vector<std::pair<int, StateSnapshot>> out;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(run_dir)) {
        const std::string name = e.path().filename().string();
        if (name.rfind("snapshot_", 0) == 0 && e.path().extension() == ".fld")
            files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
        const int t = std::stoi(p.filename().string().substr(9, 6));
        FieldFile f = read_field_file(p.string());
        StateSnapshot s;
        s.time_index = t;
        s.pm25 = f.channel("pm25");
        s.aod550 = f.channel("aod550");
        out.emplace_back(t, std::move(s));
    }
    if (out.empty())
        throw std::invalid_argument("no snapshot_*.fld files in " + run_dir);
    return out;
}

int cmd_evaluate(const CommonOpts& o, const std::string& run_dir) {
    const ExperimentConfig cfg = resolve_config(o);
    const DatasetReader ds(o.data);
    CommonOpts out_opts = o;
    if (out_opts.out.empty()) out_opts.out = run_dir + "/eval";
    const std::string dir = make_run_dir(out_opts, "evaluate");
    echo_run_metadata(cfg, dir);

    const auto snaps = read_snapshots(run_dir);
    MetricSeries aod{"evaluate", "aod550", {}}, pm{"evaluate", "pm25", {}};
    for (const auto& [t, s] : snaps) {
        const StateSnapshot truth = ds.state(t);
        aod.records.push_back({t, rmse(truth.aod550, s.aod550), corrcoef(truth.aod550, s.aod550)});
        pm.records.push_back({t, rmse(truth.pm25, s.pm25), corrcoef(truth.pm25, s.pm25)});
    }
    auto caps = cap_profiles_from(aod);
    for (auto& c : cap_profiles_from(pm)) caps.push_back(std::move(c));
    const auto& [tl, last] = snaps.back();
    const RegionSet boxes = RegionSet::default_boxes(last.aod550.H, last.aod550.W);
    std::vector<RegionalTable> regions{
        {"aod550", regional_eval(ds.state(tl).aod550, last.aod550, boxes)},
        {"pm25", regional_eval(ds.state(tl).pm25, last.pm25, boxes)}};
    emit_report({aod, pm}, caps, regions, dir);
    std::printf("evaluate: %zu snapshots, mean AOD RMSE %.5f, mean PM2.5 RMSE %.5f -> %s\n",
                snaps.size(), aod.mean_rmse(), pm.mean_rmse(), dir.c_str());
    return 0;
}

int cmd_report(const CommonOpts& o, const std::string& run_dir) {
    const ExperimentConfig cfg = resolve_config(o);
    const DatasetReader ds(o.data);
    CommonOpts out_opts = o;
    if (out_opts.out.empty()) out_opts.out = run_dir + "/report";
    const std::string dir = make_run_dir(out_opts, "report");
    echo_run_metadata(cfg, dir);

    const auto snaps = read_snapshots(run_dir);
    int written = 0;
    for (const auto* pick : {&snaps.front(), &snaps.back()}) {
        const auto& [t, s] = *pick;
        const StateSnapshot truth = ds.state(t);
        GridField err(s.aod550.H, s.aod550.W, Units::Dimensionless);
        for (std::size_t i = 0; i < err.size(); ++i)
            err.values[i] = truth.aod550.values[i] - s.aod550.values[i];
        char base[48];
        std::snprintf(base, sizeof(base), "%06d", t);
        const std::string tb = base;
        std::ofstream(dir + "/aod_truth_" + tb + ".svg")
            << render_heatmap(truth.aod550, "AOD550 truth t=" + std::to_string(t));
        std::ofstream(dir + "/aod_forecast_" + tb + ".svg")
            << render_heatmap(s.aod550, "AOD550 forecast t=" + std::to_string(t));
        std::ofstream(dir + "/aod_error_" + tb + ".svg")
            << render_heatmap(err, "AOD550 error t=" + std::to_string(t));
        written += 3;
        if (snaps.size() == 1) break;
    }
    std::vector<double> rmses;
    for (const auto& [t, s] : snaps) rmses.push_back(rmse(ds.state(t).aod550, s.aod550));
    std::ofstream(dir + "/aod_rmse.svg")
        << render_line_chart({{"aod550", rmses}}, "Snapshot AOD RMSE", "RMSE");
    std::printf("report: %d heatmaps + 1 chart -> %s\n", written, dir.c_str());
    return 0;
}

int cmd_verify() {
    struct Row {
        const char* name;
        std::int64_t got;
        std::int64_t want;
    };
    bool ok = true;
    auto check_rows = [&](const char* net, const NetworkSpec& spec,
                          const std::vector<std::int64_t>& want_layers, std::int64_t want_total,
                          std::int64_t want_trainable, std::int64_t want_frozen) {
        auto w = build_network<double>(spec, 1);
        std::vector<Row> rows;
        std::size_t wi = 0;
        for (int l = 0; l < spec.num_layers(); ++l) {
            const std::string pre = "layer" + std::to_string(l) + ".";
            std::int64_t conv = 0, bn = 0;
            for (const auto& p : w.params) {
                if (p.name.rfind(pre, 0) != 0) continue;
                (p.name.find(".bn.") != std::string::npos ? bn : conv) +=
                    static_cast<std::int64_t>(p.value.numel());
            }
            rows.push_back({"convlstm", conv, want_layers[wi++]});
            if (spec.batchnorm_after(l)) rows.push_back({"batchnorm", bn, want_layers[wi++]});
        }
        std::int64_t head = 0;
        for (const auto& p : w.params)
            if (p.name.rfind("head.", 0) == 0) head += static_cast<std::int64_t>(p.value.numel());
        rows.push_back({"conv3d head", head, want_layers[wi++]});

        const ParamCounts c = count_params(w);
        rows.push_back({"total", c.total, want_total});
        rows.push_back({"trainable", c.trainable, want_trainable});
        rows.push_back({"non-trainable", c.non_trainable, want_frozen});
        for (const auto& r : rows) {
            const bool pass = r.got == r.want;
            ok = ok && pass;
            std::printf("verify: %s %-13s %13s  %s\n", net, r.name, thousands(r.got).c_str(),
                        pass ? "ok" : ("MISMATCH, expected " + thousands(r.want)).c_str());
        }
    };

    check_rows("prednet", NetworkSpec::prednet_reference(),
               {903424, 256, 819456, 256, 295168, 256, 33024, 3458}, 2055298, 2054914, 384);
    check_rows("danet", NetworkSpec::danet_reference(),
               {422656, 256, 295168, 256, 33024, 1729}, 753089, 752833, 256);

    auto grad_case = [&](const char* name, double tol, NetworkWeights<double>& w,
                         const std::function<Tensor<double>(NetworkWeights<double>&)>& f) {
        const double err = grad_check<double>(f, w, 6, 1e-5, 99);
        const bool pass = err <= tol;
        ok = ok && pass;
        std::printf("verify: grad %-18s max rel err %.3e  %s\n", name, err,
                    pass ? "ok" : "FAIL");
    };

    std::mt19937_64 rng(5);
    std::normal_distribution<double> n01(0.0, 1.0);
    auto randn = [&](Shape shape) {
        Tensor<double> t(shape);
        for (auto& v : t.data()) v = 0.3 * n01(rng);
        return t;
    };

    {
        NetworkWeights<double> w;
        w.add("kernel", randn({3, 2, 3, 3}));
        w.add("bias", randn({3}));
        const Tensor<double> x = randn({2, 5, 6});
        grad_case("conv2d", 1e-6, w, [&](NetworkWeights<double>& ww) {
            Tensor<double> y = conv2d(x, ww.at("kernel"), ww.at("bias"));
            return mse_loss(y, Tensor<double>(y.shape()));
        });
    }
    {
        NetworkWeights<double> w;
        w.add("scale", randn({3}));
        w.add("shift", randn({3}));
        const Tensor<double> x = randn({3, 4, 5});
        grad_case("batchnorm", 1e-6, w, [&](NetworkWeights<double>& ww) {
            Tensor<double> mm({3}), mv({3});
            std::fill(mv.data().begin(), mv.data().end(), 1.0);
            Tensor<double> y = batchnorm(x, ww.at("scale"), ww.at("shift"), mm, mv,
                                         BNMode::Train, 0.99, 1e-3);
            return mse_loss(y, Tensor<double>(y.shape()));
        });
    }
    {
        const NetworkSpec cell_spec{2, 1, 3, {3}, 1};
        auto w = build_network<double>(cell_spec, 17);
        const Tensor<double> x = randn({1, 2, 4, 5});
        grad_case("convlstm cell", 1e-6, w, [&](NetworkWeights<double>& ww) {
            ConvLSTMCell<double> cell = cell_view(ww, cell_spec, 0);
            Tensor<double> h({3, 4, 5}), c({3, 4, 5});
            auto [hn, cn] = convlstm_step(cell, slice_step(x, 0), h, c);
            return mse_loss(hn, Tensor<double>(hn.shape()));
        });
    }
    {
        const NetworkSpec spec = NetworkSpec::prednet_desk(4);
        auto w = build_prednet<double>(spec, 23);
        const Tensor<double> x = randn({1, 8, 6, 8});
        grad_case("prednet hidden-4", 1e-4, w, [&](NetworkWeights<double>& ww) {
            Tensor<double> y = forward_net(ww, spec, x, BNMode::Train);
            return mse_loss(y, Tensor<double>(y.shape()));
        });
    }

    std::printf("verify: %s\n", ok ? "all checks passed" : "FAILED");
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"D-DNet-style dual-network forecasting and learned assimilation"};
    app.require_subcommand(1);
    app.failure_message(CLI::FailureMessage::help);

    CommonOpts gen_o, trainp_o, evalr_o, buildda_o, traind_o, ops_o, base_o, eval_o, report_o;
    std::string evalr_ckpt, buildda_ckpt, traind_daset, ops_prednet, ops_danet, base_prednet;
    std::string eval_run, report_run;
    int evalr_start = -1, evalr_steps = 40, ops_start = -1, base_start = -1;

    auto* gen = app.add_subcommand("gen-data", "generate the synthetic dataset");
    add_common(gen, gen_o, false);

    auto* trainp = app.add_subcommand("train-prednet", "train the forecast network");
    add_common(trainp, trainp_o, true);

    auto* evalr = app.add_subcommand("eval-rollout", "score one autoregressive rollout");
    add_common(evalr, evalr_o, true);
    evalr->add_option("--prednet", evalr_ckpt, "PredNet checkpoint")->required()
        ->check(CLI::ExistingFile);
    evalr->add_option("--start", evalr_start, "start step (default: T2)");
    evalr->add_option("--steps", evalr_steps, "rollout length in steps");

    auto* buildda = app.add_subcommand("build-da-set", "build the assimilation training set");
    add_common(buildda, buildda_o, true);
    buildda->add_option("--prednet", buildda_ckpt, "PredNet checkpoint")->required()
        ->check(CLI::ExistingFile);

    auto* traind = app.add_subcommand("train-danet", "train the assimilation network");
    add_common(traind, traind_o, true);
    traind->add_option("--da-set", traind_daset, "build-da-set output directory")->required()
        ->check(CLI::ExistingDirectory);

    auto* ops = app.add_subcommand("run-operational", "forecast cycle with assimilation");
    add_common(ops, ops_o, true);
    ops->add_option("--prednet", ops_prednet, "PredNet checkpoint")->required()
        ->check(CLI::ExistingFile);
    ops->add_option("--danet", ops_danet, "DANet checkpoint")->required()
        ->check(CLI::ExistingFile);
    ops->add_option("--start", ops_start, "segment start (default: T2)");

    auto* base = app.add_subcommand("run-baseline", "forecast-only cycle, no assimilation");
    add_common(base, base_o, true);
    base->add_option("--prednet", base_prednet, "PredNet checkpoint")->required()
        ->check(CLI::ExistingFile);
    base->add_option("--start", base_start, "segment start (default: T2)");

    auto* eval = app.add_subcommand("evaluate", "score a run's snapshots against truth");
    add_common(eval, eval_o, true);
    eval->add_option("--run", eval_run, "run directory with snapshot files")->required()
        ->check(CLI::ExistingDirectory);

    auto* report = app.add_subcommand("report", "render charts and heatmaps for a run");
    add_common(report, report_o, true);
    report->add_option("--run", report_run, "run directory with snapshot files")->required()
        ->check(CLI::ExistingDirectory);

    auto* verify = app.add_subcommand("verify", "run the architecture and gradient oracles");
    (void)verify;

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        resolve_threads();
        if (gen->parsed()) return cmd_gen_data(gen_o);
        if (trainp->parsed()) return cmd_train_prednet(trainp_o);
        if (evalr->parsed()) return cmd_eval_rollout(evalr_o, evalr_ckpt, evalr_start, evalr_steps);
        if (buildda->parsed()) return cmd_build_da_set(buildda_o, buildda_ckpt);
        if (traind->parsed()) return cmd_train_danet(traind_o, traind_daset);
        if (ops->parsed()) return cmd_run_cycle(ops_o, ops_prednet, ops_danet, ops_start);
        if (base->parsed()) return cmd_run_cycle(base_o, base_prednet, "", base_start);
        if (eval->parsed()) return cmd_evaluate(eval_o, eval_run);
        if (report->parsed()) return cmd_report(report_o, report_run);
        if (verify->parsed()) return cmd_verify();
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
