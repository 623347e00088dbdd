#include "ddnet/config.hpp"

#include <fstream>

#include "ddnet/serialize.hpp"

namespace ddnet {

using nlohmann::json;

ExperimentConfig ExperimentConfig::desk_preset() {
    ExperimentConfig cfg;
    cfg.world = WorldConfig::desk_default();
    // 2 synthetic years train, 4 months DA-set, 4 months operational (3 h steps)
    const int steps_per_month = 240;
    cfg.time.dt_hours = 3.0;
    cfg.time.T0 = 0;
    cfg.time.T1 = 24 * steps_per_month;
    cfg.time.T2 = cfg.time.T1 + 4 * steps_per_month;
    cfg.time.T_end = cfg.time.T2 + 4 * steps_per_month + 1;
    cfg.time.k = 4;
    cfg.cycle.k = 4;
    cfg.cycle.horizon = 4 * steps_per_month;
    return cfg;
}

ExperimentConfig ExperimentConfig::reference_preset() {
    ExperimentConfig cfg = desk_preset();
    cfg.prednet = NetworkSpec::prednet_reference();
    cfg.danet = NetworkSpec::danet_reference();
    return cfg;
}

void ExperimentConfig::validate() const {
    world.validate();
    time.validate();
    prednet.validate();
    danet.validate();
    if (prednet.in_channels != 1 + AuxiliaryFrame::kChannels)
        throw ConfigError("prednet.in_channels", "must be 8 (AOD + 7 auxiliary channels)");
    if (prednet.out_channels != 2)
        throw ConfigError("prednet.out_channels", "must be 2 (PM2.5, AOD550)");
    if (danet.in_channels != 2)
        throw ConfigError("danet.in_channels", "must be 2 (forecast, discrepancy)");
    if (danet.out_channels != 1)
        throw ConfigError("danet.out_channels", "must be 1 (AOD550 error)");
    if (cycle.k < 1) throw ConfigError("cycle.k", "must be >= 1");
    if (cycle.horizon < cycle.k) throw ConfigError("cycle.horizon", "must be >= cycle.k");
    for (const auto& t : {prednet_train, danet_train})
        if (t.precision != "f32" && t.precision != "f64")
            throw ConfigError("train.precision", "must be 'f32' or 'f64'");
}

json to_json(const WorldConfig& cfg) {
    json sources = json::array();
    for (const auto& s : cfg.sources)
        sources.push_back({{"y", s.y},
                           {"x", s.x},
                           {"monthly_bc", s.monthly_bc},
                           {"monthly_oc", s.monthly_oc},
                           {"blob_sigma", s.blob_sigma}});
    return {{"H", cfg.H},
            {"W", cfg.W},
            {"wind_amplitude", cfg.wind_amplitude},
            {"wind_rotation_hours", cfg.wind_rotation_hours},
            {"diffusion", cfg.diffusion},
            {"deposition", cfg.deposition},
            {"sources", sources},
            {"aod_alpha", cfg.aod_alpha},
            {"aod_humidity_weight", cfg.aod_humidity_weight},
            {"aod_noise_sigma", cfg.aod_noise_sigma},
            {"swath_fraction", cfg.swath_fraction},
            {"obs_dropout", cfg.obs_dropout},
            {"obs_sigma", cfg.obs_sigma},
            {"seed", cfg.seed},
            {"periodic_ns", cfg.periodic_ns},
            {"variance_floor", cfg.variance_floor},
            {"burn_in_steps", cfg.burn_in_steps}};
}

json to_json(const TimeGrid& tg) {
    return {{"dt_hours", tg.dt_hours}, {"T0", tg.T0},       {"T1", tg.T1},
            {"T2", tg.T2},             {"T_end", tg.T_end}, {"k", tg.k}};
}

json to_json(const NetworkSpec& spec) {
    return {{"in_channels", spec.in_channels},
            {"out_channels", spec.out_channels},
            {"hidden_channels", spec.hidden_channels},
            {"kernels", spec.kernels},
            {"head_kernel", spec.head_kernel}};
}

static json to_json(const TrainSettings& t) {
    return {{"epochs", t.epochs},
            {"learning_rate", t.learning_rate},
            {"shuffle_seed", t.shuffle_seed},
            {"early_stop_patience", t.early_stop_patience},
            {"sample_stride", t.sample_stride},
            {"validation_fraction", t.validation_fraction},
            {"precision", t.precision}};
}

json to_json(const ExperimentConfig& cfg) {
    return {{"world", to_json(cfg.world)},
            {"time", to_json(cfg.time)},
            {"prednet", to_json(cfg.prednet)},
            {"danet", to_json(cfg.danet)},
            {"prednet_train", to_json(cfg.prednet_train)},
            {"danet_train", to_json(cfg.danet_train)},
            {"cycle",
             {{"k", cfg.cycle.k},
              {"horizon", cfg.cycle.horizon},
              {"emit_cadence", cfg.cycle.emit_cadence}}},
            {"prednet_seed", cfg.prednet_seed},
            {"danet_seed", cfg.danet_seed}};
}

namespace {

template <class T>
void read_key(const json& j, const std::string& path, const char* key, T& out) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(path + "." + key, e.what());
    }
}

void check_known_keys(const json& j, const std::string& path,
                      std::initializer_list<const char*> known) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (!ok) throw ConfigError(path + "." + it.key(), "unknown key");
    }
}

void overlay_world(WorldConfig& w, const json& j, const std::string& path) {
    check_known_keys(j, path,
                     {"H", "W", "wind_amplitude", "wind_rotation_hours", "diffusion",
                      "deposition", "sources", "aod_alpha", "aod_humidity_weight",
                      "aod_noise_sigma", "swath_fraction", "obs_dropout", "obs_sigma", "seed",
                      "periodic_ns", "variance_floor", "burn_in_steps"});
    read_key(j, path, "H", w.H);
    read_key(j, path, "W", w.W);
    read_key(j, path, "wind_amplitude", w.wind_amplitude);
    read_key(j, path, "wind_rotation_hours", w.wind_rotation_hours);
    read_key(j, path, "diffusion", w.diffusion);
    read_key(j, path, "deposition", w.deposition);
    read_key(j, path, "aod_alpha", w.aod_alpha);
    read_key(j, path, "aod_humidity_weight", w.aod_humidity_weight);
    read_key(j, path, "aod_noise_sigma", w.aod_noise_sigma);
    read_key(j, path, "swath_fraction", w.swath_fraction);
    read_key(j, path, "obs_dropout", w.obs_dropout);
    read_key(j, path, "obs_sigma", w.obs_sigma);
    read_key(j, path, "seed", w.seed);
    read_key(j, path, "periodic_ns", w.periodic_ns);
    read_key(j, path, "variance_floor", w.variance_floor);
    read_key(j, path, "burn_in_steps", w.burn_in_steps);
    if (j.contains("sources")) {
        w.sources.clear();
        int i = 0;
        for (const auto& sj : j.at("sources")) {
            const std::string spath = path + ".sources[" + std::to_string(i++) + "]";
            EmissionSource s;
            read_key(sj, spath, "y", s.y);
            read_key(sj, spath, "x", s.x);
            read_key(sj, spath, "monthly_bc", s.monthly_bc);
            read_key(sj, spath, "monthly_oc", s.monthly_oc);
            read_key(sj, spath, "blob_sigma", s.blob_sigma);
            w.sources.push_back(s);
        }
    }
}

void overlay_spec(NetworkSpec& s, const json& j, const std::string& path) {
    check_known_keys(j, path,
                     {"in_channels", "out_channels", "hidden_channels", "kernels", "head_kernel"});
    read_key(j, path, "in_channels", s.in_channels);
    read_key(j, path, "out_channels", s.out_channels);
    read_key(j, path, "hidden_channels", s.hidden_channels);
    read_key(j, path, "kernels", s.kernels);
    read_key(j, path, "head_kernel", s.head_kernel);
}

void overlay_train(TrainSettings& t, const json& j, const std::string& path) {
    check_known_keys(j, path,
                     {"epochs", "learning_rate", "shuffle_seed", "early_stop_patience",
                      "sample_stride", "validation_fraction", "precision"});
    read_key(j, path, "epochs", t.epochs);
    read_key(j, path, "learning_rate", t.learning_rate);
    read_key(j, path, "shuffle_seed", t.shuffle_seed);
    read_key(j, path, "early_stop_patience", t.early_stop_patience);
    read_key(j, path, "sample_stride", t.sample_stride);
    read_key(j, path, "validation_fraction", t.validation_fraction);
    read_key(j, path, "precision", t.precision);
}

}  // namespace

void overlay_json(ExperimentConfig& cfg, const json& j) {
    check_known_keys(j, "",
                     {"preset", "world", "time", "prednet", "danet", "prednet_train",
                      "danet_train", "cycle", "prednet_seed", "danet_seed"});
    if (j.contains("world")) overlay_world(cfg.world, j.at("world"), "world");
    if (j.contains("time")) {
        const auto& t = j.at("time");
        check_known_keys(t, "time", {"dt_hours", "T0", "T1", "T2", "T_end", "k"});
        read_key(t, "time", "dt_hours", cfg.time.dt_hours);
        read_key(t, "time", "T0", cfg.time.T0);
        read_key(t, "time", "T1", cfg.time.T1);
        read_key(t, "time", "T2", cfg.time.T2);
        read_key(t, "time", "T_end", cfg.time.T_end);
        read_key(t, "time", "k", cfg.time.k);
    }
    if (j.contains("prednet")) overlay_spec(cfg.prednet, j.at("prednet"), "prednet");
    if (j.contains("danet")) overlay_spec(cfg.danet, j.at("danet"), "danet");
    if (j.contains("prednet_train"))
        overlay_train(cfg.prednet_train, j.at("prednet_train"), "prednet_train");
    if (j.contains("danet_train"))
        overlay_train(cfg.danet_train, j.at("danet_train"), "danet_train");
    if (j.contains("cycle")) {
        const auto& c = j.at("cycle");
        check_known_keys(c, "cycle", {"k", "horizon", "emit_cadence"});
        read_key(c, "cycle", "k", cfg.cycle.k);
        read_key(c, "cycle", "horizon", cfg.cycle.horizon);
        read_key(c, "cycle", "emit_cadence", cfg.cycle.emit_cadence);
    }
    read_key(j, "", "prednet_seed", cfg.prednet_seed);
    read_key(j, "", "danet_seed", cfg.danet_seed);
}

ExperimentConfig load_experiment_config(const std::string& path, const std::string& preset) {
    std::string name = preset;
    json j;
    if (!path.empty()) {
        std::ifstream f(path);
        if (!f) throw std::runtime_error("cannot open config file " + path);
        try {
            f >> j;
        } catch (const json::exception& e) {
            throw std::runtime_error("config file " + path + ": " + e.what());
        }
        if (name.empty() && j.contains("preset")) name = j.at("preset").get<std::string>();
    }
    if (name.empty()) name = "desk";

    ExperimentConfig cfg;
    if (name == "desk")
        cfg = ExperimentConfig::desk_preset();
    else if (name == "reference")
        cfg = ExperimentConfig::reference_preset();
    else
        throw ConfigError("preset", "unknown preset '" + name + "'");
    if (!j.is_null()) overlay_json(cfg, j);
    cfg.validate();
    return cfg;
}

std::uint32_t world_config_hash(const WorldConfig& cfg) {
    const std::string s = to_json(cfg).dump();
    return crc32(s.data(), s.size());
}

}  // namespace ddnet
