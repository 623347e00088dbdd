#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "ddnet/grid.hpp"
#include "ddnet/network.hpp"
#include "ddnet/world.hpp"

namespace ddnet {

/// Validation failure with the offending key path.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& key, const std::string& what)
        : std::runtime_error("config key '" + key + "': " + what) {}
};

struct TrainSettings {
    int epochs = 3;
    double learning_rate = 1e-3;
    std::uint64_t shuffle_seed = 1;
    int early_stop_patience = 5;
    int sample_stride = 1;      // train on every Nth step pair
    double validation_fraction = 0.1;
    std::string precision = "f32";  // "f32" or "f64"
};

struct CycleSettings {
    int k = 4;            // DA interval in steps
    int horizon = 960;    // total steps of the operational run
    int emit_cadence = 8; // snapshot output interval
};

/// One structured config covering world generation, both networks,
/// training, and the operational cycle.
struct ExperimentConfig {
    WorldConfig world;
    TimeGrid time;
    NetworkSpec prednet = NetworkSpec::prednet_desk();
    NetworkSpec danet = NetworkSpec::danet_desk();
    TrainSettings prednet_train;
    TrainSettings danet_train;
    CycleSettings cycle;
    std::uint64_t prednet_seed = 11;
    std::uint64_t danet_seed = 22;

    static ExperimentConfig desk_preset();
    static ExperimentConfig reference_preset();

    void validate() const;
};

nlohmann::json to_json(const WorldConfig& cfg);
nlohmann::json to_json(const TimeGrid& tg);
nlohmann::json to_json(const NetworkSpec& spec);
nlohmann::json to_json(const ExperimentConfig& cfg);

/// Overlays values present in `j` onto `cfg`; unknown keys are an error.
void overlay_json(ExperimentConfig& cfg, const nlohmann::json& j);

ExperimentConfig load_experiment_config(const std::string& path, const std::string& preset);

/// Stable hash of the world configuration, recorded in dataset manifests.
std::uint32_t world_config_hash(const WorldConfig& cfg);

}  // namespace ddnet
