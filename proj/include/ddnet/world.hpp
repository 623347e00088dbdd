#pragma once

#include <random>
#include <string>
#include <vector>

#include "ddnet/grid.hpp"

namespace ddnet {

struct EmissionSource {
    int y = 0;
    int x = 0;
    double monthly_bc = 0.0;  // mass per 30-day month
    double monthly_oc = 0.0;
    double blob_sigma = 1.5;  // spatial spread of the source, in cells
};

/// Configuration of the synthetic advection-diffusion world that stands in
/// for the reanalysis generating process.
struct WorldConfig {
    int H = 32;
    int W = 64;

    double wind_amplitude = 0.5;       // max wind, cells per step; CFL bound
    double wind_rotation_hours = 720;  // period of the large-scale flow rotation
    double diffusion = 0.08;           // cells^2 per step
    double deposition = 0.012;         // removed fraction per step
    std::vector<EmissionSource> sources;

    double aod_alpha = 0.016;          // AOD per unit PM2.5
    double aod_humidity_weight = 2.2;  // humidity modulation strength
    double aod_noise_sigma = 0.25;     // additive AOD noise

    double swath_fraction = 0.35;
    double obs_dropout = 0.15;
    double obs_sigma = 0.03;

    std::uint64_t seed = 1234;
    bool periodic_ns = false;  // fully periodic world (conservation tests)
    double variance_floor = 1e-4;
    int burn_in_steps = 400;

    static WorldConfig desk_default();

    void validate() const;
};

/// Emission rate per 3-hour slot from a monthly total and a nonnegative
/// temporal profile. Conserves the total exactly.
std::vector<double> disaggregate_emissions(double monthly_total,
                                           const std::vector<double>& profile_weights,
                                           int slots);

/// Deterministic exogenous fields for one time index.
AuxiliaryFrame make_aux(int time_index, double dt_hours, const WorldConfig& cfg);

/// AOD550 from PM2.5 with humidity modulation and additive noise:
///   aod = alpha * pm * (1 + w_h * (humidity - 0.5)) + sigma_c * N(0,1), clipped at 0.
GridField aod_from_pm(const GridField& pm25, const GridField& humidity, const WorldConfig& cfg,
                      std::mt19937_64& rng);

/// One flux-form upwind advection-diffusion step with emission injection
/// and linear deposition; recomputes AOD from the new PM2.5 field.
/// Periodic east-west, reflective north-south (periodic if cfg.periodic_ns).
StateSnapshot step_dynamics(const StateSnapshot& state, const AuxiliaryFrame& aux,
                            const WorldConfig& cfg, std::mt19937_64& rng);

/// Satellite-style masked observations: a moving diagonal swath band with
/// random cloud dropout and additive Gaussian noise.
ObservationSet simulate_observations(const GridField& aod550, int time_index,
                                     const WorldConfig& cfg, std::mt19937_64& rng);

/// Initial PM2.5 field before burn-in.
StateSnapshot initial_state(const WorldConfig& cfg, std::mt19937_64& rng);

}  // namespace ddnet
