#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ddnet/world.hpp"

using namespace ddnet;

namespace {

WorldConfig quiet_world(int H = 8, int W = 12) {
    WorldConfig cfg;
    cfg.H = H;
    cfg.W = W;
    cfg.sources.clear();
    cfg.diffusion = 0;
    cfg.deposition = 0;
    cfg.aod_noise_sigma = 0;
    cfg.wind_amplitude = 0;
    return cfg;
}

AuxiliaryFrame zero_aux(int H, int W) {
    AuxiliaryFrame aux;
    aux.t2m = GridField(H, W);
    aux.u10 = GridField(H, W);
    aux.v10 = GridField(H, W);
    aux.humidity = GridField(H, W, Units::Dimensionless, 0.5);
    aux.geopotential = GridField(H, W);
    aux.bc_emis = GridField(H, W);
    aux.oc_emis = GridField(H, W);
    return aux;
}

}  // namespace

TEST_CASE("step_dynamics: no forcing leaves PM2.5 unchanged") {
    WorldConfig cfg = quiet_world();
    std::mt19937_64 rng(1);
    StateSnapshot s;
    s.pm25 = GridField(cfg.H, cfg.W, Units::MicrogramPerCubicMeter, 3.0);
    s.pm25.at(4, 6) = 10.0;
    s.aod550 = GridField(cfg.H, cfg.W);
    StateSnapshot next = step_dynamics(s, zero_aux(cfg.H, cfg.W), cfg, rng);
    for (std::size_t i = 0; i < s.pm25.size(); ++i)
        CHECK(next.pm25.values[i] == doctest::Approx(s.pm25.values[i]).epsilon(1e-14));
    CHECK(next.time_index == 1);
}

TEST_CASE("step_dynamics: unit point mass moves one cell east at one cell/step") {
    WorldConfig cfg = quiet_world();
    std::mt19937_64 rng(1);
    StateSnapshot s;
    s.pm25 = GridField(cfg.H, cfg.W, Units::MicrogramPerCubicMeter);
    s.pm25.at(3, 5) = 1.0;
    s.aod550 = GridField(cfg.H, cfg.W);
    AuxiliaryFrame aux = zero_aux(cfg.H, cfg.W);
    for (auto& v : aux.u10.values) v = 1.0;  // exactly one cell per step
    StateSnapshot next = step_dynamics(s, aux, cfg, rng);
    CHECK(next.pm25.at(3, 6) == doctest::Approx(1.0));
    CHECK(next.pm25.sum() == doctest::Approx(1.0));
    CHECK(next.pm25.at(3, 5) == doctest::Approx(0.0));
}

TEST_CASE("step_dynamics: CFL violation is an error") {
    WorldConfig cfg = quiet_world();
    std::mt19937_64 rng(1);
    StateSnapshot s;
    s.pm25 = GridField(cfg.H, cfg.W, Units::MicrogramPerCubicMeter, 1.0);
    s.aod550 = GridField(cfg.H, cfg.W);
    AuxiliaryFrame aux = zero_aux(cfg.H, cfg.W);
    for (auto& v : aux.v10.values) v = 1.4;
    CHECK_THROWS_AS(step_dynamics(s, aux, cfg, rng), std::runtime_error);
}

TEST_CASE("mass conservation: fully periodic source-free run over 1000 steps") {
    WorldConfig cfg = quiet_world(12, 16);
    cfg.periodic_ns = true;
    cfg.diffusion = 0.04;
    std::mt19937_64 rng(5);
    StateSnapshot s;
    s.pm25 = GridField(cfg.H, cfg.W, Units::MicrogramPerCubicMeter);
    for (int y = 0; y < cfg.H; ++y)
        for (int x = 0; x < cfg.W; ++x) s.pm25.at(y, x) = 1.0 + std::sin(0.5 * y) * std::cos(0.3 * x);
    s.aod550 = GridField(cfg.H, cfg.W);
    const double mass0 = s.pm25.sum();

    AuxiliaryFrame aux = zero_aux(cfg.H, cfg.W);
    for (int y = 0; y < cfg.H; ++y)
        for (int x = 0; x < cfg.W; ++x) {
            aux.u10.at(y, x) = 0.35 * std::sin(0.4 * y + 0.1);
            aux.v10.at(y, x) = 0.3 * std::cos(0.5 * x);
        }
    double prev = mass0;
    for (int i = 0; i < 1000; ++i) {
        s = step_dynamics(s, aux, cfg, rng);
        const double m = s.pm25.sum();
        CHECK(std::abs(m - prev) / std::abs(prev) < 1e-9);
        prev = m;
    }
    CHECK(std::abs(prev - mass0) / mass0 < 1e-7);
}

TEST_CASE("positivity under the default configuration") {
    WorldConfig cfg = WorldConfig::desk_default();
    std::mt19937_64 rng(cfg.seed);
    StateSnapshot s = initial_state(cfg, rng);
    for (int t = 0; t < 200; ++t) {
        s = step_dynamics(s, make_aux(t + 1, 3.0, cfg), cfg, rng);
        for (double v : s.pm25.values) REQUIRE(v >= 0.0);
        for (double v : s.aod550.values) REQUIRE(v >= 0.0);
    }
}

TEST_CASE("aod_from_pm: pure linear coupling when noise and humidity are off") {
    WorldConfig cfg = quiet_world();
    cfg.aod_alpha = 0.02;
    cfg.aod_humidity_weight = 0;
    std::mt19937_64 rng(2);
    GridField pm(cfg.H, cfg.W, Units::MicrogramPerCubicMeter);
    for (std::size_t i = 0; i < pm.size(); ++i) pm.values[i] = static_cast<double>(i);
    GridField hum(cfg.H, cfg.W, Units::Dimensionless, 0.7);
    GridField aod = aod_from_pm(pm, hum, cfg, rng);
    for (std::size_t i = 0; i < pm.size(); ++i)
        CHECK(aod.values[i] == doctest::Approx(0.02 * pm.values[i]));
}

TEST_CASE("aod_from_pm: zero PM and zero noise give zero AOD") {
    WorldConfig cfg = quiet_world();
    std::mt19937_64 rng(3);
    GridField pm(cfg.H, cfg.W, Units::MicrogramPerCubicMeter);
    GridField hum(cfg.H, cfg.W, Units::Dimensionless, 0.5);
    GridField aod = aod_from_pm(pm, hum, cfg, rng);
    for (double v : aod.values) CHECK(v == 0.0);
}

TEST_CASE("disaggregate_emissions conserves the monthly total") {
    auto uniform = disaggregate_emissions(720.0, std::vector<double>(720, 1.0), 720);
    for (double v : uniform) CHECK(v == doctest::Approx(1.0));

    auto parts = disaggregate_emissions(12.0, {2.0, 1.0, 1.0}, 3);
    CHECK(parts[0] == doctest::Approx(6.0));
    CHECK(parts[1] == doctest::Approx(3.0));
    CHECK(parts[2] == doctest::Approx(3.0));

    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    std::vector<double> weights(97);
    for (auto& w : weights) w = u(rng);
    auto out = disaggregate_emissions(1234.5, weights, 97);
    double sum = 0;
    for (double v : out) sum += v;
    CHECK(std::abs(sum - 1234.5) / 1234.5 < 1e-12);
}

TEST_CASE("disaggregate_emissions rejects bad profiles") {
    CHECK_THROWS_AS(disaggregate_emissions(1.0, {0.0, 0.0}, 2), std::invalid_argument);
    CHECK_THROWS_AS(disaggregate_emissions(1.0, {1.0}, 2), std::invalid_argument);
    CHECK_THROWS_AS(disaggregate_emissions(1.0, {-1.0, 2.0}, 2), std::invalid_argument);
}

TEST_CASE("simulate_observations: full noiseless swath reproduces truth") {
    WorldConfig cfg = quiet_world(10, 20);
    cfg.swath_fraction = 1.0;
    cfg.obs_dropout = 0;
    cfg.obs_sigma = 0;
    std::mt19937_64 rng(9);
    GridField aod(cfg.H, cfg.W, Units::Dimensionless);
    for (std::size_t i = 0; i < aod.size(); ++i) aod.values[i] = 0.01 * static_cast<double>(i);
    ObservationSet obs = simulate_observations(aod, 3, cfg, rng);
    CHECK(obs.observed_count() == aod.size());
    for (std::size_t i = 0; i < aod.size(); ++i) CHECK(obs.values.values[i] == aod.values[i]);
}

TEST_CASE("simulate_observations: coverage matches swath fraction minus dropout") {
    WorldConfig cfg = quiet_world(16, 32);
    cfg.swath_fraction = 0.4;
    cfg.obs_dropout = 0.2;
    cfg.obs_sigma = 0.01;
    std::mt19937_64 rng(11);
    GridField aod(cfg.H, cfg.W, Units::Dimensionless, 0.3);
    double covered = 0;
    const int draws = 100;
    for (int t = 0; t < draws; ++t) {
        ObservationSet obs = simulate_observations(aod, t, cfg, rng);
        covered += static_cast<double>(obs.observed_count()) / static_cast<double>(aod.size());
        for (std::size_t i = 0; i < obs.mask.size(); ++i)
            if (obs.mask[i]) REQUIRE(obs.values.values[i] >= 0.0);
    }
    const double mean_cover = covered / draws;
    const double expect = cfg.swath_fraction * (1.0 - cfg.obs_dropout);
    CHECK(std::abs(mean_cover - expect) < 0.05);
}

TEST_CASE("swath band moves with time") {
    WorldConfig cfg = quiet_world(8, 32);
    cfg.swath_fraction = 0.25;
    cfg.obs_dropout = 0;
    cfg.obs_sigma = 0;
    std::mt19937_64 rng(13);
    GridField aod(cfg.H, cfg.W, Units::Dimensionless, 0.2);
    ObservationSet a = simulate_observations(aod, 0, cfg, rng);
    ObservationSet b = simulate_observations(aod, 1, cfg, rng);
    CHECK(a.mask != b.mask);
}
