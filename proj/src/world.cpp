#include "ddnet/world.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ddnet {

namespace {

constexpr double kTau = 2.0 * std::numbers::pi;
constexpr double kPi = std::numbers::pi;
constexpr double kMonthHours = 720.0;  // 30-day months
constexpr double kYearHours = 8640.0;  // 12 such months

int wrap(int i, int n) { return (i % n + n) % n; }

}  // namespace

WorldConfig WorldConfig::desk_default() {
    WorldConfig cfg;
    cfg.sources = {
        {8, 12, 2200.0, 3200.0, 3.0},
        {20, 40, 3500.0, 5000.0, 3.5},
        {26, 55, 1500.0, 2200.0, 2.5},
        {12, 28, 1000.0, 1500.0, 3.0},
        {16, 32, 100000.0, 124000.0, 50.0},
    };
    return cfg;
}

void WorldConfig::validate() const {
    if (H < 4 || W < 4) throw std::invalid_argument("world: grid too small");
    if (wind_amplitude > 0.9 || wind_amplitude < 0)
        throw std::invalid_argument("world: CFL bound violated, wind_amplitude > 0.9");
    if (diffusion < 0 || deposition < 0 || deposition > 1)
        throw std::invalid_argument("world: bad diffusion/deposition");
    if (swath_fraction < 0 || swath_fraction > 1 || obs_dropout < 0 || obs_dropout > 1)
        throw std::invalid_argument("world: observation fractions must be in [0,1]");
}

std::vector<double> disaggregate_emissions(double monthly_total,
                                           const std::vector<double>& profile_weights,
                                           int slots) {
    if (static_cast<int>(profile_weights.size()) != slots)
        throw std::invalid_argument("disaggregate_emissions: slots != len(profile_weights)");
    double wsum = 0.0;
    for (double w : profile_weights) {
        if (w < 0) throw std::invalid_argument("disaggregate_emissions: negative weight");
        wsum += w;
    }
    if (wsum == 0.0) throw std::invalid_argument("disaggregate_emissions: all-zero weights");
    std::vector<double> out(profile_weights.size());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = monthly_total * profile_weights[i] / wsum;
    return out;
}

namespace {

// CAMS-TEMPO-style diurnal/weekly activity profile for a 3-hour slot.
double slot_weight(double hours) {
    const double hod = std::fmod(hours, 24.0);
    const double dow = std::fmod(hours / 24.0, 7.0);
    const double diurnal = 1.0 + 0.45 * std::sin(kTau * (hod - 6.0) / 24.0);
    const double weekly = (dow < 5.0) ? 1.0 : 0.75;
    return diurnal * weekly;
}

// Per-slot emission rates for the month containing `hours`, evaluated at
// the slot for `hours`. Monthly totals carry a mild seasonal cycle.
double emission_rate_at(double monthly_total, double hours, double dt_hours) {
    const int month = static_cast<int>(std::floor(hours / kMonthHours));
    const double month_start = month * kMonthHours;
    const int slots = static_cast<int>(kMonthHours / dt_hours);
    std::vector<double> weights(static_cast<std::size_t>(slots));
    for (int i = 0; i < slots; ++i)
        weights[static_cast<std::size_t>(i)] = slot_weight(month_start + i * dt_hours);
    const double season = 1.0 + 0.3 * std::sin(kTau * (month % 12) / 12.0);
    const auto rates = disaggregate_emissions(monthly_total * season, weights, slots);
    const int slot = static_cast<int>((hours - month_start) / dt_hours);
    return rates[static_cast<std::size_t>(std::min(slot, slots - 1))];
}

}  // namespace

AuxiliaryFrame make_aux(int time_index, double dt_hours, const WorldConfig& cfg) {
    const double hours = time_index * dt_hours;
    const int H = cfg.H, W = cfg.W;
    AuxiliaryFrame aux;
    aux.time_index = time_index;
    aux.t2m = GridField(H, W);
    aux.u10 = GridField(H, W);
    aux.v10 = GridField(H, W);
    aux.humidity = GridField(H, W);
    aux.geopotential = GridField(H, W);
    aux.bc_emis = GridField(H, W);
    aux.oc_emis = GridField(H, W);

    const double theta = kTau * hours / cfg.wind_rotation_hours;
    const double A = cfg.wind_amplitude;
    for (int y = 0; y < H; ++y) {
        const double lat = static_cast<double>(y) / (H - 1);  // 0 = north edge
        for (int x = 0; x < W; ++x) {
            const double lon = static_cast<double>(x) / W;
            // bounded components: |u| <= 0.9 A, |v| <= 0.6 A
            aux.u10.at(y, x) = A * (0.55 + 0.35 * std::sin(kTau * lat)) * std::cos(theta);
            aux.v10.at(y, x) = 0.6 * A * std::sin(theta + kTau * lon) * std::sin(kPi * lat);
            aux.t2m.at(y, x) = 280.0 - 14.0 * std::cos(kTau * lat / 2.0) +
                               9.0 * std::sin(kTau * hours / kYearHours) +
                               2.0 * std::sin(kTau * hours / 24.0);
            double h = 0.5 + 0.25 * std::sin(kTau * lon + kTau * hours / (3.0 * kMonthHours)) +
                       0.15 * std::sin(kTau * lat - kTau * hours / kYearHours);
            aux.humidity.at(y, x) = std::min(1.0, std::max(0.05, h));
            aux.geopotential.at(y, x) =
                100.0 * std::exp(-((y - 0.3 * H) * (y - 0.3 * H) / 40.0 +
                                   (x - 0.6 * W) * (x - 0.6 * W) / 160.0)) +
                60.0 * std::exp(-((y - 0.75 * H) * (y - 0.75 * H) / 30.0 +
                                  (x - 0.2 * W) * (x - 0.2 * W) / 90.0));
        }
    }

    for (const auto& src : cfg.sources) {
        const double rate_bc = emission_rate_at(src.monthly_bc, hours, dt_hours);
        const double rate_oc = emission_rate_at(src.monthly_oc, hours, dt_hours);
        // normalized gaussian blob so the injected mass equals the slot rate
        double norm = 0.0;
        const double s2 = 2.0 * src.blob_sigma * src.blob_sigma;
        std::vector<double> blob(static_cast<std::size_t>(H) * W, 0.0);
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                int dx = std::abs(x - src.x);
                dx = std::min(dx, W - dx);  // periodic east-west distance
                const int dy = y - src.y;
                const double g = std::exp(-(dy * dy + dx * dx) / s2);
                blob[static_cast<std::size_t>(y) * W + x] = g;
                norm += g;
            }
        for (std::size_t i = 0; i < blob.size(); ++i) {
            aux.bc_emis.values[i] += rate_bc * blob[i] / norm;
            aux.oc_emis.values[i] += rate_oc * blob[i] / norm;
        }
    }
    return aux;
}

GridField aod_from_pm(const GridField& pm25, const GridField& humidity, const WorldConfig& cfg,
                      std::mt19937_64& rng) {
    if (!pm25.same_shape(humidity))
        throw std::invalid_argument("aod_from_pm: shape mismatch");
    GridField aod(pm25.H, pm25.W, Units::Dimensionless);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (std::size_t i = 0; i < aod.values.size(); ++i) {
        double v = cfg.aod_alpha * pm25.values[i] *
                   (1.0 + cfg.aod_humidity_weight * (humidity.values[i] - 0.5));
        if (cfg.aod_noise_sigma > 0) v += cfg.aod_noise_sigma * noise(rng);
        aod.values[i] = std::max(0.0, v);
    }
    return aod;
}

StateSnapshot step_dynamics(const StateSnapshot& state, const AuxiliaryFrame& aux,
                            const WorldConfig& cfg, std::mt19937_64& rng) {
    const int H = cfg.H, W = cfg.W;
    if (state.pm25.H != H || state.pm25.W != W)
        throw std::invalid_argument("step_dynamics: state grid mismatch");

    const GridField& q = state.pm25;
    const GridField& u = aux.u10;
    const GridField& v = aux.v10;

    double max_wind = 0.0;
    for (std::size_t i = 0; i < u.values.size(); ++i)
        max_wind = std::max({max_wind, std::abs(u.values[i]), std::abs(v.values[i])});
    if (max_wind > 1.0 + 1e-12)
        throw std::runtime_error("step_dynamics: CFL violation, max wind " +
                                 std::to_string(max_wind) + " cells/step");

    GridField next(H, W, Units::MicrogramPerCubicMeter);
    next.values = q.values;

    // Advection, flux form, first-order upwind. fx(y,x) is the flux through
    // the east face of cell (y,x); fy(y,x) through the south face.
    std::vector<double> fx(q.values.size(), 0.0), fy(q.values.size(), 0.0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const int xe = wrap(x + 1, W);
            const double uf = 0.5 * (u.at(y, x) + u.at(y, xe));
            fx[static_cast<std::size_t>(y) * W + x] =
                uf >= 0 ? uf * q.at(y, x) : uf * q.at(y, xe);
        }
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const int ys = y + 1;
            if (ys == H && !cfg.periodic_ns) continue;  // reflective wall: zero flux
            const int yw = cfg.periodic_ns ? wrap(ys, H) : ys;
            const double vf = 0.5 * (v.at(y, x) + v.at(yw, x));
            fy[static_cast<std::size_t>(y) * W + x] =
                vf >= 0 ? vf * q.at(y, x) : vf * q.at(yw, x);
        }
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double fe = fx[static_cast<std::size_t>(y) * W + x];
            const double fw = fx[static_cast<std::size_t>(y) * W + wrap(x - 1, W)];
            double fs = fy[static_cast<std::size_t>(y) * W + x];
            double fn = 0.0;
            if (y > 0)
                fn = fy[static_cast<std::size_t>(y - 1) * W + x];
            else if (cfg.periodic_ns)
                fn = fy[static_cast<std::size_t>(H - 1) * W + x];
            next.at(y, x) -= (fe - fw) + (fs - fn);
        }

    // Diffusion, flux form on the advected field.
    if (cfg.diffusion > 0) {
        const GridField cur = next;
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                const int xe = wrap(x + 1, W);
                const double f = -cfg.diffusion * (cur.at(y, xe) - cur.at(y, x));
                next.at(y, x) -= f;
                next.at(y, xe) += f;
            }
        for (int y = 0; y < H; ++y) {
            const int ys = y + 1;
            if (ys == H && !cfg.periodic_ns) continue;
            const int yw = cfg.periodic_ns ? wrap(ys, H) : ys;
            for (int x = 0; x < W; ++x) {
                const double f = -cfg.diffusion * (cur.at(yw, x) - cur.at(y, x));
                next.at(y, x) -= f;
                next.at(yw, x) += f;
            }
        }
    }

    // Emission injection and linear deposition.
    for (std::size_t i = 0; i < next.values.size(); ++i) {
        next.values[i] += aux.bc_emis.values[i] + aux.oc_emis.values[i];
        next.values[i] *= (1.0 - cfg.deposition);
    }
    next.clip_nonnegative();

    StateSnapshot out;
    out.time_index = state.time_index + 1;
    out.pm25 = std::move(next);
    out.aod550 = aod_from_pm(out.pm25, aux.humidity, cfg, rng);
    return out;
}

ObservationSet simulate_observations(const GridField& aod550, int time_index,
                                     const WorldConfig& cfg, std::mt19937_64& rng) {
    const int H = aod550.H, W = aod550.W;
    ObservationSet obs;
    obs.time_index = time_index;
    obs.values = GridField(H, W, Units::Dimensionless, ObservationSet::kSentinel);
    obs.mask.assign(aod550.size(), false);

    const int band = std::max(1, static_cast<int>(std::lround(cfg.swath_fraction * W)));
    const int offset = wrap(time_index * 7, W);  // band advances with time
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const bool in_band = wrap(x + y - offset, W) < band;
            if (!in_band) continue;
            if (cfg.obs_dropout > 0 && unif(rng) < cfg.obs_dropout) continue;
            double v = aod550.at(y, x);
            if (cfg.obs_sigma > 0) v += cfg.obs_sigma * noise(rng);
            obs.values.at(y, x) = std::max(0.0, v);
            obs.mask[static_cast<std::size_t>(y) * W + x] = true;
        }
    return obs;
}

StateSnapshot initial_state(const WorldConfig& cfg, std::mt19937_64& rng) {
    StateSnapshot s;
    s.time_index = 0;
    s.pm25 = GridField(cfg.H, cfg.W, Units::MicrogramPerCubicMeter, 5.0);
    for (const auto& src : cfg.sources) {
        for (int y = 0; y < cfg.H; ++y)
            for (int x = 0; x < cfg.W; ++x) {
                int dx = std::abs(x - src.x);
                dx = std::min(dx, cfg.W - dx);
                const int dy = y - src.y;
                s.pm25.at(y, x) += 20.0 * std::exp(-(dy * dy + dx * dx) /
                                                   (4.0 * src.blob_sigma * src.blob_sigma));
            }
    }
    AuxiliaryFrame aux0 = make_aux(0, 3.0, cfg);
    s.aod550 = aod_from_pm(s.pm25, aux0.humidity, cfg, rng);
    return s;
}

}  // namespace ddnet
