#include "ddnet/dataset.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "ddnet/serialize.hpp"

namespace ddnet {

namespace fs = std::filesystem;

namespace {

constexpr char kFieldMagic[4] = {'D', 'D', 'N', 'F'};
constexpr std::uint16_t kFieldVersion = 1;

std::string step_path(const std::string& dir, const char* kind, int t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s_%06d.fld", kind, t);
    return dir + "/" + buf;
}

}  // namespace

void write_field_file(const std::string& path,
                      const std::vector<std::pair<std::string, GridField>>& channels,
                      const std::vector<bool>* mask) {
    if (channels.empty()) throw std::invalid_argument("write_field_file: no channels");
    const int H = channels[0].second.H, W = channels[0].second.W;
    ByteWriter w;
    w.raw(kFieldMagic, 4);
    w.put<std::uint16_t>(kFieldVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(channels.size()));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(H));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(W));
    for (const auto& [name, field] : channels) {
        if (field.H != H || field.W != W)
            throw std::invalid_argument("write_field_file: inconsistent channel dims");
        w.put_string(name);
        w.put<std::uint8_t>(static_cast<std::uint8_t>(field.units));
        w.put_array(field.values);
    }
    if (mask) {
        if (mask->size() != static_cast<std::size_t>(H) * W)
            throw std::invalid_argument("write_field_file: mask size mismatch");
        w.put<std::uint8_t>(1);
        std::vector<std::uint8_t> packed((mask->size() + 7) / 8, 0);
        for (std::size_t i = 0; i < mask->size(); ++i)
            if ((*mask)[i]) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
        w.put_array(packed);
    } else {
        w.put<std::uint8_t>(0);
    }
    seal_crc(w);
    write_file_bytes(path, w.bytes());
}

FieldFile read_field_file(const std::string& path) {
    const auto bytes = read_file_bytes(path);
    auto [payload, n] = check_crc(bytes, path);
    ByteReader r(payload, n, path);
    char magic[4];
    r.raw(magic, 4);
    if (std::memcmp(magic, kFieldMagic, 4) != 0)
        throw std::runtime_error(path + ": not a DDNF field file");
    const auto version = r.get<std::uint16_t>();
    if (version != kFieldVersion)
        throw std::runtime_error(path + ": unsupported field file version");
    const auto nch = r.get<std::uint32_t>();
    const auto H = static_cast<int>(r.get<std::uint32_t>());
    const auto W = static_cast<int>(r.get<std::uint32_t>());
    FieldFile out;
    for (std::uint32_t c = 0; c < nch; ++c) {
        std::string name = r.get_string();
        const auto units = static_cast<Units>(r.get<std::uint8_t>());
        GridField f(H, W, units);
        f.values = r.get_array<double>(static_cast<std::size_t>(H) * W);
        out.channels.emplace_back(std::move(name), std::move(f));
    }
    if (r.get<std::uint8_t>() == 1) {
        const std::size_t count = static_cast<std::size_t>(H) * W;
        auto packed = r.get_array<std::uint8_t>((count + 7) / 8);
        std::vector<bool> mask(count, false);
        for (std::size_t i = 0; i < count; ++i)
            mask[i] = (packed[i / 8] >> (i % 8)) & 1u;
        out.mask = std::move(mask);
    }
    return out;
}

const GridField& FieldFile::channel(const std::string& name) const {
    for (const auto& [n, f] : channels)
        if (n == name) return f;
    throw std::runtime_error("field file has no channel '" + name + "'");
}

DirectoryLock::DirectoryLock(const std::string& dir) : path_(dir + "/.lock") {
    fs::create_directories(dir);
    std::ofstream probe(path_, std::ios::app);
    if (fs::exists(path_) && fs::file_size(path_) > 0)
        throw std::runtime_error("directory " + dir + " is locked by another writer");
    std::ofstream f(path_, std::ios::trunc);
    f << "locked\n";
}

DirectoryLock::~DirectoryLock() {
    std::error_code ec;
    fs::remove(path_, ec);
}

DatasetReader::DatasetReader(std::string dir) : dir_(std::move(dir)) {
    std::ifstream f(dir_ + "/manifest.json");
    if (!f) throw std::runtime_error("cannot open " + dir_ + "/manifest.json");
    nlohmann::json j;
    f >> j;
    time_.dt_hours = j.at("time").at("dt_hours").get<double>();
    time_.T0 = j.at("time").at("T0").get<int>();
    time_.T1 = j.at("time").at("T1").get<int>();
    time_.T2 = j.at("time").at("T2").get<int>();
    time_.T_end = j.at("time").at("T_end").get<int>();
    time_.k = j.at("time").at("k").get<int>();
    ExperimentConfig tmp;  // reuse the overlay machinery for the world block
    tmp.world = WorldConfig{};
    nlohmann::json wrap = {{"world", j.at("world")}};
    overlay_json(tmp, wrap);
    world_ = tmp.world;
    if (world_config_hash(world_) != j.at("world_config_hash").get<std::uint32_t>())
        throw std::runtime_error(dir_ + ": manifest world config hash mismatch");
}

StateSnapshot DatasetReader::state(int t) const {
    FieldFile f = read_field_file(step_path(dir_, "state", t));
    StateSnapshot s;
    s.time_index = t;
    s.pm25 = f.channel("pm25");
    s.aod550 = f.channel("aod550");
    return s;
}

AuxiliaryFrame DatasetReader::aux(int t) const {
    FieldFile f = read_field_file(step_path(dir_, "aux", t));
    AuxiliaryFrame a;
    a.time_index = t;
    a.t2m = f.channel("t2m");
    a.u10 = f.channel("u10");
    a.v10 = f.channel("v10");
    a.humidity = f.channel("humidity");
    a.geopotential = f.channel("geopotential");
    a.bc_emis = f.channel("bc_emis");
    a.oc_emis = f.channel("oc_emis");
    return a;
}

bool DatasetReader::has_obs(int t) const { return fs::exists(step_path(dir_, "obs", t)); }

ObservationSet DatasetReader::obs(int t) const {
    FieldFile f = read_field_file(step_path(dir_, "obs", t));
    if (!f.mask) throw std::runtime_error(step_path(dir_, "obs", t) + ": missing mask");
    ObservationSet o;
    o.time_index = t;
    o.values = f.channel("aod550_obs");
    o.mask = *f.mask;
    return o;
}

void generate_dataset(const WorldConfig& world, const TimeGrid& time, const std::string& out_dir) {
    world.validate();
    time.validate();
    fs::create_directories(out_dir);
    DirectoryLock lock(out_dir);

    std::mt19937_64 rng(world.seed);
    StateSnapshot state = initial_state(world, rng);
    // burn-in runs on the aux frames leading up to t = 0
    for (int i = 0; i < world.burn_in_steps; ++i) {
        AuxiliaryFrame aux = make_aux(i - world.burn_in_steps, time.dt_hours, world);
        state = step_dynamics(state, aux, world, rng);
    }
    state.time_index = 0;

    for (int t = 0; t < time.T_end; ++t) {
        AuxiliaryFrame aux = make_aux(t, time.dt_hours, world);
        write_field_file(step_path(out_dir, "state", t),
                         {{"pm25", state.pm25}, {"aod550", state.aod550}});
        write_field_file(step_path(out_dir, "aux", t),
                         {{"t2m", aux.t2m},
                          {"u10", aux.u10},
                          {"v10", aux.v10},
                          {"humidity", aux.humidity},
                          {"geopotential", aux.geopotential},
                          {"bc_emis", aux.bc_emis},
                          {"oc_emis", aux.oc_emis}});
        if (t % time.k == 0 && t > 0) {
            ObservationSet o = simulate_observations(state.aod550, t, world, rng);
            write_field_file(step_path(out_dir, "obs", t), {{"aod550_obs", o.values}}, &o.mask);
        }
        if (t + 1 < time.T_end) {
            AuxiliaryFrame aux_next = make_aux(t + 1, time.dt_hours, world);
            state = step_dynamics(state, aux_next, world, rng);
        }
    }

    nlohmann::json manifest = {{"format_version", 1},
                               {"H", world.H},
                               {"W", world.W},
                               {"time", to_json(time)},
                               {"world", to_json(world)},
                               {"world_config_hash", world_config_hash(world)},
                               {"seed", world.seed}};
    std::ofstream mf(out_dir + "/manifest.json");
    mf << manifest.dump(2) << "\n";
}

}  // namespace ddnet
