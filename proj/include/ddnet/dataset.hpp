#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ddnet/config.hpp"
#include "ddnet/grid.hpp"

namespace ddnet {

/// Writes/reads named-channel field files ("DDNF": dims, channel names,
/// little-endian float64 values, trailing CRC32). An optional validity
/// mask is stored as packed bits.
void write_field_file(const std::string& path,
                      const std::vector<std::pair<std::string, GridField>>& channels,
                      const std::vector<bool>* mask = nullptr);

struct FieldFile {
    std::vector<std::pair<std::string, GridField>> channels;
    std::optional<std::vector<bool>> mask;

    const GridField& channel(const std::string& name) const;
};

FieldFile read_field_file(const std::string& path);

/// On-disk dataset directory: manifest.json plus per-step state/aux field
/// files and per-DA-time observation files.
class DatasetReader {
public:
    explicit DatasetReader(std::string dir);

    const TimeGrid& time() const { return time_; }
    const WorldConfig& world() const { return world_; }
    double dt_hours() const { return time_.dt_hours; }

    StateSnapshot state(int t) const;
    AuxiliaryFrame aux(int t) const;
    bool has_obs(int t) const;
    ObservationSet obs(int t) const;

private:
    std::string dir_;
    TimeGrid time_;
    WorldConfig world_;
};

/// Generates the full synthetic dataset (burn-in, then per-step state and
/// auxiliary files, observations every k steps) plus its manifest.
/// Deterministic: identical (config, seed) produce byte-identical output.
void generate_dataset(const WorldConfig& world, const TimeGrid& time, const std::string& out_dir);

/// Exclusive per-directory write lock; released on destruction.
class DirectoryLock {
public:
    explicit DirectoryLock(const std::string& dir);
    ~DirectoryLock();
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    std::string path_;
};

}  // namespace ddnet
