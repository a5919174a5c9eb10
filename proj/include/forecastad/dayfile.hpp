#pragma once

#include "forecastad/types.hpp"

#include <filesystem>

namespace forecastad {

constexpr uint16_t kDayFileVersion = 1;

/// Binary day file, little-endian. Layout: magic "FCAD", version u16, H u16,
/// W u16, frame count u32; per frame: timestamp f64, label i8, segment i8,
/// anomaly_kind u8, H*W pixels f32 row-major.
void write_day_file(const std::filesystem::path& path, const DaySequence& day);

/// Reads a day file; day_id is taken from the file stem.
DaySequence read_day_file(const std::filesystem::path& path);

struct Manifest {
    std::vector<std::string> train;       // file names relative to the manifest
    std::vector<std::string> validation;
    std::vector<std::string> test;
    SetupTag setup = SetupTag::Tr2;
};

void write_manifest(const std::filesystem::path& path, const Manifest& manifest);
Manifest read_manifest(const std::filesystem::path& path);

/// Loads every day named by the manifest into a DatasetSplit.
DatasetSplit load_split(const std::filesystem::path& manifest_path);

}  // namespace forecastad
