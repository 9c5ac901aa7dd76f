#pragma once

#include <filesystem>
#include <span>
#include <string>

#include <nlohmann/json.hpp>

#include "gestura/synthdata.hpp"

namespace gestura {

inline constexpr const char* kDatasetManifest = "manifest.json";
inline constexpr const char* kDatasetSamples = "samples.bin";

nlohmann::ordered_json spec_to_json(const DatasetSpec& spec);
DatasetSpec spec_from_json(const nlohmann::json& j);

// Writes <dir>/manifest.json (spec, participants, split, client partitions, per-record labels) and
// <dir>/samples.bin (little-endian f64 tensors, length-prefixed per modality).
// Output bytes depend only on the dataset.
void write_dataset(const Dataset& dataset, const DatasetSplit& split, const std::filesystem::path& dir,
                   std::span<const ClientPartition> clients = {});

// Reads a dataset written by write_dataset. A missing directory is a ConfigError,
// truncated or corrupt files are IoErrors.
Dataset read_dataset(const std::filesystem::path& dir);

// One CSV per modality under <dir>: visual.csv (sample,row,col,value), accel.csv and emg.csv
// (sample,t,channel values...).
void dump_csv(const Dataset& dataset, const std::filesystem::path& dir);

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(std::string_view bytes);

}  // namespace gestura
