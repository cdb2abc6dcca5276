#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ggps/data_pipeline.hpp"

// JSON-lines dataset persistence: one header record followed by one RawCase
// per line. Angles are stored in radians, rotor speeds in rpm, airspeed in
// m/s; degrees exist only at the CLI/config boundary.

namespace ggps {

struct DatasetHeader {
    int schema_version = 1;
    std::uint64_t seed = 0;
    std::string oracle_version = kOracleVersion;
    SampleBounds bounds;
};

void save_dataset(const std::string& path, const DatasetHeader& header,
                  const std::vector<RawCase>& cases);

struct LoadedDataset {
    DatasetHeader header;
    std::vector<RawCase> cases;
};

// Throws std::runtime_error on I/O or parse failure (naming the line) and
// std::invalid_argument on an unsupported schema version.
LoadedDataset load_dataset(const std::string& path);

} // namespace ggps
