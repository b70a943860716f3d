#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "driftadapt/simulator.hpp"

namespace driftadapt {

// One directory per building: manifest.json listing the records plus one
// little-endian float32 blob per record laid out row-major as
//   abs_accel[axis][level][step] followed by drift[axis][story][step].
class ResponseArchiveWriter {
public:
    ResponseArchiveWriter(std::filesystem::path dir, const BuildingSpec& building,
                          std::string config_hash);

    void add(const ResponseRecord& record);
    void finalize();  // writes the manifest; no further adds

private:
    std::filesystem::path dir_;
    BuildingSpec building_;
    std::string config_hash_;
    double dt_ = 0.0;
    std::vector<std::string> record_entries_;  // serialized manifest rows
    bool finalized_ = false;
};

struct ArchiveRecordInfo {
    std::string record_id;
    std::string motion_id;
    double scale_factor = 1.0;
    std::size_t n_steps = 0;
    std::string blob;  // path relative to the archive dir
    std::uint32_t crc32 = 0;
};

class ResponseArchiveReader {
public:
    explicit ResponseArchiveReader(std::filesystem::path dir);

    const BuildingSpec& building() const { return building_; }
    double dt() const { return dt_; }
    const std::string& config_hash() const { return config_hash_; }
    std::size_t size() const { return records_.size(); }
    const ArchiveRecordInfo& info(std::size_t i) const { return records_.at(i); }

    // Validates blob length and checksum; throws CorruptDataset on
    // mismatch.
    ResponseRecord load(std::size_t i) const;

private:
    std::filesystem::path dir_;
    BuildingSpec building_;
    double dt_ = 0.0;
    std::string config_hash_;
    std::vector<ArchiveRecordInfo> records_;
};

std::string record_blob_name(const std::string& record_id);

}  // namespace driftadapt
