#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace driftadapt {

// Binary blobs are little-endian, row-major. Writers refuse big-endian
// hosts outright instead of silently producing unreadable archives.

void write_f32_blob(const std::filesystem::path& path, const std::vector<float>& data);
void write_u8_blob(const std::filesystem::path& path, const std::vector<std::uint8_t>& data);

// Readers validate the byte count against the expected element count and
// throw CorruptDataset on mismatch.
std::vector<float> read_f32_blob(const std::filesystem::path& path, std::size_t expected_count);
std::vector<std::uint8_t> read_u8_blob(const std::filesystem::path& path, std::size_t expected_count);

std::uint32_t crc32_of(const void* data, std::size_t bytes);
std::uint32_t crc32_of_file(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace driftadapt
