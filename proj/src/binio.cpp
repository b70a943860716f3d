#include "driftadapt/binio.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "driftadapt/errors.hpp"

namespace driftadapt {

namespace {

void require_little_endian() {
    static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
    if constexpr (std::endian::native != std::endian::little) {
        throw IoError("blob format is little-endian; big-endian hosts are unsupported");
    }
}

template <typename T>
void write_blob(const std::filesystem::path& path, const std::vector<T>& data) {
    require_little_endian();
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(data.data()),
              static_cast<std::streamsize>(data.size() * sizeof(T)));
    if (!out) throw IoError("write failed: " + path.string());
}

template <typename T>
std::vector<T> read_blob(const std::filesystem::path& path, std::size_t expected_count) {
    require_little_endian();
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes != expected_count * sizeof(T)) {
        std::ostringstream msg;
        msg << "blob " << path.string() << " holds " << bytes << " bytes, expected "
            << expected_count * sizeof(T);
        throw CorruptDataset(msg.str());
    }
    std::vector<T> data(expected_count);
    in.seekg(0);
    in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw IoError("read failed: " + path.string());
    return data;
}

}  // namespace

void write_f32_blob(const std::filesystem::path& path, const std::vector<float>& data) {
    write_blob(path, data);
}

void write_u8_blob(const std::filesystem::path& path, const std::vector<std::uint8_t>& data) {
    write_blob(path, data);
}

std::vector<float> read_f32_blob(const std::filesystem::path& path, std::size_t expected_count) {
    return read_blob<float>(path, expected_count);
}

std::vector<std::uint8_t> read_u8_blob(const std::filesystem::path& path, std::size_t expected_count) {
    return read_blob<std::uint8_t>(path, expected_count);
}

std::uint32_t crc32_of(const void* data, std::size_t bytes) {
    auto crc = ::crc32(0L, Z_NULL, 0);
    crc = ::crc32(crc, static_cast<const Bytef*>(data), static_cast<uInt>(bytes));
    return static_cast<std::uint32_t>(crc);
}

std::uint32_t crc32_of_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    auto crc = ::crc32(0L, Z_NULL, 0);
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        crc = ::crc32(crc, reinterpret_cast<const Bytef*>(buf), static_cast<uInt>(in.gcount()));
        if (in.eof()) break;
    }
    return static_cast<std::uint32_t>(crc);
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open for reading: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << content;
    if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace driftadapt
