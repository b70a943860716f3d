#include "driftadapt/archive.hpp"

#include <nlohmann/json.hpp>

#include "driftadapt/binio.hpp"
#include "driftadapt/errors.hpp"

namespace driftadapt {

using nlohmann::json;

namespace {

constexpr int kArchiveVersion = 1;

json building_to_json(const BuildingSpec& b) {
    return json{{"id", b.id},
                {"n_stories", b.n_stories},
                {"mass", b.mass},
                {"height", b.height},
                {"stiffness", b.stiffness},
                {"yield_disp", b.yield_disp},
                {"post_yield_ratio", b.post_yield_ratio},
                {"damping_ratio", b.damping_ratio},
                {"damping_anchor_hz_low", b.damping_anchor_hz_low},
                {"damping_anchor_hz_high", b.damping_anchor_hz_high}};
}

BuildingSpec building_from_json(const json& j) {
    BuildingSpec b;
    b.id = j.at("id").get<std::string>();
    b.n_stories = j.at("n_stories").get<std::size_t>();
    b.mass = j.at("mass").get<std::vector<double>>();
    b.height = j.at("height").get<std::vector<double>>();
    b.stiffness = j.at("stiffness").get<std::vector<double>>();
    b.yield_disp = j.at("yield_disp").get<std::vector<double>>();
    b.post_yield_ratio = j.at("post_yield_ratio").get<double>();
    b.damping_ratio = j.at("damping_ratio").get<double>();
    b.damping_anchor_hz_low = j.at("damping_anchor_hz_low").get<double>();
    b.damping_anchor_hz_high = j.at("damping_anchor_hz_high").get<double>();
    return b;
}

std::vector<float> flatten_record(const ResponseRecord& r) {
    std::vector<float> flat;
    flat.reserve(2 * (2 * r.n_stories + 1) * r.n_steps);
    for (int ax = 0; ax < 2; ++ax) {
        for (const auto& series : r.abs_accel[ax]) {
            for (double v : series) flat.push_back(static_cast<float>(v));
        }
    }
    for (int ax = 0; ax < 2; ++ax) {
        for (const auto& series : r.drift[ax]) {
            for (double v : series) flat.push_back(static_cast<float>(v));
        }
    }
    return flat;
}

}  // namespace

std::string record_blob_name(const std::string& record_id) { return "records/" + record_id + ".bin"; }

ResponseArchiveWriter::ResponseArchiveWriter(std::filesystem::path dir, const BuildingSpec& building,
                                             std::string config_hash)
    : dir_(std::move(dir)), building_(building), config_hash_(std::move(config_hash)) {
    building_.validate();
    std::filesystem::create_directories(dir_ / "records");
}

void ResponseArchiveWriter::add(const ResponseRecord& record) {
    if (finalized_) throw IoError("archive already finalized: " + dir_.string());
    if (record.n_stories != building_.n_stories) {
        throw std::invalid_argument("record story count does not match archive building");
    }
    if (dt_ == 0.0) {
        dt_ = record.dt;
    } else if (dt_ != record.dt) {
        throw std::invalid_argument("all records in an archive must share one dt");
    }
    const std::string record_id = record.motion_id;
    const auto flat = flatten_record(record);
    const std::string blob = record_blob_name(record_id);
    write_f32_blob(dir_ / blob, flat);
    json entry{{"record_id", record_id},
               {"motion_id", record.motion_id},
               {"scale_factor", record.scale_factor},
               {"n_steps", record.n_steps},
               {"blob", blob},
               {"crc32", crc32_of(flat.data(), flat.size() * sizeof(float))}};
    record_entries_.push_back(entry.dump());
}

void ResponseArchiveWriter::finalize() {
    json records = json::array();
    for (const auto& e : record_entries_) records.push_back(json::parse(e));
    json manifest{{"format", "driftadapt-response-archive"},
                  {"version", kArchiveVersion},
                  {"config_hash", config_hash_},
                  {"dt", dt_},
                  {"building", building_to_json(building_)},
                  {"records", records}};
    write_text_file(dir_ / "manifest.json", manifest.dump(2) + "\n");
    finalized_ = true;
}

ResponseArchiveReader::ResponseArchiveReader(std::filesystem::path dir) : dir_(std::move(dir)) {
    json manifest;
    try {
        manifest = json::parse(read_text_file(dir_ / "manifest.json"));
    } catch (const json::parse_error& e) {
        throw CorruptDataset("unparseable archive manifest: " + std::string(e.what()));
    }
    try {
        if (manifest.at("format").get<std::string>() != "driftadapt-response-archive") {
            throw SchemaError("not a response archive: " + dir_.string());
        }
        building_ = building_from_json(manifest.at("building"));
        config_hash_ = manifest.at("config_hash").get<std::string>();
        for (const auto& e : manifest.at("records")) {
            ArchiveRecordInfo info;
            info.record_id = e.at("record_id").get<std::string>();
            info.motion_id = e.at("motion_id").get<std::string>();
            info.scale_factor = e.at("scale_factor").get<double>();
            info.n_steps = e.at("n_steps").get<std::size_t>();
            info.blob = e.at("blob").get<std::string>();
            info.crc32 = e.at("crc32").get<std::uint32_t>();
            records_.push_back(std::move(info));
        }
    } catch (const json::exception& e) {
        throw SchemaError("archive manifest missing field: " + std::string(e.what()));
    }
    building_.validate();
    dt_ = manifest.value("dt", 0.0);
}

ResponseRecord ResponseArchiveReader::load(std::size_t i) const {
    const auto& info = records_.at(i);
    const std::size_t n = building_.n_stories;
    const std::size_t count = 2 * (2 * n + 1) * info.n_steps;
    const auto flat = read_f32_blob(dir_ / info.blob, count);
    const auto crc = crc32_of(flat.data(), flat.size() * sizeof(float));
    if (crc != info.crc32) {
        throw CorruptDataset("checksum mismatch for blob " + info.blob);
    }
    ResponseRecord r;
    r.building_id = building_.id;
    r.motion_id = info.motion_id;
    r.dt = dt_;
    r.n_steps = info.n_steps;
    r.n_stories = n;
    r.scale_factor = info.scale_factor;
    std::size_t pos = 0;
    for (int ax = 0; ax < 2; ++ax) {
        r.abs_accel[ax].assign(n + 1, std::vector<double>(info.n_steps));
        for (std::size_t lvl = 0; lvl <= n; ++lvl) {
            for (std::size_t t = 0; t < info.n_steps; ++t) {
                r.abs_accel[ax][lvl][t] = static_cast<double>(flat[pos++]);
            }
        }
    }
    for (int ax = 0; ax < 2; ++ax) {
        r.drift[ax].assign(n, std::vector<double>(info.n_steps));
        for (std::size_t s = 0; s < n; ++s) {
            for (std::size_t t = 0; t < info.n_steps; ++t) {
                r.drift[ax][s][t] = static_cast<double>(flat[pos++]);
            }
        }
    }
    return r;
}

}  // namespace driftadapt
