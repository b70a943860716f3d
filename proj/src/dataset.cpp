#include "driftadapt/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "driftadapt/binio.hpp"
#include "driftadapt/errors.hpp"
#include "driftadapt/features.hpp"
#include "driftadapt/labels.hpp"
#include "driftadapt/rng.hpp"

namespace driftadapt {

using nlohmann::json;

namespace {

constexpr int kDatasetVersion = 1;

void assign_splits(std::vector<FeatureSample>& samples, double val_frac, double test_frac,
                   std::uint64_t seed) {
    const std::size_t n = samples.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    const auto n_val = static_cast<std::size_t>(std::floor(val_frac * static_cast<double>(n)));
    const auto n_test = static_cast<std::size_t>(std::floor(test_frac * static_cast<double>(n)));
    const std::size_t n_train = n - n_val - n_test;
    for (std::size_t i = 0; i < n; ++i) {
        Split s = Split::Train;
        if (i >= n_train + n_val) {
            s = Split::Test;
        } else if (i >= n_train) {
            s = Split::Val;
        }
        samples[order[i]].split = s;
    }
}

DomainDataset extract_domain(const ResponseArchiveReader& archive, std::size_t story,
                             const std::string& domain_id, bool is_source,
                             const DatasetConfig& cfg, std::vector<std::uint8_t>* labels_out) {
    DomainDataset d;
    d.domain_id = domain_id;
    d.is_source = is_source;
    d.story = story;
    d.physics = static_cast<double>(story) / static_cast<double>(archive.building().n_stories);
    d.length = cfg.length;
    d.rate = cfg.rate;
    d.samples.reserve(archive.size());
    const double story_height = archive.building().height.at(story - 1);
    for (std::size_t i = 0; i < archive.size(); ++i) {
        const ResponseRecord rec = archive.load(i);
        const auto feat = extract_features(rec, story, cfg.length, cfg.rate);
        FeatureSample s;
        s.x.reserve(feat.size());
        for (double v : feat) s.x.push_back(static_cast<float>(v));  // storage precision
        s.record_id = rec.motion_id;
        const int cls = classify_drift(peak_drift_ratio(rec, story, story_height).drift_ratio);
        if (is_source) {
            s.label = cls;
        } else if (labels_out != nullptr) {
            labels_out->push_back(static_cast<std::uint8_t>(cls));
        }
        d.samples.push_back(std::move(s));
    }
    return d;
}

ChannelStats pooled_train_stats(const std::vector<DomainDataset>& sources) {
    std::array<double, 4> sum{}, sum_sq{};
    std::size_t count = 0;
    for (const auto& d : sources) {
        for (const auto& s : d.samples) {
            if (s.split != Split::Train) continue;
            for (std::size_t t = 0; t < d.length; ++t) {
                for (std::size_t c = 0; c < 4; ++c) {
                    const auto v = static_cast<double>(s.x[t * 4 + c]);
                    sum[c] += v;
                    sum_sq[c] += v * v;
                }
            }
            ++count;
        }
    }
    if (count == 0) throw CalibrationError("no training samples to compute channel statistics from");
    ChannelStats stats;
    const auto n = static_cast<double>(count) * static_cast<double>(sources.front().length);
    for (std::size_t c = 0; c < 4; ++c) {
        stats.mean[c] = sum[c] / n;
        const double var = std::max(0.0, sum_sq[c] / n - stats.mean[c] * stats.mean[c]);
        stats.stddev[c] = std::sqrt(var);
        if (!(stats.stddev[c] > 0.0)) {
            throw CalibrationError("channel " + std::to_string(c) + " has zero variance");
        }
    }
    return stats;
}

void standardize(DomainDataset& d, const ChannelStats& stats) {
    d.stats = stats;
    for (auto& s : d.samples) {
        for (std::size_t t = 0; t < d.length; ++t) {
            for (std::size_t c = 0; c < 4; ++c) {
                const auto v = static_cast<double>(s.x[t * 4 + c]);
                s.x[t * 4 + c] = static_cast<float>((v - stats.mean[c]) / stats.stddev[c]);
            }
        }
    }
}

void check_classes_nonempty(const std::array<std::size_t, 3>& counts, const std::string& where) {
    for (std::size_t k = 0; k < 3; ++k) {
        if (counts[k] == 0) {
            throw CalibrationError("damage class " + std::to_string(k + 1) + " is empty in " + where);
        }
    }
}

json domain_to_manifest(const DomainDataset& d, const std::string& features_blob,
                        std::uint32_t features_crc, const json& labels_entry) {
    json splits = json::array();
    json record_ids = json::array();
    for (const auto& s : d.samples) {
        splits.push_back(static_cast<int>(s.split));
        record_ids.push_back(s.record_id);
    }
    json j{{"domain_id", d.domain_id},
           {"kind", d.is_source ? "source" : "target"},
           {"physics", d.physics},
           {"story", d.story},
           {"n_samples", d.samples.size()},
           {"features_blob", features_blob},
           {"features_crc32", features_crc},
           {"splits", splits},
           {"record_ids", record_ids}};
    if (!labels_entry.is_null()) {
        j["labels_blob"] = labels_entry.at("blob");
        j["labels_crc32"] = labels_entry.at("crc32");
    }
    return j;
}

std::vector<float> flatten_features(const DomainDataset& d) {
    std::vector<float> flat;
    flat.reserve(d.samples.size() * d.length * 4);
    for (const auto& s : d.samples) flat.insert(flat.end(), s.x.begin(), s.x.end());
    return flat;
}

}  // namespace

std::size_t DomainDataset::count_in_split(Split s) const {
    return static_cast<std::size_t>(
        std::count_if(samples.begin(), samples.end(), [s](const FeatureSample& f) { return f.split == s; }));
}

BuiltDomains build_domains(const ResponseArchiveReader& source_archive,
                           const ResponseArchiveReader& target_archive, const DatasetConfig& config) {
    if (source_archive.building().n_stories != 3) {
        throw SchemaError("source archive must hold a three-story building; got " +
                          std::to_string(source_archive.building().n_stories) + " stories");
    }
    if (target_archive.building().n_stories < 1) {
        throw SchemaError("target archive holds no stories");
    }
    if (source_archive.size() == 0 || target_archive.size() == 0) {
        throw SchemaError("archives must contain at least one record each");
    }

    BuiltDomains built;
    auto& bundle = built.bundle;
    bundle.seed = config.seed;
    bundle.config_hash = config.config_hash;

    for (std::size_t story = 1; story <= 3; ++story) {
        bundle.sources.push_back(extract_domain(source_archive, story,
                                                "source_story" + std::to_string(story), true, config,
                                                nullptr));
    }
    bundle.target =
        extract_domain(target_archive, 1, "target_story1", false, config, &built.target_eval_labels);

    for (std::size_t i = 0; i < bundle.sources.size(); ++i) {
        assign_splits(bundle.sources[i].samples, config.val_fraction, config.test_fraction,
                      derive_seed(config.seed, "split", i));
    }
    // Target samples carry no split: the whole domain is used unlabeled.

    std::array<std::size_t, 3> source_counts{};
    for (const auto& d : bundle.sources) {
        for (const auto& s : d.samples) source_counts[static_cast<std::size_t>(s.label - 1)]++;
    }
    check_classes_nonempty(source_counts, "the source building");
    std::array<std::size_t, 3> target_counts{};
    for (auto l : built.target_eval_labels) target_counts[static_cast<std::size_t>(l - 1)]++;
    check_classes_nonempty(target_counts, "the target building");

    bundle.stats = pooled_train_stats(bundle.sources);
    for (auto& d : bundle.sources) standardize(d, bundle.stats);
    standardize(bundle.target, bundle.stats);
    return built;
}

std::array<double, 3> class_distribution(const DomainDataset& dataset) {
    bool has_labels = !dataset.samples.empty();
    for (const auto& s : dataset.samples) {
        if (s.label < 1 || s.label > 3) has_labels = false;
    }
    if (!has_labels) throw std::invalid_argument("class_distribution needs a labeled dataset");
    std::array<double, 3> dist{};
    for (const auto& s : dataset.samples) dist[static_cast<std::size_t>(s.label - 1)] += 1.0;
    const auto n = static_cast<double>(dataset.samples.size());
    for (auto& d : dist) d /= n;
    return dist;
}

void save_dataset(const DatasetBundle& bundle, const std::vector<std::uint8_t>& target_eval_labels,
                  const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    json domains = json::array();

    auto write_domain = [&](const DomainDataset& d) {
        const std::string features_blob = d.domain_id + ".features.bin";
        const auto flat = flatten_features(d);
        write_f32_blob(dir / features_blob, flat);
        const auto crc = crc32_of(flat.data(), flat.size() * sizeof(float));
        json labels_entry;
        if (d.is_source) {
            std::vector<std::uint8_t> labels;
            labels.reserve(d.samples.size());
            for (const auto& s : d.samples) labels.push_back(static_cast<std::uint8_t>(s.label));
            const std::string labels_blob = d.domain_id + ".labels.bin";
            write_u8_blob(dir / labels_blob, labels);
            labels_entry = json{{"blob", labels_blob},
                                {"crc32", crc32_of(labels.data(), labels.size())}};
        }
        domains.push_back(domain_to_manifest(d, features_blob, crc, labels_entry));
    };

    for (const auto& d : bundle.sources) write_domain(d);
    write_domain(bundle.target);

    if (target_eval_labels.size() != bundle.target.samples.size()) {
        throw std::invalid_argument("eval label count does not match target sample count");
    }
    const std::string eval_blob = bundle.target.domain_id + ".eval_labels.bin";
    write_u8_blob(dir / eval_blob, target_eval_labels);

    json manifest{{"format", "driftadapt-dataset"},
                  {"version", kDatasetVersion},
                  {"config_hash", bundle.config_hash},
                  {"seed", bundle.seed},
                  {"length", bundle.sources.empty() ? bundle.target.length : bundle.sources.front().length},
                  {"rate", bundle.sources.empty() ? bundle.target.rate : bundle.sources.front().rate},
                  {"channel_stats", {{"mean", bundle.stats.mean}, {"std", bundle.stats.stddev}}},
                  {"eval_labels",
                   {{"blob", eval_blob},
                    {"crc32", crc32_of(target_eval_labels.data(), target_eval_labels.size())}}},
                  {"domains", domains}};
    write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

namespace {

json load_manifest(const std::filesystem::path& dir) {
    json manifest;
    try {
        manifest = json::parse(read_text_file(dir / "manifest.json"));
    } catch (const json::parse_error& e) {
        throw CorruptDataset("unparseable dataset manifest: " + std::string(e.what()));
    }
    if (manifest.value("format", "") != "driftadapt-dataset") {
        throw SchemaError("not a dataset directory: " + dir.string());
    }
    return manifest;
}

DomainDataset load_domain(const std::filesystem::path& dir, const json& j, std::size_t length,
                          double rate, const ChannelStats& stats) {
    DomainDataset d;
    d.domain_id = j.at("domain_id").get<std::string>();
    d.is_source = j.at("kind").get<std::string>() == "source";
    d.physics = j.at("physics").get<double>();
    d.story = j.at("story").get<std::size_t>();
    d.length = length;
    d.rate = rate;
    d.stats = stats;
    const auto n = j.at("n_samples").get<std::size_t>();

    const auto flat = read_f32_blob(dir / j.at("features_blob").get<std::string>(), n * length * 4);
    if (crc32_of(flat.data(), flat.size() * sizeof(float)) != j.at("features_crc32").get<std::uint32_t>()) {
        throw CorruptDataset("feature blob checksum mismatch for domain " + d.domain_id);
    }
    std::vector<std::uint8_t> labels;
    if (d.is_source) {
        if (!j.contains("labels_blob")) {
            throw CorruptDataset("source domain " + d.domain_id + " lacks a labels blob");
        }
        labels = read_u8_blob(dir / j.at("labels_blob").get<std::string>(), n);
        if (crc32_of(labels.data(), labels.size()) != j.at("labels_crc32").get<std::uint32_t>()) {
            throw CorruptDataset("label blob checksum mismatch for domain " + d.domain_id);
        }
    }
    const auto splits = j.at("splits").get<std::vector<int>>();
    const auto record_ids = j.at("record_ids").get<std::vector<std::string>>();
    if (splits.size() != n || record_ids.size() != n) {
        throw CorruptDataset("split/record_id arrays inconsistent with n_samples in " + d.domain_id);
    }

    d.samples.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto& s = d.samples[i];
        s.x.assign(flat.begin() + static_cast<std::ptrdiff_t>(i * length * 4),
                   flat.begin() + static_cast<std::ptrdiff_t>((i + 1) * length * 4));
        s.record_id = record_ids[i];
        if (splits[i] < 0 || splits[i] > 2) throw CorruptDataset("invalid split tag in " + d.domain_id);
        s.split = static_cast<Split>(splits[i]);
        if (d.is_source) {
            if (labels[i] < 1 || labels[i] > 3) {
                throw CorruptDataset("label out of range in " + d.domain_id);
            }
            s.label = static_cast<int>(labels[i]);
        }
    }
    return d;
}

}  // namespace

DatasetBundle load_dataset(const std::filesystem::path& dir) {
    const json manifest = load_manifest(dir);
    DatasetBundle bundle;
    try {
        bundle.config_hash = manifest.at("config_hash").get<std::string>();
        bundle.seed = manifest.at("seed").get<std::uint64_t>();
        const auto length = manifest.at("length").get<std::size_t>();
        const auto rate = manifest.at("rate").get<double>();
        bundle.stats.mean = manifest.at("channel_stats").at("mean").get<std::array<double, 4>>();
        bundle.stats.stddev = manifest.at("channel_stats").at("std").get<std::array<double, 4>>();
        bool have_target = false;
        for (const auto& j : manifest.at("domains")) {
            auto d = load_domain(dir, j, length, rate, bundle.stats);
            if (d.is_source) {
                bundle.sources.push_back(std::move(d));
            } else {
                if (have_target) throw SchemaError("dataset holds more than one target domain");
                bundle.target = std::move(d);
                have_target = true;
            }
        }
        if (!have_target || bundle.sources.empty()) {
            throw SchemaError("dataset must hold source domains and one target domain");
        }
    } catch (const json::exception& e) {
        throw CorruptDataset("dataset manifest missing field: " + std::string(e.what()));
    }
    return bundle;
}

std::vector<std::uint8_t> load_eval_labels(const std::filesystem::path& dir) {
    const json manifest = load_manifest(dir);
    std::size_t n_target = 0;
    for (const auto& j : manifest.at("domains")) {
        if (j.at("kind").get<std::string>() == "target") n_target = j.at("n_samples").get<std::size_t>();
    }
    const auto& entry = manifest.at("eval_labels");
    auto labels = read_u8_blob(dir / entry.at("blob").get<std::string>(), n_target);
    if (crc32_of(labels.data(), labels.size()) != entry.at("crc32").get<std::uint32_t>()) {
        throw CorruptDataset("eval label blob checksum mismatch");
    }
    for (auto l : labels) {
        if (l < 1 || l > 3) throw CorruptDataset("eval label out of range");
    }
    return labels;
}

}  // namespace driftadapt
