#include "driftadapt/config.hpp"

#include <iomanip>
#include <sstream>

#include "driftadapt/binio.hpp"
#include "driftadapt/errors.hpp"

namespace driftadapt {

using nlohmann::json;

namespace {

json default_json() {
    return json{
        {"seed", 7},
        {"simulation",
         {{"motion",
           {{"duration", 40.96},
            {"dt", 0.01},
            {"dominant_freq_hz", 2.5},
            {"bandwidth_zeta", 0.6}}},
          {"campaign",
           {{"n_motions", 60},
            {"target_pga", {2.0, 4.0, 6.0, 7.5, 9.0, 10.5, 12.0, 13.5, 15.0, 17.0}}}},
          {"source_building",
           {{"n_stories", 3},
            {"story_mass", 2.5e5},
            {"story_height", 4.2672},
            {"fundamental_period", 0.45},
            {"yield_drift_ratio", 0.005},
            {"post_yield_ratio", 0.05},
            {"damping_ratio", 0.05}}},
          {"target_building",
           {{"n_stories", 5},
            {"story_mass", 2.5e5},
            {"story_height", 4.2672},
            {"fundamental_period", 0.7},
            {"yield_drift_ratio", 0.0075},
            {"post_yield_ratio", 0.05},
            {"damping_ratio", 0.07}}}}},
        {"dataset",
         {{"length", 2048}, {"rate", 50.0}, {"val_fraction", 0.15}, {"test_fraction", 0.15}}},
        {"weights", {{"sigma_mode", "fixed"}, {"sigma", 0.5402}}},
        {"network",
         {{"conv_blocks",
           {{{"kernel", 7}, {"channels", 16}, {"pool", 4}},
            {{"kernel", 5}, {"channels", 32}, {"pool", 4}},
            {{"kernel", 3}, {"channels", 64}, {"pool", 4}}}},
          {"recurrent_hidden", 64},
          {"classifier_hidden", 64},
          {"discriminator_hidden", 64}}},
        {"training",
         {{"learning_rate", 1e-3},
          {"batch_size", 32},
          {"epochs", 30},
          {"clip_norm", 5.0},
          {"lambda_mode", "ramp"},
          {"lambda_constant", 0.0},
          {"patience", 5}}}};
}

std::string type_name(const json& j) {
    if (j.is_number_integer() || j.is_number_unsigned() || j.is_number_float()) return "number";
    return j.type_name();
}

}  // namespace

void validate_against_schema(const json& schema, const json& value, const std::string& path) {
    if (schema.is_object()) {
        if (!value.is_object()) {
            throw SchemaError("config field '" + path + "' must be an object, got " + type_name(value));
        }
        for (const auto& [key, sub] : value.items()) {
            const std::string sub_path = path.empty() ? key : path + "." + key;
            if (!schema.contains(key)) {
                throw SchemaError("unknown config field '" + sub_path + "'");
            }
            validate_against_schema(schema.at(key), sub, sub_path);
        }
        return;
    }
    if (schema.is_array()) {
        if (!value.is_array()) {
            throw SchemaError("config field '" + path + "' must be an array, got " + type_name(value));
        }
        if (!schema.empty()) {
            for (std::size_t i = 0; i < value.size(); ++i) {
                validate_against_schema(schema.at(0), value.at(i), path + "[" + std::to_string(i) + "]");
            }
        }
        return;
    }
    if (type_name(schema) != type_name(value)) {
        throw SchemaError("config field '" + path + "' must be a " + type_name(schema) + ", got " +
                          type_name(value));
    }
}

namespace {

void deep_merge(json& base, const json& overlay) {
    if (!overlay.is_object() || !base.is_object()) {
        base = overlay;
        return;
    }
    for (const auto& [key, sub] : overlay.items()) {
        if (base.contains(key) && base.at(key).is_object() && sub.is_object()) {
            deep_merge(base.at(key), sub);
        } else {
            base[key] = sub;
        }
    }
}

}  // namespace

void apply_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) {
        throw SchemaError("override '" + assignment + "' must look like dot.path=value");
    }
    const std::string dotted = assignment.substr(0, eq);
    const std::string value_text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(value_text);
    } catch (const json::parse_error&) {
        value = value_text;  // bare string
    }

    json* node = &config;
    std::istringstream parts(dotted);
    std::string key;
    std::vector<std::string> keys;
    while (std::getline(parts, key, '.')) keys.push_back(key);
    if (keys.empty()) throw SchemaError("override '" + assignment + "' has an empty path");
    for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
        if (!node->contains(keys[i])) {
            throw SchemaError("unknown config field '" + dotted + "'");
        }
        node = &node->at(keys[i]);
    }
    if (!node->is_object() || !node->contains(keys.back())) {
        throw SchemaError("unknown config field '" + dotted + "'");
    }
    (*node)[keys.back()] = value;
}

PipelineConfig PipelineConfig::defaults() { return PipelineConfig(default_json()); }

PipelineConfig PipelineConfig::load(const std::optional<std::filesystem::path>& file,
                                    const std::vector<std::string>& overrides,
                                    std::optional<std::uint64_t> seed_override) {
    json merged = default_json();
    if (file) {
        json user;
        try {
            user = json::parse(read_text_file(*file));
        } catch (const json::parse_error& e) {
            throw SchemaError("config file " + file->string() + " is not valid JSON: " + e.what());
        }
        validate_against_schema(default_json(), user, "");
        deep_merge(merged, user);
    }
    for (const auto& o : overrides) apply_override(merged, o);
    if (seed_override) merged["seed"] = *seed_override;
    validate_against_schema(default_json(), merged, "");
    PipelineConfig cfg(merged);
    // Construction-level sanity: surface bad values now, not mid-stage.
    cfg.campaign();
    cfg.source_building();
    cfg.target_building();
    cfg.dataset_config();
    cfg.sigma_mode();
    cfg.network_config();
    cfg.train_config();
    return cfg;
}

std::uint64_t PipelineConfig::seed() const { return raw_.at("seed").get<std::uint64_t>(); }

std::string PipelineConfig::hash() const {
    const std::string canonical = raw_.dump();
    const auto crc = crc32_of(canonical.data(), canonical.size());
    std::ostringstream ss;
    ss << std::hex << std::setw(8) << std::setfill('0') << crc;
    return ss.str();
}

MotionCampaignConfig PipelineConfig::campaign() const {
    const auto& sim = raw_.at("simulation");
    MotionCampaignConfig c;
    c.n_motions = sim.at("campaign").at("n_motions").get<std::size_t>();
    c.target_pga = sim.at("campaign").at("target_pga").get<std::vector<double>>();
    c.duration = sim.at("motion").at("duration").get<double>();
    c.dt = sim.at("motion").at("dt").get<double>();
    c.spectral.dominant_freq_hz = sim.at("motion").at("dominant_freq_hz").get<double>();
    c.spectral.bandwidth_zeta = sim.at("motion").at("bandwidth_zeta").get<double>();
    if (c.n_motions == 0) throw SchemaError("simulation.campaign.n_motions must be >= 1");
    if (c.target_pga.empty()) throw SchemaError("simulation.campaign.target_pga must not be empty");
    for (double g : c.target_pga) {
        if (!(g > 0.0)) throw SchemaError("simulation.campaign.target_pga entries must be > 0");
    }
    return c;
}

namespace {

// Stiffness profile chosen so the fundamental mode shape is linear in
// height: every story sees the same first-mode drift, and the requested
// fundamental period is met exactly. k_i = w^2 m (n(n+1)/2 - i(i-1)/2).
BuildingSpec building_from_config(const json& b, const std::string& id) {
    const auto height = b.at("story_height").get<double>();
    const auto n = b.at("n_stories").get<std::size_t>();
    const auto mass = b.at("story_mass").get<double>();
    const auto period = b.at("fundamental_period").get<double>();
    if (!(period > 0.0)) throw SchemaError("fundamental_period must be > 0");
    const double omega = 2.0 * 3.14159265358979323846 / period;
    auto spec = make_uniform_building(id, n, mass, height, omega * omega * mass, height,
                                      b.at("post_yield_ratio").get<double>(),
                                      b.at("damping_ratio").get<double>());
    const auto dn = static_cast<double>(n);
    for (std::size_t i = 1; i <= n; ++i) {
        const auto di = static_cast<double>(i);
        spec.stiffness[i - 1] =
            omega * omega * mass * (dn * (dn + 1.0) / 2.0 - di * (di - 1.0) / 2.0);
    }
    const double yield_ratio = b.at("yield_drift_ratio").get<double>();
    for (std::size_t i = 0; i < n; ++i) spec.yield_disp[i] = yield_ratio * height;
    const auto freqs = modal_frequencies_hz(spec);
    spec.damping_anchor_hz_low = freqs.front();
    spec.damping_anchor_hz_high = freqs.size() >= 3 ? freqs[2] : 3.0 * freqs.front();
    spec.validate();
    return spec;
}

}  // namespace

BuildingSpec PipelineConfig::source_building() const {
    return building_from_config(raw_.at("simulation").at("source_building"), "source_building");
}

BuildingSpec PipelineConfig::target_building() const {
    return building_from_config(raw_.at("simulation").at("target_building"), "target_building");
}

DatasetConfig PipelineConfig::dataset_config() const {
    const auto& d = raw_.at("dataset");
    DatasetConfig c;
    c.length = d.at("length").get<std::size_t>();
    c.rate = d.at("rate").get<double>();
    c.val_fraction = d.at("val_fraction").get<double>();
    c.test_fraction = d.at("test_fraction").get<double>();
    c.seed = seed();
    c.config_hash = hash();
    if (c.length < 8) throw SchemaError("dataset.length must be >= 8");
    if (!(c.rate > 0.0)) throw SchemaError("dataset.rate must be > 0");
    if (c.val_fraction < 0.0 || c.test_fraction < 0.0 || c.val_fraction + c.test_fraction >= 1.0) {
        throw SchemaError("dataset val/test fractions must be >= 0 and sum below 1");
    }
    return c;
}

SigmaMode PipelineConfig::sigma_mode() const {
    try {
        return sigma_mode_from_string(raw_.at("weights").at("sigma_mode").get<std::string>());
    } catch (const std::invalid_argument& e) {
        throw SchemaError(std::string("weights.sigma_mode: ") + e.what());
    }
}

double PipelineConfig::sigma_fixed() const { return raw_.at("weights").at("sigma").get<double>(); }

NetworkConfig PipelineConfig::network_config() const {
    const auto& n = raw_.at("network");
    NetworkConfig c;
    c.input_length = static_cast<int>(raw_.at("dataset").at("length").get<std::size_t>());
    c.input_channels = 4;
    c.conv_blocks.clear();
    for (const auto& b : n.at("conv_blocks")) {
        c.conv_blocks.push_back(
            {b.at("kernel").get<int>(), b.at("channels").get<int>(), b.at("pool").get<int>()});
    }
    c.recurrent_hidden = n.at("recurrent_hidden").get<int>();
    c.classifier_hidden = n.at("classifier_hidden").get<int>();
    c.discriminator_hidden = n.at("discriminator_hidden").get<int>();
    c.n_classes = 3;
    c.n_sources = 3;
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw SchemaError(std::string("network: ") + e.what());
    }
    return c;
}

TrainConfig PipelineConfig::train_config() const {
    const auto& t = raw_.at("training");
    TrainConfig c;
    c.learning_rate = t.at("learning_rate").get<double>();
    c.batch_size = t.at("batch_size").get<int>();
    c.epochs = t.at("epochs").get<int>();
    c.seed = seed();
    c.clip_norm = t.at("clip_norm").get<double>();
    const auto mode = t.at("lambda_mode").get<std::string>();
    if (mode == "ramp") {
        c.lambda_mode = LambdaMode::Ramp;
    } else if (mode == "constant") {
        c.lambda_mode = LambdaMode::Constant;
    } else {
        throw SchemaError("training.lambda_mode must be 'ramp' or 'constant'");
    }
    c.lambda_constant = t.at("lambda_constant").get<double>();
    c.early_stop_patience = t.at("patience").get<int>();
    try {
        c.validate();
    } catch (const std::invalid_argument& e) {
        throw SchemaError(std::string("training: ") + e.what());
    }
    return c;
}

}  // namespace driftadapt
