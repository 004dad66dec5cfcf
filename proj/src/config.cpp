#include "megphone/config.hpp"

#include "megphone/error.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace megphone {

namespace {

template <class T>
T get(const nlohmann::json& j, const char* key, const char* context) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string(context) + ": bad value for '" + key + "': " + e.what());
    }
}

void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const char* context) {
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError(std::string(context) + ": unknown field '" + it.key() + "'");
}

ChannelKindSet parse_sensors(const nlohmann::json& j) {
    if (j.is_string()) {
        const auto text = j.get<std::string>();
        if (text == "both") return {ChannelKind::gradiometer, ChannelKind::magnetometer};
        try {
            return {parse_channel_kind(text)};
        } catch (const std::exception&) {
            throw ConfigError("preprocessing: unknown sensor_kind '" + text + "'");
        }
    }
    if (j.is_array()) {
        ChannelKindSet kinds;
        for (const auto& item : j) {
            try {
                kinds.insert(parse_channel_kind(item.get<std::string>()));
            } catch (const std::exception&) {
                throw ConfigError("preprocessing: bad sensor_kind entry " + item.dump());
            }
        }
        if (kinds.empty()) throw ConfigError("preprocessing: sensor_kind list is empty");
        return kinds;
    }
    throw ConfigError("preprocessing: sensor_kind must be a string or a list");
}

Preprocessing parse_preprocessing(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("preprocessing must be an object");
    check_keys(j, {"sensor_kind", "wavelet", "decimation_factor", "band_limit"}, "preprocessing");
    Preprocessing p;
    if (j.contains("sensor_kind")) p.sensor_kinds = parse_sensors(j.at("sensor_kind"));
    if (j.contains("wavelet")) p.wavelet = get<bool>(j, "wavelet", "preprocessing");
    if (j.contains("decimation_factor")) p.decimation_factor = get<int>(j, "decimation_factor", "preprocessing");
    if (j.contains("band_limit")) {
        const auto& b = j.at("band_limit");
        if (b.is_null()) {
            p.band_limit.reset();
        } else if (b.is_array() && b.size() == 2 && b[0].is_number() && b[1].is_number()) {
            p.band_limit = std::make_pair(b[0].get<double>(), b[1].get<double>());
        } else {
            throw ConfigError("preprocessing: band_limit must be [lo, hi] or null");
        }
    }
    return p;
}

}  // namespace

std::string describe_sensors(const ChannelKindSet& kinds) {
    if (kinds == ChannelKindSet{ChannelKind::gradiometer, ChannelKind::magnetometer}) return "both";
    std::string out;
    for (auto kind : kinds) {
        if (!out.empty()) out += "+";
        out += to_string(kind);
    }
    return out;
}

void validate(const ExperimentConfig& c) {
    if (c.manifests.empty()) throw ConfigError("config: at least one manifest is required");
    if (c.models.empty()) throw ConfigError("config: at least one model is required");
    for (const auto& m : c.models) validate(m);
    std::set<std::string> names;
    for (const auto& m : c.models)
        if (!names.insert(m.name).second) throw ConfigError("config: duplicate model name '" + m.name + "'");
    if (c.preprocessing.decimation_factor < 1) throw ConfigError("config: decimation_factor must be >= 1");
    if (c.preprocessing.sensor_kinds.empty()) throw ConfigError("config: no sensor kinds selected");
    if (c.preprocessing.band_limit) {
        const auto [lo, hi] = *c.preprocessing.band_limit;
        if (!(lo > 0.0 && lo < hi)) throw ConfigError("config: band_limit needs 0 < lo < hi");
    }
    if (!(c.tmin < c.tmax)) throw ConfigError("config: epochs.tmin must be smaller than epochs.tmax");
    if (c.cv_k < 2) throw ConfigError("config: cv.k must be >= 2");
    if (c.pairing != "example" && c.pairing != "fold") throw ConfigError("config: pairing must be 'example' or 'fold'");
    if (!(c.significance > 0.0 && c.significance < 1.0)) throw ConfigError("config: significance must lie in (0, 1)");
    if (c.phone_pairs) {
        for (const auto& [a, b] : *c.phone_pairs)
            if (a.empty() || b.empty() || a == b) throw ConfigError("config: invalid phone pair '" + a + "'-'" + b + "'");
    }
}

ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    check_keys(j,
               {"manifests", "phone_pairs", "min_count", "models", "preprocessing", "epochs", "cv", "seed", "pairing",
                "significance", "ablation_rows", "output_dir"},
               "config");
    ExperimentConfig c;
    if (!j.contains("manifests") || !j.at("manifests").is_array())
        throw ConfigError("config: 'manifests' must be a list of paths");
    for (const auto& m : j.at("manifests")) {
        if (!m.is_string()) throw ConfigError("config: manifest entries must be strings");
        std::filesystem::path p = m.get<std::string>();
        if (p.is_relative()) p = base_dir / p;
        c.manifests.push_back(std::filesystem::absolute(p).lexically_normal());
    }
    if (j.contains("phone_pairs")) {
        const auto& pp = j.at("phone_pairs");
        if (pp.is_string()) {
            if (pp.get<std::string>() != "auto") throw ConfigError("config: phone_pairs must be 'auto' or a list");
        } else if (pp.is_array()) {
            std::vector<std::pair<std::string, std::string>> pairs;
            for (const auto& item : pp) {
                if (!item.is_array() || item.size() != 2 || !item[0].is_string() || !item[1].is_string())
                    throw ConfigError("config: phone pair entries must be [phoneA, phoneB]");
                auto a = item[0].get<std::string>(), b = item[1].get<std::string>();
                if (b < a) std::swap(a, b);
                pairs.emplace_back(a, b);
            }
            c.phone_pairs = std::move(pairs);
        } else {
            throw ConfigError("config: phone_pairs must be 'auto' or a list");
        }
    }
    if (j.contains("min_count")) c.min_count = get<std::size_t>(j, "min_count", "config");
    if (j.contains("models")) {
        if (!j.at("models").is_array()) throw ConfigError("config: 'models' must be a list");
        for (const auto& m : j.at("models")) c.models.push_back(model_spec_from_json(m));
    } else {
        c.models.push_back(ModelSpec::preset("elastic_net"));
    }
    if (j.contains("preprocessing")) c.preprocessing = parse_preprocessing(j.at("preprocessing"));
    if (j.contains("epochs")) {
        const auto& e = j.at("epochs");
        check_keys(e, {"tmin", "tmax"}, "epochs");
        if (e.contains("tmin")) c.tmin = get<double>(e, "tmin", "epochs");
        if (e.contains("tmax")) c.tmax = get<double>(e, "tmax", "epochs");
    }
    if (j.contains("seed")) c.seed = get<std::uint64_t>(j, "seed", "config");
    c.cv_seed = c.seed;
    if (j.contains("cv")) {
        const auto& cv = j.at("cv");
        check_keys(cv, {"k", "seed"}, "cv");
        if (cv.contains("k")) c.cv_k = get<int>(cv, "k", "cv");
        if (cv.contains("seed")) c.cv_seed = get<std::uint64_t>(cv, "seed", "cv");
    }
    if (j.contains("pairing")) c.pairing = get<std::string>(j, "pairing", "config");
    if (j.contains("significance")) c.significance = get<double>(j, "significance", "config");
    if (j.contains("ablation_rows")) c.ablation_rows = get<std::vector<std::string>>(j, "ablation_rows", "config");
    if (j.contains("output_dir")) {
        std::filesystem::path out = get<std::string>(j, "output_dir", "config");
        c.output_dir = out.is_relative() ? base_dir / out : out;
    }
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j, std::filesystem::absolute(path).parent_path());
}

nlohmann::json to_json(const Preprocessing& p) {
    nlohmann::json sensors = nlohmann::json::array();
    for (auto kind : p.sensor_kinds) sensors.push_back(std::string(to_string(kind)));
    return {{"sensor_kind", sensors},
            {"wavelet", p.wavelet},
            {"decimation_factor", p.decimation_factor},
            {"band_limit", p.band_limit ? nlohmann::json::array({p.band_limit->first, p.band_limit->second})
                                        : nlohmann::json(nullptr)}};
}

nlohmann::json to_json(const ExperimentConfig& c) {
    nlohmann::json j;
    j["manifests"] = nlohmann::json::array();
    for (const auto& m : c.manifests) j["manifests"].push_back(m.string());
    if (c.phone_pairs) {
        j["phone_pairs"] = nlohmann::json::array();
        for (const auto& [a, b] : *c.phone_pairs) j["phone_pairs"].push_back({a, b});
    } else {
        j["phone_pairs"] = "auto";
    }
    j["min_count"] = c.min_count;
    j["models"] = nlohmann::json::array();
    for (const auto& m : c.models) j["models"].push_back(to_json(m));
    j["preprocessing"] = to_json(c.preprocessing);
    j["epochs"] = {{"tmin", c.tmin}, {"tmax", c.tmax}};
    j["cv"] = {{"k", c.cv_k}, {"seed", c.cv_seed}};
    j["seed"] = c.seed;
    j["pairing"] = c.pairing;
    j["significance"] = c.significance;
    j["ablation_rows"] = c.ablation_rows;
    return j;
}

}  // namespace megphone
