#pragma once

#include "megphone/dataio.hpp"
#include "megphone/models/model_spec.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace megphone {

struct Preprocessing {
    ChannelKindSet sensor_kinds{ChannelKind::gradiometer};
    bool wavelet = true;
    int decimation_factor = 10;
    std::optional<std::pair<double, double>> band_limit = std::make_pair(0.2, 31.0);

    bool operator==(const Preprocessing&) const = default;
};

struct ExperimentConfig {
    std::vector<std::filesystem::path> manifests;  // resolved against the config file's directory
    std::optional<std::vector<std::pair<std::string, std::string>>> phone_pairs;  // none: all selected pairs
    std::size_t min_count = 50;
    std::vector<ModelSpec> models;
    Preprocessing preprocessing;
    double tmin = -0.1;
    double tmax = 0.2;
    int cv_k = 5;
    std::uint64_t cv_seed = 0;
    std::uint64_t seed = 0;  // pair-dataset balancing
    std::string pairing = "example";  // Wilcoxon pairing for model comparisons: example or fold
    double significance = 0.01;
    std::vector<std::string> ablation_rows;  // empty: all rows
    std::filesystem::path output_dir;
};

// Parses and validates. Manifest paths are resolved relative to base_dir.
// Missing optional fields keep the defaults above; "models" defaults to
// ["elastic_net"]. Throws ConfigError on any invalid field.
ExperimentConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

// Fully resolved form (absolute manifest paths, every default spelled out,
// output_dir omitted). Parsing it back yields the same configuration.
nlohmann::json to_json(const ExperimentConfig& config);
nlohmann::json to_json(const Preprocessing& preprocessing);

void validate(const ExperimentConfig& config);

std::string describe_sensors(const ChannelKindSet& kinds);

}  // namespace megphone
