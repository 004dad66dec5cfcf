#pragma once

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace megphone {

struct ElasticNetParams {
    double alpha = 1e-2;
    double l1_ratio = 0.5;
    double tol = 1e-7;  // duality gap relative to log 2 (objective change when alpha = 0)
    int max_iter = 10000;
};

struct SvmParams {
    double C = 1.0;
    std::optional<double> gamma;  // none: 1 / (p var(X))
    double tol = 1e-3;            // maximal KKT violation
    long max_iter = 10'000'000;
};

struct LdaParams {
    double shrinkage = 0.5;
};

struct FfnParams {
    std::vector<int> hidden_sizes;
};

struct CnnParams {
    int kernel = 10;
    int stride = 10;
    int filters = 8;   // per channel, shared across channels
    int n_times = 31;  // samples per channel in a flattened row
};

struct TrainParams {
    double learning_rate = 1e-4;
    double weight_decay = 1e-3;
    int max_epochs = 500;
    int patience = 10;
    double val_fraction = 0.1;
    std::uint64_t seed = 0;
};

using ModelVariant = std::variant<ElasticNetParams, SvmParams, LdaParams, FfnParams, CnnParams>;

struct ModelSpec {
    std::string name;
    ModelVariant variant;
    TrainParams train;

    // Presets: elastic_net, svm_rbf, lda, ffn_l1 ([]), ffn_l2 ([1024]),
    // ffn_l3 ([2048, 1024]) and cnn. Throws ConfigError for unknown names.
    static ModelSpec preset(const std::string& name);
};

// Throws ConfigError describing the first invalid hyperparameter.
void validate(const ModelSpec& spec);

// JSON form: either a preset name or an object {"type": ..., hyperparameters...,
// "name": optional display name, "train": {...}} where unspecified fields keep
// their defaults.
ModelSpec model_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ModelSpec& spec);

std::string_view type_name(const ModelVariant& variant);

}  // namespace megphone
