#pragma once

#include "megphone/config.hpp"
#include "megphone/dataio.hpp"
#include "megphone/eval.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace megphone {

struct FoldRecord {
    std::string subject, task, phone_a, phone_b, model, configuration;
    int fold = 0;
    MetricSet metrics;
};

struct ExampleRecord {
    std::string subject, task, phone_a, phone_b, model, configuration;
    double onset = 0.0;
    int fold = 0;
    double score = 0.0;
    bool correct = false;
};

struct ResultRow {
    std::string modality, model, configuration;
    MetricSet mean, std;  // across subjects (sample std, 0 for a single subject)
    std::size_t n = 0;    // subjects
    std::string compared_to;         // label of the reference row, empty for none
    std::optional<TestResult> test;  // accuracy comparison against compared_to
};

struct Comparison {
    std::string a, b;  // row labels, or "chance"
    TestResult test;
};

struct PairCell {
    std::string modality, model, configuration, phone_a, phone_b;
    double accuracy = 0.0;  // mean over subjects and folds
};

struct ResultTable {
    std::string study;
    std::vector<ResultRow> rows;
    std::vector<Comparison> comparisons;
    bool significance_column = false;
    double alpha = 0.01;
    std::vector<PairCell> pair_accuracy;
};

struct StudyResult {
    ResultTable table;
    std::vector<FoldRecord> folds;
    std::vector<ExampleRecord> examples;
    nlohmann::json row_configs = nlohmann::json::array();  // resolved settings behind every row
};

struct RunOptions {
    int jobs = 1;
};

// Channel selection, wavelet denoising, decimation and band-limiting, in that order.
Recording preprocess(const Recording& raw, const Preprocessing& preprocessing);

// Paired signed-rank test where a difference vector of all zeros is reported as
// W = 0, p = 1, n_effective = 0 instead of an error.
TestResult compare_paired(std::span<const double> a, std::span<const double> b);

// Every configured model on every pair under the configured preprocessing.
// Each model is tested against the most accurate one.
StudyResult run_model_comparison(const ExperimentConfig& config, const RunOptions& options = {});

// The first configured model on every modality present in the manifests, tested
// between modalities (paired by subject, pair and fold) and against chance.
// Throws ConfigError for fewer than two modalities.
StudyResult run_task_comparison(const ExperimentConfig& config, const RunOptions& options = {});

// Unfiltered baseline plus one row per canonical band at the full sample rate
// (no wavelet, decimation or band limit); each band is tested against the baseline.
StudyResult run_band_sweep(const ExperimentConfig& config, const RunOptions& options = {});

// Baseline plus one row per single-component removal, each tested against the baseline.
StudyResult run_ablation(const ExperimentConfig& config, const RunOptions& options = {});

// Identifiers of the ablation rows in table order.
const std::vector<std::string>& ablation_row_ids();

}  // namespace megphone
