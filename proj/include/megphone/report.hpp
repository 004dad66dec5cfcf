#pragma once

#include "megphone/config.hpp"
#include "megphone/epochs.hpp"
#include "megphone/study.hpp"

#include <json.hpp>

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace megphone {

// Percent with one decimal: (0.76612, 0.10548) -> "76.6 ± 10.5".
std::string format_mean_std(double mean, double std);

nlohmann::json to_json(const ResultTable& table);
ResultTable result_table_from_json(const nlohmann::json& j);

// Both throw DataError for a table without rows.
std::string table_csv(const ResultTable& table);
std::string table_markdown(const ResultTable& table);

std::string folds_csv(const std::vector<FoldRecord>& folds);
std::string examples_csv(const std::vector<ExampleRecord>& examples);

struct PairMatrix {
    std::string modality, model, configuration;
    std::vector<std::string> phones;               // sorted
    std::vector<std::vector<double>> accuracy;     // symmetric; NaN on the diagonal and for missing pairs
};

// One matrix per (modality, model, configuration) present in the table.
std::vector<PairMatrix> pair_matrices(const ResultTable& table);
// Header row of phones, then one row per phone; the diagonal and missing cells are empty.
std::string pair_matrix_csv(const PairMatrix& matrix);
std::string pair_matrix_filename(const PairMatrix& matrix);

// label,count in inventory order (descending count, ties by label).
std::string phone_inventory_csv(const PhoneInventory& inventory);

// table.csv, table.md, results.json and pair_matrix_*.csv into dir.
void write_report(const ResultTable& table, const std::filesystem::path& dir);

// config.json, folds.csv, examples.csv, row_configs.json and the report files.
void write_study(const StudyResult& result, const ExperimentConfig& config, const std::filesystem::path& dir);

// Writes text to path, creating parent directories. Throws DataError on failure.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace megphone
