#pragma once

#include "megphone/epochs.hpp"
#include "megphone/models/model_spec.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace megphone {

struct FoldSplit {
    int k = 0;
    std::vector<int> assignments;  // fold index per row

    std::vector<std::size_t> test_rows(int fold) const;
    std::vector<std::size_t> train_rows(int fold) const;
};

// Stratified assignment: each class is shuffled with the seed, the classes are
// concatenated and row i of that order goes to fold i mod k. Fold sizes, and
// per-class fold counts, differ by at most one. Throws ConfigError for k < 2 or
// n < k; warns when a class has fewer than k members.
FoldSplit kfold(const std::vector<int>& y, int k = 5, std::uint64_t seed = 0);
// Unstratified variant for n unlabeled rows.
FoldSplit kfold(std::size_t n, int k = 5, std::uint64_t seed = 0);

struct MetricSet {
    double accuracy = 0.0;
    double f1 = 0.0;  // macro average over the two classes
    double auc = 0.0;
};

// Predicted class is 1 where score >= threshold. AUC is the Mann-Whitney
// statistic with ties counted as one half. Throws DataError on length mismatch
// or when y_true holds a single class.
MetricSet metrics(const std::vector<int>& y_true, std::span<const double> scores, double threshold = 0.5);
double roc_auc(const std::vector<int>& y_true, std::span<const double> scores);

enum class WilcoxonMethod { exact, normal_approx };

struct TestResult {
    double W = 0.0;  // min(positive rank sum, negative rank sum)
    double p = 1.0;  // two-sided
    int n_effective = 0;
    WilcoxonMethod method = WilcoxonMethod::exact;
};

inline constexpr int kWilcoxonExactMax = 25;

// Signed-rank test on a - b. Zero differences are dropped and tied |d| get
// average ranks. The exact null distribution is used for n_eff <= 25 unless a
// method is forced; the normal approximation uses the tie-corrected variance
// and a continuity correction. Throws DataError if every difference is zero.
TestResult wilcoxon(std::span<const double> a, std::span<const double> b,
                    std::optional<WilcoxonMethod> method = std::nullopt);

struct Evaluation {
    std::vector<MetricSet> folds;
    MetricSet mean;
    MetricSet std;                  // population std across folds
    std::vector<double> scores;     // out-of-fold probability for every row
    std::vector<std::uint8_t> correct;  // out-of-fold hit per row
};

struct EvaluateOptions {
    // Called once per fold with the rows that fed compute_zscore_stats and the held-out rows.
    std::function<void(int fold, std::span<const std::size_t> stats_rows, std::span<const std::size_t> test_rows)>
        on_fold;
};

// Per fold: z-score statistics from the training rows only, applied to both
// partitions, then train and score the held-out rows. Model errors are rethrown
// with the fold index attached.
Evaluation evaluate(const ModelSpec& spec, const PairDataset& ds, const FoldSplit& split,
                    const EvaluateOptions& options = {});

}  // namespace megphone
