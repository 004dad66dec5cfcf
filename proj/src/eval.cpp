#include "megphone/eval.hpp"

#include "megphone/dsp/zscore.hpp"
#include "megphone/error.hpp"
#include "megphone/models/train.hpp"
#include "megphone/random.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace megphone {

namespace {

FoldSplit assign(const std::vector<std::vector<std::size_t>>& groups, std::size_t n, int k) {
    FoldSplit split;
    split.k = k;
    split.assignments.assign(n, 0);
    std::size_t position = 0;
    for (const auto& group : groups)
        for (std::size_t row : group) split.assignments[row] = static_cast<int>(position++ % static_cast<std::size_t>(k));
    return split;
}

// Average ranks (1-based) of values, ties sharing the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(values.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
        i = j + 1;
    }
    return ranks;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

MetricSet fold_mean(const std::vector<MetricSet>& folds) {
    MetricSet m;
    for (const auto& f : folds) {
        m.accuracy += f.accuracy;
        m.f1 += f.f1;
        m.auc += f.auc;
    }
    const double k = static_cast<double>(folds.size());
    return {m.accuracy / k, m.f1 / k, m.auc / k};
}

MetricSet fold_std(const std::vector<MetricSet>& folds, const MetricSet& mean) {
    MetricSet s;
    for (const auto& f : folds) {
        s.accuracy += (f.accuracy - mean.accuracy) * (f.accuracy - mean.accuracy);
        s.f1 += (f.f1 - mean.f1) * (f.f1 - mean.f1);
        s.auc += (f.auc - mean.auc) * (f.auc - mean.auc);
    }
    const double k = static_cast<double>(folds.size());
    return {std::sqrt(s.accuracy / k), std::sqrt(s.f1 / k), std::sqrt(s.auc / k)};
}

template <class E>
[[noreturn]] void rethrow_with_fold(const E& e, int fold) {
    throw E("fold " + std::to_string(fold) + ": " + e.what());
}

}  // namespace

std::vector<std::size_t> FoldSplit::test_rows(int fold) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        if (assignments[i] == fold) rows.push_back(i);
    return rows;
}

std::vector<std::size_t> FoldSplit::train_rows(int fold) const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < assignments.size(); ++i)
        if (assignments[i] != fold) rows.push_back(i);
    return rows;
}

FoldSplit kfold(const std::vector<int>& y, int k, std::uint64_t seed) {
    if (k < 2) throw ConfigError("kfold: k must be at least 2");
    if (y.size() < static_cast<std::size_t>(k))
        throw ConfigError("kfold: " + std::to_string(y.size()) + " rows cannot fill " + std::to_string(k) + " folds");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < y.size(); ++i) by_class[y[i]].push_back(i);
    Rng rng(seed);
    std::vector<std::vector<std::size_t>> groups;
    for (auto& [label, rows] : by_class) {
        if (rows.size() < static_cast<std::size_t>(k))
            warn("kfold: class " + std::to_string(label) + " has " + std::to_string(rows.size()) +
                 " members for " + std::to_string(k) + " folds");
        rng.shuffle(rows);
        groups.push_back(rows);
    }
    return assign(groups, y.size(), k);
}

FoldSplit kfold(std::size_t n, int k, std::uint64_t seed) { return kfold(std::vector<int>(n, 0), k, seed); }

double roc_auc(const std::vector<int>& y_true, std::span<const double> scores) {
    if (y_true.size() != scores.size()) throw DataError("auc: labels and scores differ in length");
    const auto ranks = average_ranks(scores);
    double n_pos = 0, n_neg = 0, rank_sum = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] == 1) {
            n_pos += 1;
            rank_sum += ranks[i];
        } else {
            n_neg += 1;
        }
    }
    if (n_pos == 0 || n_neg == 0) throw DataError("auc: undefined for a single-class label vector");
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg);
}

MetricSet metrics(const std::vector<int>& y_true, std::span<const double> scores, double threshold) {
    if (y_true.size() != scores.size()) throw DataError("metrics: labels and scores differ in length");
    if (y_true.empty()) throw DataError("metrics: no rows");
    double tp[2] = {0, 0}, predicted[2] = {0, 0}, actual[2] = {0, 0};
    double hits = 0;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        const int truth = y_true[i];
        if (truth != 0 && truth != 1) throw DataError("metrics: labels must be 0 or 1");
        const int guess = scores[i] >= threshold ? 1 : 0;
        actual[truth] += 1;
        predicted[guess] += 1;
        if (guess == truth) {
            hits += 1;
            tp[truth] += 1;
        }
    }
    MetricSet m;
    m.accuracy = hits / static_cast<double>(y_true.size());
    for (int c = 0; c < 2; ++c) {
        const double precision = predicted[c] > 0 ? tp[c] / predicted[c] : 0.0;
        const double recall = actual[c] > 0 ? tp[c] / actual[c] : 0.0;
        m.f1 += precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    }
    m.f1 /= 2.0;
    m.auc = roc_auc(y_true, scores);
    return m;
}

TestResult wilcoxon(std::span<const double> a, std::span<const double> b, std::optional<WilcoxonMethod> method) {
    if (a.size() != b.size()) throw DataError("wilcoxon: samples differ in length");
    if (a.empty()) throw DataError("wilcoxon: empty samples");
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        if (!std::isfinite(diff)) throw DataError("wilcoxon: non-finite difference");
        if (diff != 0.0) d.push_back(diff);
    }
    if (d.empty()) throw DataError("wilcoxon: no nonzero differences");

    std::vector<double> magnitude(d.size());
    std::transform(d.begin(), d.end(), magnitude.begin(), [](double v) { return std::abs(v); });
    const auto ranks = average_ranks(magnitude);
    double t_plus = 0, t_minus = 0;
    for (std::size_t i = 0; i < d.size(); ++i) (d[i] > 0 ? t_plus : t_minus) += ranks[i];

    TestResult result;
    result.n_effective = static_cast<int>(d.size());
    result.W = std::min(t_plus, t_minus);
    result.method = method.value_or(result.n_effective <= kWilcoxonExactMax ? WilcoxonMethod::exact
                                                                          : WilcoxonMethod::normal_approx);
    const double n = static_cast<double>(d.size());

    if (result.method == WilcoxonMethod::exact) {
        // Distribution of the positive rank sum over all 2^n sign patterns,
        // counted on doubled ranks so that half-integer ties stay integral.
        std::vector<long> doubled(d.size());
        long total = 0;
        for (std::size_t i = 0; i < d.size(); ++i) {
            doubled[i] = std::lround(2.0 * ranks[i]);
            total += doubled[i];
        }
        std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
        count[0] = 1.0;
        long reach = 0;
        for (long r : doubled) {
            for (long s = reach; s >= 0; --s) count[static_cast<std::size_t>(s + r)] += count[static_cast<std::size_t>(s)];
            reach += r;
        }
        const long w2 = std::lround(2.0 * result.W);
        double tail = 0.0;
        for (long s = 0; s <= w2; ++s) tail += count[static_cast<std::size_t>(s)];
        result.p = std::min(1.0, 2.0 * tail / std::ldexp(1.0, result.n_effective));
    } else {
        std::map<double, int> ties;
        for (double r : ranks) ++ties[r];
        double tie_term = 0.0;
        for (const auto& [rank, t] : ties) tie_term += static_cast<double>(t) * t * t - t;
        const double mean = n * (n + 1.0) / 4.0;
        const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
        double dev = result.W - mean;
        if (dev != 0.0) dev -= std::copysign(0.5, dev);
        const double z = var > 0.0 ? dev / std::sqrt(var) : 0.0;
        result.p = std::min(1.0, 2.0 * normal_cdf(-std::abs(z)));
    }
    return result;
}

Evaluation evaluate(const ModelSpec& spec, const PairDataset& ds, const FoldSplit& split,
                    const EvaluateOptions& options) {
    const std::size_t n = ds.n_rows();
    if (split.assignments.size() != n || static_cast<std::size_t>(ds.X.rows()) != n)
        throw DataError("evaluate: fold split covers " + std::to_string(split.assignments.size()) +
                        " rows, dataset has " + std::to_string(n));
    Evaluation out;
    out.scores.assign(n, 0.0);
    out.correct.assign(n, 0);

    for (int fold = 0; fold < split.k; ++fold) {
        const auto train = split.train_rows(fold);
        const auto test = split.test_rows(fold);
        if (train.empty() || test.empty()) throw DataError("evaluate: fold " + std::to_string(fold) + " is empty");
        if (options.on_fold) options.on_fold(fold, train, test);

        Eigen::MatrixXd X_train(static_cast<Eigen::Index>(train.size()), ds.X.cols());
        Eigen::MatrixXd X_test(static_cast<Eigen::Index>(test.size()), ds.X.cols());
        std::vector<int> y_train, y_test;
        for (std::size_t r = 0; r < train.size(); ++r) {
            X_train.row(static_cast<Eigen::Index>(r)) = ds.X.row(static_cast<Eigen::Index>(train[r]));
            y_train.push_back(ds.y[train[r]]);
        }
        for (std::size_t r = 0; r < test.size(); ++r) {
            X_test.row(static_cast<Eigen::Index>(r)) = ds.X.row(static_cast<Eigen::Index>(test[r]));
            y_test.push_back(ds.y[test[r]]);
        }

        ModelSpec fold_spec = spec;
        fold_spec.train.seed = mix_seed(spec.train.seed, static_cast<std::uint64_t>(fold));
        Eigen::VectorXd proba;
        MetricSet m;
        try {
            const ZScoreStats stats = compute_zscore_stats(X_train);
            const TrainedModel model = train_model(fold_spec, apply_zscore(X_train, stats), y_train);
            proba = predict_proba(model, apply_zscore(X_test, stats));
            m = metrics(y_test, std::span<const double>(proba.data(), static_cast<std::size_t>(proba.size())));
        } catch (const ConfigError& e) {
            rethrow_with_fold(e, fold);
        } catch (const DataError& e) {
            rethrow_with_fold(e, fold);
        } catch (const NumericError& e) {
            rethrow_with_fold(e, fold);
        }
        for (std::size_t r = 0; r < test.size(); ++r) {
            out.scores[test[r]] = proba(static_cast<Eigen::Index>(r));
            out.correct[test[r]] = static_cast<std::uint8_t>((proba(static_cast<Eigen::Index>(r)) >= 0.5 ? 1 : 0) == y_test[r]);
        }
        out.folds.push_back(m);
    }
    out.mean = fold_mean(out.folds);
    out.std = fold_std(out.folds, out.mean);
    return out;
}

}  // namespace megphone
