#include "megphone/dsp/zscore.hpp"

#include "megphone/error.hpp"

#include <cmath>
#include <string>

namespace megphone {

ZScoreStats compute_zscore_stats(const Eigen::MatrixXd& X) {
    if (X.rows() < 2) throw DataError("z-score statistics need at least 2 rows");
    ZScoreStats stats;
    stats.mean = X.colwise().mean().transpose();
    stats.std.resize(X.cols());
    const double n = static_cast<double>(X.rows());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        const double var = (X.col(j).array() - stats.mean(j)).square().sum() / n;
        stats.std(j) = std::max(std::sqrt(var), kStdFloor);
    }
    return stats;
}

Eigen::MatrixXd apply_zscore(const Eigen::MatrixXd& X, const ZScoreStats& stats) {
    if (X.cols() != stats.mean.size())
        throw DataError("z-score: matrix has " + std::to_string(X.cols()) + " columns, stats have " +
                        std::to_string(stats.mean.size()));
    Eigen::MatrixXd out(X.rows(), X.cols());
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        out.col(j) = (X.col(j).array() - stats.mean(j)) / stats.std(j);
    }
    return out;
}

}  // namespace megphone
