#pragma once

#include <Eigen/Core>

namespace megphone {

struct ZScoreStats {
    Eigen::VectorXd mean;
    Eigen::VectorXd std;  // population std, floored at kStdFloor
};

inline constexpr double kStdFloor = 1e-8;

// Per-column statistics over the rows of X. Throws DataError for fewer than 2 rows.
ZScoreStats compute_zscore_stats(const Eigen::MatrixXd& X);

// (X - mean) / std column-wise. Throws DataError on a column-count mismatch.
Eigen::MatrixXd apply_zscore(const Eigen::MatrixXd& X, const ZScoreStats& stats);

}  // namespace megphone
