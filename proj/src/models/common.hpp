#pragma once

#include "megphone/error.hpp"

#include <Eigen/Core>

#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace megphone::detail {

// Validates a binary training problem and returns the class counts.
inline std::array<std::size_t, 2> check_training_data(const Eigen::MatrixXd& X, const std::vector<int>& y,
                                                      const char* who) {
    if (X.rows() == 0 || X.cols() == 0) throw DataError(std::string(who) + ": empty training data");
    if (static_cast<std::size_t>(X.rows()) != y.size())
        throw DataError(std::string(who) + ": " + std::to_string(X.rows()) + " rows but " +
                        std::to_string(y.size()) + " labels");
    std::array<std::size_t, 2> counts{0, 0};
    for (int label : y) {
        if (label != 0 && label != 1)
            throw DataError(std::string(who) + ": labels must be 0 or 1, got " + std::to_string(label));
        ++counts[static_cast<std::size_t>(label)];
    }
    if (counts[0] == 0 || counts[1] == 0) throw DataError(std::string(who) + ": both classes must be present");
    if (!X.allFinite()) throw DataError(std::string(who) + ": non-finite feature values");
    return counts;
}

// log(1 + exp(u)) without overflow.
inline double softplus(double u) { return std::max(u, 0.0) + std::log1p(std::exp(-std::abs(u))); }

}  // namespace megphone::detail
