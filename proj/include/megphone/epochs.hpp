#pragma once

#include "megphone/dataio.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace megphone {

struct Epoch {
    Eigen::MatrixXd data;  // n_channels x n_times
    std::string label;
    double onset = 0.0;
};

struct EpochSet {
    std::vector<Epoch> epochs;
    std::size_t skipped = 0;  // events whose window left the recording
};

struct PhoneInventory {
    std::map<std::string, std::size_t> counts;
    std::vector<std::string> selected;  // count >= min_count, descending count, ties by label
};

struct PairDataset {
    Eigen::MatrixXd X;  // one flattened epoch per row, channel-major
    std::vector<int> y;
    std::pair<std::string, std::string> pair;  // (class 0, class 1)
    std::uint64_t seed = 0;
    std::vector<double> onsets;  // onset of the source event for each row

    std::size_t n_rows() const { return y.size(); }
};

inline constexpr std::size_t kDefaultMinCount = 50;

PhoneInventory count_phones(const EventTable& events, std::size_t min_count = kDefaultMinCount);

// Inclusive-endpoint window length: round((tmax - tmin) fs) + 1.
std::size_t epoch_length(double fs, double tmin, double tmax);

// Cuts [onset + tmin, onset + tmax] around each event and subtracts, per channel,
// the mean of the samples before the onset. Events whose window does not fit in
// the recording are skipped and counted. Throws ConfigError for fs <= 0 or tmin >= tmax.
EpochSet extract_epochs(const Recording& recording, const EventTable& events, double tmin = -0.1,
                        double tmax = 0.2);

// Row-major flattening of a channels x times matrix and its inverse.
Eigen::VectorXd flatten_epoch(const Eigen::MatrixXd& data);
Eigen::MatrixXd unflatten_epoch(const Eigen::Ref<const Eigen::VectorXd>& row, Eigen::Index n_channels,
                                Eigen::Index n_times);

// Balanced two-class dataset. The lexicographically smaller phone becomes class 0.
// The larger class is down-sampled at random, then all rows are shuffled; both
// steps are driven by `seed`. Throws DataError if either phone has no epochs.
PairDataset build_pair_dataset(const std::vector<Epoch>& epochs, const std::string& phone_a,
                               const std::string& phone_b, std::uint64_t seed);

}  // namespace megphone
