#include "megphone/epochs.hpp"

#include "megphone/error.hpp"
#include "megphone/random.hpp"

#include <algorithm>
#include <cmath>

namespace megphone {

PhoneInventory count_phones(const EventTable& events, std::size_t min_count) {
    PhoneInventory inventory;
    for (const auto& event : events.rows()) ++inventory.counts[event.label];
    for (const auto& [label, count] : inventory.counts) {
        if (count >= min_count) inventory.selected.push_back(label);
    }
    // std::map iteration is already label-sorted, so a stable sort settles ties by label.
    std::stable_sort(inventory.selected.begin(), inventory.selected.end(),
                     [&](const std::string& a, const std::string& b) {
                         return inventory.counts.at(a) > inventory.counts.at(b);
                     });
    return inventory;
}

std::size_t epoch_length(double fs, double tmin, double tmax) {
    if (!(fs > 0.0) || !std::isfinite(fs)) throw ConfigError("epochs: sample rate must be positive");
    if (!(tmin < tmax)) throw ConfigError("epochs: tmin must be smaller than tmax");
    return static_cast<std::size_t>(std::llround((tmax - tmin) * fs)) + 1;
}

EpochSet extract_epochs(const Recording& recording, const EventTable& events, double tmin, double tmax) {
    const double fs = recording.sample_rate();
    const auto n_times = static_cast<long long>(epoch_length(fs, tmin, tmax));
    const auto n_baseline = tmin < 0.0 ? std::min<long long>(std::llround(-tmin * fs), n_times) : 0;
    const auto n_samples = static_cast<long long>(recording.n_samples());
    const auto n_channels = static_cast<Eigen::Index>(recording.n_channels());

    EpochSet out;
    for (const auto& event : events.rows()) {
        const long long start = std::llround((event.onset + tmin) * fs);
        if (start < 0 || start + n_times > n_samples) {
            ++out.skipped;
            continue;
        }
        Epoch epoch;
        epoch.label = event.label;
        epoch.onset = event.onset;
        epoch.data.resize(n_channels, n_times);
        for (Eigen::Index c = 0; c < n_channels; ++c) {
            const auto samples = recording.channel(static_cast<std::size_t>(c));
            double baseline = 0.0;
            for (long long t = 0; t < n_baseline; ++t) baseline += samples[start + t];
            if (n_baseline > 0) baseline /= static_cast<double>(n_baseline);
            for (long long t = 0; t < n_times; ++t)
                epoch.data(c, t) = static_cast<double>(samples[start + t]) - baseline;
        }
        out.epochs.push_back(std::move(epoch));
    }
    return out;
}

Eigen::VectorXd flatten_epoch(const Eigen::MatrixXd& data) {
    Eigen::VectorXd row(data.size());
    Eigen::Index k = 0;
    for (Eigen::Index c = 0; c < data.rows(); ++c)
        for (Eigen::Index t = 0; t < data.cols(); ++t) row(k++) = data(c, t);
    return row;
}

Eigen::MatrixXd unflatten_epoch(const Eigen::Ref<const Eigen::VectorXd>& row, Eigen::Index n_channels,
                                Eigen::Index n_times) {
    if (row.size() != n_channels * n_times)
        throw DataError("unflatten: row of " + std::to_string(row.size()) + " values does not match " +
                        std::to_string(n_channels) + "x" + std::to_string(n_times));
    Eigen::MatrixXd data(n_channels, n_times);
    Eigen::Index k = 0;
    for (Eigen::Index c = 0; c < n_channels; ++c)
        for (Eigen::Index t = 0; t < n_times; ++t) data(c, t) = row(k++);
    return data;
}

PairDataset build_pair_dataset(const std::vector<Epoch>& epochs, const std::string& phone_a,
                               const std::string& phone_b, std::uint64_t seed) {
    if (phone_a == phone_b) throw ConfigError("pair dataset: phones must differ, got '" + phone_a + "' twice");
    const std::string& first = std::min(phone_a, phone_b);
    const std::string& second = std::max(phone_a, phone_b);

    std::vector<std::size_t> idx0, idx1;
    for (std::size_t i = 0; i < epochs.size(); ++i) {
        if (epochs[i].label == first) idx0.push_back(i);
        else if (epochs[i].label == second) idx1.push_back(i);
    }
    if (idx0.empty() || idx1.empty())
        throw DataError("pair dataset: no epochs for '" + (idx0.empty() ? first : second) + "'");

    Rng rng(seed);
    auto& majority = idx0.size() > idx1.size() ? idx0 : idx1;
    const std::size_t keep = std::min(idx0.size(), idx1.size());
    if (majority.size() > keep) {
        rng.shuffle(majority);
        majority.resize(keep);
        std::sort(majority.begin(), majority.end());
    }

    std::vector<std::pair<std::size_t, int>> rows;
    for (auto i : idx0) rows.emplace_back(i, 0);
    for (auto i : idx1) rows.emplace_back(i, 1);
    rng.shuffle(rows);

    const auto& shape = epochs[idx0.front()].data;
    PairDataset ds;
    ds.pair = {first, second};
    ds.seed = seed;
    ds.X.resize(static_cast<Eigen::Index>(rows.size()), shape.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& epoch = epochs[rows[r].first];
        if (epoch.data.rows() != shape.rows() || epoch.data.cols() != shape.cols())
            throw DataError("pair dataset: epochs have inconsistent shapes");
        ds.X.row(static_cast<Eigen::Index>(r)) = flatten_epoch(epoch.data).transpose();
        ds.y.push_back(rows[r].second);
        ds.onsets.push_back(epoch.onset);
    }
    return ds;
}

}  // namespace megphone
