#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace megphone {

enum class ChannelKind { gradiometer, magnetometer, misc, audio };

std::string_view to_string(ChannelKind kind);
ChannelKind parse_channel_kind(std::string_view text);

using ChannelKindSet = std::set<ChannelKind>;

struct ChannelInfo {
    std::string name;
    ChannelKind kind = ChannelKind::gradiometer;
    std::string unit;

    bool operator==(const ChannelInfo&) const = default;
};

// Row-major so that each channel is a contiguous span.
using SampleMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Multichannel recording. Samples are stored as 32-bit floats, matching the
// on-disk payload, so that save/load round trips are bit-exact.
class Recording {
public:
    // Throws DataError if any invariant fails: positive finite sample rate, one
    // data row per channel, at least one sample, unique non-empty channel names
    // and finite samples.
    Recording(double sample_rate, std::vector<ChannelInfo> channels, SampleMatrix data);

    double sample_rate() const { return sample_rate_; }
    const std::vector<ChannelInfo>& channels() const { return channels_; }
    const SampleMatrix& data() const { return data_; }
    std::size_t n_channels() const { return channels_.size(); }
    std::size_t n_samples() const { return static_cast<std::size_t>(data_.cols()); }
    double duration() const { return static_cast<double>(n_samples()) / sample_rate_; }

    std::span<const float> channel(std::size_t index) const;
    std::size_t channel_index(std::string_view name) const;

    bool operator==(const Recording& other) const;

private:
    double sample_rate_;
    std::vector<ChannelInfo> channels_;
    SampleMatrix data_;
};

struct Event {
    double onset = 0.0;
    double offset = 0.0;
    std::string label;

    bool operator==(const Event&) const = default;
};

// Labeled intervals, kept sorted by onset (stable for equal onsets).
class EventTable {
public:
    EventTable() = default;
    // Validates 0 <= onset < offset and non-empty labels, then sorts.
    explicit EventTable(std::vector<Event> rows);

    const std::vector<Event>& rows() const { return rows_; }
    std::size_t size() const { return rows_.size(); }
    bool empty() const { return rows_.empty(); }

    bool operator==(const EventTable&) const = default;

private:
    std::vector<Event> rows_;
};

enum class Task { production, listening, playback };

std::string_view to_string(Task task);
Task parse_task(std::string_view text);

struct Manifest {
    std::string subject_id;
    Task task = Task::production;
    std::filesystem::path recording_path;
    std::filesystem::path events_path;
    double sample_rate = 0.0;
};

// `<path>` is the payload file (`name.nrd`); the header lives in `<path>.json`.
Recording load_recording(const std::filesystem::path& path);
void save_recording(const Recording& recording, const std::filesystem::path& path);

EventTable load_events(const std::filesystem::path& path);
void save_events(const EventTable& events, const std::filesystem::path& path);

// Relative paths inside the manifest are resolved against the manifest's directory.
// Checks that both files exist and that the sample rate matches the recording header.
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

// Keeps the channels whose kind is in `kinds`, preserving order.
Recording select_channels(const Recording& recording, const ChannelKindSet& kinds);

}  // namespace megphone
