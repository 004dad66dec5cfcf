#include "megphone/dataio.hpp"

#include "megphone/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iostream>
#include <sstream>
#include <unordered_set>

namespace megphone {

namespace fs = std::filesystem;
using nlohmann::json;

void warn(const std::string& message) { std::cerr << "warning: " << message << '\n'; }

std::string_view to_string(ChannelKind kind) {
    switch (kind) {
    case ChannelKind::gradiometer: return "gradiometer";
    case ChannelKind::magnetometer: return "magnetometer";
    case ChannelKind::misc: return "misc";
    case ChannelKind::audio: return "audio";
    }
    return "unknown";
}

ChannelKind parse_channel_kind(std::string_view text) {
    for (auto kind : {ChannelKind::gradiometer, ChannelKind::magnetometer, ChannelKind::misc,
                      ChannelKind::audio}) {
        if (text == to_string(kind)) return kind;
    }
    throw DataError("unknown channel kind '" + std::string(text) + "'");
}

std::string_view to_string(Task task) {
    switch (task) {
    case Task::production: return "production";
    case Task::listening: return "listening";
    case Task::playback: return "playback";
    }
    return "unknown";
}

Task parse_task(std::string_view text) {
    for (auto task : {Task::production, Task::listening, Task::playback}) {
        if (text == to_string(task)) return task;
    }
    throw DataError("unknown task '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------
// Recording

Recording::Recording(double sample_rate, std::vector<ChannelInfo> channels, SampleMatrix data)
    : sample_rate_(sample_rate), channels_(std::move(channels)), data_(std::move(data)) {
    if (!(sample_rate_ > 0.0) || !std::isfinite(sample_rate_))
        throw DataError("sample rate must be positive and finite");
    if (static_cast<std::size_t>(data_.rows()) != channels_.size())
        throw DataError("data has " + std::to_string(data_.rows()) + " rows but " +
                        std::to_string(channels_.size()) + " channels are declared");
    if (channels_.empty()) throw DataError("recording has no channels");
    if (data_.cols() == 0) throw DataError("recording has no samples");

    std::unordered_set<std::string> names;
    for (const auto& ch : channels_) {
        if (ch.name.empty()) throw DataError("channel name must not be empty");
        if (!names.insert(ch.name).second) throw DataError("duplicate channel name '" + ch.name + "'");
    }
    if (!data_.allFinite()) throw DataError("recording contains non-finite samples");
}

std::span<const float> Recording::channel(std::size_t index) const {
    return {data_.row(static_cast<Eigen::Index>(index)).data(), n_samples()};
}

std::size_t Recording::channel_index(std::string_view name) const {
    for (std::size_t i = 0; i < channels_.size(); ++i) {
        if (channels_[i].name == name) return i;
    }
    throw DataError("no channel named '" + std::string(name) + "'");
}

bool Recording::operator==(const Recording& other) const {
    if (sample_rate_ != other.sample_rate_ || channels_ != other.channels_) return false;
    if (data_.rows() != other.data_.rows() || data_.cols() != other.data_.cols()) return false;
    // Bitwise comparison: distinguishes -0.0f from 0.0f.
    return std::memcmp(data_.data(), other.data_.data(),
                       static_cast<std::size_t>(data_.size()) * sizeof(float)) == 0;
}

// ---------------------------------------------------------------------------
// .nrd payload + JSON sidecar

namespace {

fs::path header_path(const fs::path& payload) {
    fs::path h = payload;
    h += ".json";
    return h;
}

json read_json(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError("malformed JSON in " + path.string() + ": " + e.what());
    }
}

std::uint32_t to_little_endian(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big) {
        v = ((v & 0xff) << 24) | ((v & 0xff00) << 8) | ((v >> 8) & 0xff00) | (v >> 24);
    }
    return v;
}

}  // namespace

Recording load_recording(const fs::path& path) {
    const json header = read_json(header_path(path));

    double sample_rate = 0.0;
    std::size_t n_samples = 0;
    std::vector<ChannelInfo> channels;
    try {
        if (header.value("format", "") != "nrd") throw DataError("header format is not 'nrd'");
        if (header.value("dtype", "float32") != "float32")
            throw DataError("unsupported dtype '" + header.value("dtype", "") + "'");
        if (header.value("byte_order", "little") != "little")
            throw DataError("unsupported byte order");
        if (header.value("layout", "channel-major") != "channel-major")
            throw DataError("unsupported layout");
        sample_rate = header.at("sample_rate").get<double>();
        n_samples = header.at("n_samples").get<std::size_t>();
        for (const auto& ch : header.at("channels")) {
            channels.push_back({ch.at("name").get<std::string>(),
                                parse_channel_kind(ch.at("kind").get<std::string>()),
                                ch.value("unit", "")});
        }
        if (header.contains("n_channels") && header["n_channels"].get<std::size_t>() != channels.size())
            throw DataError("malformed header: n_channels does not match channel list");
    } catch (const json::exception& e) {
        throw DataError("malformed header " + header_path(path).string() + ": " + e.what());
    }

    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    const auto payload_bytes = static_cast<std::size_t>(fs::file_size(path));
    const std::size_t expected = channels.size() * n_samples * sizeof(float);
    if (payload_bytes != expected) {
        throw DataError("sample-count mismatch: header declares " + std::to_string(n_samples) +
                        " samples x " + std::to_string(channels.size()) + " channels (" +
                        std::to_string(expected) + " bytes) but payload holds " +
                        std::to_string(payload_bytes) + " bytes");
    }

    SampleMatrix data(static_cast<Eigen::Index>(channels.size()), static_cast<Eigen::Index>(n_samples));
    std::vector<std::uint32_t> raw(n_samples);
    for (std::size_t c = 0; c < channels.size(); ++c) {
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(n_samples * 4));
        if (!in) throw DataError("short read in " + path.string());
        float* row = data.row(static_cast<Eigen::Index>(c)).data();
        for (std::size_t i = 0; i < n_samples; ++i) {
            row[i] = std::bit_cast<float>(to_little_endian(raw[i]));
        }
    }
    if (!data.allFinite()) throw DataError("non-finite values in " + path.string());
    return Recording(sample_rate, std::move(channels), std::move(data));
}

void save_recording(const Recording& recording, const fs::path& path) {
    json channels = json::array();
    for (const auto& ch : recording.channels()) {
        channels.push_back({{"name", ch.name}, {"kind", to_string(ch.kind)}, {"unit", ch.unit}});
    }
    const json header = {{"format", "nrd"},
                         {"version", 1},
                         {"sample_rate", recording.sample_rate()},
                         {"n_channels", recording.n_channels()},
                         {"n_samples", recording.n_samples()},
                         {"dtype", "float32"},
                         {"byte_order", "little"},
                         {"layout", "channel-major"},
                         {"channels", channels}};
    {
        std::ofstream out(header_path(path));
        if (!out) throw DataError("cannot write " + header_path(path).string());
        out << header.dump(2) << '\n';
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    std::vector<std::uint32_t> raw(recording.n_samples());
    for (std::size_t c = 0; c < recording.n_channels(); ++c) {
        const auto samples = recording.channel(c);
        for (std::size_t i = 0; i < samples.size(); ++i) {
            raw[i] = to_little_endian(std::bit_cast<std::uint32_t>(samples[i]));
        }
        out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
    }
    if (!out) throw DataError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Events

EventTable::EventTable(std::vector<Event> rows) : rows_(std::move(rows)) {
    for (const auto& e : rows_) {
        if (!std::isfinite(e.onset) || !std::isfinite(e.offset) || e.onset < 0.0 || e.onset >= e.offset)
            throw DataError("invalid event interval [" + std::to_string(e.onset) + ", " +
                            std::to_string(e.offset) + ") for label '" + e.label + "'");
        if (e.label.empty()) throw DataError("event label must not be empty");
    }
    std::stable_sort(rows_.begin(), rows_.end(),
                     [](const Event& a, const Event& b) { return a.onset < b.onset; });
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find('\t', start);
        fields.push_back(line.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return fields;
}

double parse_seconds(const std::string& text, std::size_t line_no) {
    std::size_t used = 0;
    double value = 0.0;
    try {
        value = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size())
        throw DataError("line " + std::to_string(line_no) + ": cannot parse '" + text + "' as seconds");
    return value;
}

}  // namespace

EventTable load_events(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());

    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw DataError(path.string() + ": missing header line");
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "onset\toffset\tlabel")
        throw DataError(path.string() + ": expected header 'onset\\toffset\\tlabel'");

    std::vector<Event> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_tabs(line);
        if (fields.size() != 3)
            throw DataError("line " + std::to_string(line_no) + ": expected 3 tab-separated fields");
        Event e{parse_seconds(fields[0], line_no), parse_seconds(fields[1], line_no), fields[2]};
        if (e.onset < 0.0 || e.onset >= e.offset)
            throw DataError("line " + std::to_string(line_no) + ": onset must be >= 0 and < offset");
        if (e.label.empty()) throw DataError("line " + std::to_string(line_no) + ": empty label");
        rows.push_back(std::move(e));
    }
    return EventTable(std::move(rows));
}

void save_events(const EventTable& events, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << "onset\toffset\tlabel\n";
    char buf[64];
    for (const auto& e : events.rows()) {
        // %.17g round-trips every double.
        std::snprintf(buf, sizeof buf, "%.17g", e.onset);
        out << buf << '\t';
        std::snprintf(buf, sizeof buf, "%.17g", e.offset);
        out << buf << '\t' << e.label << '\n';
    }
    if (!out) throw DataError("write failed for " + path.string());
}

// ---------------------------------------------------------------------------
// Manifest

Manifest load_manifest(const fs::path& path) {
    const json j = read_json(path);
    Manifest m;
    try {
        m.subject_id = j.at("subject_id").get<std::string>();
        m.task = parse_task(j.at("task").get<std::string>());
        m.recording_path = j.at("recording").get<std::string>();
        m.events_path = j.at("events").get<std::string>();
        m.sample_rate = j.at("sample_rate").get<double>();
    } catch (const json::exception& e) {
        throw DataError("malformed manifest " + path.string() + ": " + e.what());
    }
    const fs::path base = path.parent_path();
    if (m.recording_path.is_relative()) m.recording_path = base / m.recording_path;
    if (m.events_path.is_relative()) m.events_path = base / m.events_path;

    if (!fs::exists(m.recording_path)) throw DataError("recording not found: " + m.recording_path.string());
    if (!fs::exists(m.events_path)) throw DataError("events not found: " + m.events_path.string());

    const json header = read_json(header_path(m.recording_path));
    const double header_rate = header.value("sample_rate", 0.0);
    if (header_rate != m.sample_rate)
        throw DataError("manifest sample_rate " + std::to_string(m.sample_rate) +
                        " does not match recording header " + std::to_string(header_rate));
    return m;
}

void save_manifest(const Manifest& m, const fs::path& path) {
    auto relative_to = [&](const fs::path& p) {
        if (p.parent_path() == path.parent_path()) return p.filename().string();
        return p.string();
    };
    const json j = {{"subject_id", m.subject_id},
                    {"task", to_string(m.task)},
                    {"recording", relative_to(m.recording_path)},
                    {"events", relative_to(m.events_path)},
                    {"sample_rate", m.sample_rate}};
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------

Recording select_channels(const Recording& recording, const ChannelKindSet& kinds) {
    std::vector<Eigen::Index> keep;
    std::vector<ChannelInfo> channels;
    for (std::size_t i = 0; i < recording.n_channels(); ++i) {
        if (kinds.contains(recording.channels()[i].kind)) {
            keep.push_back(static_cast<Eigen::Index>(i));
            channels.push_back(recording.channels()[i]);
        }
    }
    if (keep.empty()) {
        std::string wanted;
        for (auto k : kinds) wanted += (wanted.empty() ? "" : ",") + std::string(to_string(k));
        throw DataError("no channels of kind {" + wanted + "} in recording");
    }
    SampleMatrix data(static_cast<Eigen::Index>(keep.size()), recording.data().cols());
    for (std::size_t r = 0; r < keep.size(); ++r) {
        data.row(static_cast<Eigen::Index>(r)) = recording.data().row(keep[r]);
    }
    return Recording(recording.sample_rate(), std::move(channels), std::move(data));
}

}  // namespace megphone
