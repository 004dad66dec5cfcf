#pragma once

#include "megphone/dataio.hpp"
#include "megphone/synth.hpp"
#include "support.hpp"

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>

namespace megphone::testing {

// Writes name.nrd, name.events.tsv and name.manifest.json under dir and returns
// the manifest path.
inline std::filesystem::path write_corpus(const std::filesystem::path& dir, const std::string& name,
                                          const std::string& subject, Task task, const SynthSpec& spec) {
    std::filesystem::create_directories(dir);
    const auto [recording, events] = generate(spec);
    const auto rec = dir / (name + ".nrd");
    const auto ev = dir / (name + ".events.tsv");
    save_recording(recording, rec);
    save_events(events, ev);
    const auto manifest = dir / (name + ".manifest.json");
    save_manifest({subject, task, rec, ev, recording.sample_rate()}, manifest);
    return manifest;
}

inline SynthSpec small_spec(std::uint64_t seed, double snr, int n_channels = 32) {
    SynthSpec spec;
    spec.n_channels = n_channels;
    spec.phones = {{"a", 40}, {"l", 40}};
    spec.snr = snr;
    spec.seed = seed;
    return spec;
}

// One recording holding a bursty audio channel and a MISC copy of it that
// trails by `shift` samples. Returns the recording path.
inline std::filesystem::path write_align_recording(const std::filesystem::path& dir, long shift, std::uint64_t seed,
                                                   double fs = 1000.0, double seconds = 20.0) {
    Gen gen(seed);
    const auto n = static_cast<Eigen::Index>(fs * seconds);
    Eigen::VectorXd audio = Eigen::VectorXd::Zero(n);
    for (Eigen::Index t = 0; t < n;) {
        const auto burst = static_cast<Eigen::Index>(gen.uniform(0.08, 0.3) * fs);
        const double amp = gen.uniform(0.3, 1.0);
        for (Eigen::Index i = 0; i < burst && t + i < n; ++i)
            audio(t + i) = amp * std::sin(std::numbers::pi * static_cast<double>(i) / static_cast<double>(burst)) *
                           gen.normal();
        t += burst + static_cast<Eigen::Index>(gen.uniform(0.05, 0.4) * fs);
    }
    SampleMatrix data(2, n);
    for (Eigen::Index t = 0; t < n; ++t) {
        const Eigen::Index s = t - shift;
        data(0, t) = static_cast<float>((s >= 0 && s < n ? audio(s) : 0.0) + 0.1 * gen.normal());
        data(1, t) = static_cast<float>(audio(t));
    }
    std::filesystem::create_directories(dir);
    const auto path = dir / "align.nrd";
    save_recording(Recording(fs, {{"MISC001", ChannelKind::misc, "V"}, {"AUDIO001", ChannelKind::audio, "V"}},
                             std::move(data)),
                   path);
    return path;
}

}  // namespace megphone::testing
