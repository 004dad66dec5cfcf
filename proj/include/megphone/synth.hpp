#pragma once

#include "megphone/dataio.hpp"
#include "megphone/dsp/bands.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace megphone {

struct SynthSpec {
    int n_channels = 204;     // gradiometers
    int n_magnetometers = 0;  // appended after the gradiometers
    double fs = 1000.0;
    double duration = 0.0;  // seconds; 0 picks the shortest length that fits the events
    std::vector<std::pair<std::string, int>> phones;
    double snr = 2.0;  // planted RMS / noise RMS on every active channel
    Band band = Band::theta;
    double active_fraction = 0.25;
    std::uint64_t seed = 0;

    double template_duration = 0.2;  // planted response, seconds after onset
    double event_duration = 0.08;    // offset - onset written to the event table
    double slot = 0.35;              // minimum onset-to-onset spacing
    double lead = 0.15;              // quiet time before the first onset
};

struct SynthComponents {
    Eigen::MatrixXd noise;    // channels x samples, unit RMS per channel
    Eigen::MatrixXd planted;  // channels x samples, zero outside event templates
    std::vector<ChannelInfo> channels;
    EventTable events;
    std::vector<int> active_channels;
    std::vector<Eigen::VectorXd> patterns;  // per label (sorted label order), +-1 on active channels
    std::vector<std::string> labels;        // sorted distinct labels
    std::vector<Eigen::VectorXd> templates;  // per label, unit RMS
};

// Throws ConfigError for invalid specs: no phones, counts < 1, negative snr,
// active_fraction outside (0, 1], band edge at or above Nyquist, or events that
// do not fit in the requested duration.
void validate(const SynthSpec& spec);

// Background: per-channel Gaussian noise shaped to a 1/f amplitude spectrum,
// scaled to unit RMS. Each label gets a fixed random +-1 pattern over a shared
// set of active channels (patterns of different labels have cosine < 0.9) and a
// fixed Hann-tapered sum of three in-band sinusoids spanning the template
// duration after onset, scaled so its RMS equals snr. Events are shuffled and
// laid out sequentially with random extra spacing. Fully determined by the seed.
SynthComponents generate_components(const SynthSpec& spec);

// noise + planted as a Recording, plus its event table.
std::pair<Recording, EventTable> generate(const SynthSpec& spec);

SynthSpec synth_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynthSpec& spec);

}  // namespace megphone
