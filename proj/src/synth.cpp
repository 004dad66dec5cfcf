#include "megphone/synth.hpp"

#include "dsp/fft.hpp"
#include "megphone/error.hpp"
#include "megphone/random.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <numbers>
#include <numeric>

namespace megphone {

namespace {

constexpr double kNoiseFloorHz = 0.1;

std::size_t total_events(const SynthSpec& spec) {
    std::size_t n = 0;
    for (const auto& [label, count] : spec.phones) n += static_cast<std::size_t>(std::max(count, 0));
    return n;
}

double required_duration(const SynthSpec& spec) {
    return spec.lead + static_cast<double>(total_events(spec)) * spec.slot;
}

double effective_duration(const SynthSpec& spec) {
    return spec.duration > 0.0 ? spec.duration : required_duration(spec) + spec.lead;
}

Eigen::VectorXd pink_noise(std::size_t n, double fs, Rng& rng) {
    std::vector<double> white(n);
    for (auto& v : white) v = rng.normal();
    auto spectrum = detail::rfft(white, n);
    spectrum[0] = 0.0;
    for (std::size_t k = 1; k < spectrum.size(); ++k) {
        const double f = static_cast<double>(k) * fs / static_cast<double>(n);
        spectrum[k] /= std::max(f, kNoiseFloorHz);
    }
    const auto shaped = detail::irfft(spectrum, n);
    Eigen::VectorXd out = Eigen::Map<const Eigen::VectorXd>(shaped.data(), static_cast<Eigen::Index>(n));
    out.array() -= out.mean();
    const double rms = std::sqrt(out.squaredNorm() / static_cast<double>(n));
    if (rms > 0.0) out /= rms;
    return out;
}

Eigen::VectorXd make_template(std::size_t length, double fs, const BandSpec& band, Rng& rng) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(length));
    for (int component = 0; component < 3; ++component) {
        const double freq = rng.uniform(band.lo, band.hi);
        const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
        for (std::size_t t = 0; t < length; ++t)
            out(static_cast<Eigen::Index>(t)) += std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(t) / fs + phase);
    }
    for (std::size_t t = 0; t < length; ++t) {
        const double x = std::numbers::pi * static_cast<double>(t + 1) / static_cast<double>(length + 1);
        out(static_cast<Eigen::Index>(t)) *= std::sin(x) * std::sin(x);
    }
    const double rms = std::sqrt(out.squaredNorm() / static_cast<double>(length));
    return out / rms;
}

double cosine(const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return a.dot(b) / (a.norm() * b.norm()); }

}  // namespace

void validate(const SynthSpec& spec) {
    if (spec.n_channels < 0 || spec.n_magnetometers < 0 || spec.n_channels + spec.n_magnetometers < 1)
        throw ConfigError("synth: need at least one channel");
    if (!(spec.fs > 0.0) || !std::isfinite(spec.fs)) throw ConfigError("synth: fs must be positive");
    if (spec.phones.empty()) throw ConfigError("synth: no phones given");
    for (const auto& [label, count] : spec.phones) {
        if (label.empty()) throw ConfigError("synth: empty phone label");
        if (count < 1) throw ConfigError("synth: phone '" + label + "' needs a count >= 1");
    }
    if (!(spec.snr >= 0.0) || !std::isfinite(spec.snr)) throw ConfigError("synth: snr must be >= 0");
    if (!(spec.active_fraction > 0.0 && spec.active_fraction <= 1.0))
        throw ConfigError("synth: active_fraction must lie in (0, 1]");
    const auto& band = band_spec(spec.band);
    if (band.hi >= 0.5 * spec.fs)
        throw ConfigError("synth: band " + std::string(band.name) + " reaches " + std::to_string(band.hi) +
                          " Hz, at or above Nyquist for fs = " + std::to_string(spec.fs));
    if (!(spec.template_duration > 0.0) || !(spec.event_duration > 0.0) || !(spec.lead >= 0.0))
        throw ConfigError("synth: template, event duration and lead must be positive");
    if (spec.slot < spec.template_duration || spec.slot < spec.event_duration + 0.05)
        throw ConfigError("synth: slot must cover the template and leave a 50 ms gap between events");
    if (spec.duration < 0.0) throw ConfigError("synth: duration must be >= 0");
    if (spec.duration > 0.0 && spec.duration < required_duration(spec))
        throw ConfigError("synth: " + std::to_string(total_events(spec)) + " events need " +
                          std::to_string(required_duration(spec)) + " s, duration is " +
                          std::to_string(spec.duration) + " s");
}

SynthComponents generate_components(const SynthSpec& spec) {
    validate(spec);
    const double fs = spec.fs;
    const auto n_samples = static_cast<std::size_t>(std::llround(effective_duration(spec) * fs));
    const int n_total = spec.n_channels + spec.n_magnetometers;

    SynthComponents out;
    for (int c = 0; c < n_total; ++c) {
        char name[16];
        const bool grad = c < spec.n_channels;
        std::snprintf(name, sizeof name, grad ? "MEG%04d" : "MAG%04d", grad ? c + 1 : c - spec.n_channels + 1);
        out.channels.push_back({name, grad ? ChannelKind::gradiometer : ChannelKind::magnetometer, grad ? "T/m" : "T"});
    }

    Rng noise_rng(mix_seed(spec.seed, 1));
    Rng layout_rng(mix_seed(spec.seed, 2));
    Rng pattern_rng(mix_seed(spec.seed, 3));
    Rng template_rng(mix_seed(spec.seed, 4));

    out.noise.resize(n_total, static_cast<Eigen::Index>(n_samples));
    for (int c = 0; c < n_total; ++c) out.noise.row(c) = pink_noise(n_samples, fs, noise_rng).transpose();

    for (const auto& [label, count] : spec.phones) out.labels.push_back(label);
    std::sort(out.labels.begin(), out.labels.end());
    if (std::adjacent_find(out.labels.begin(), out.labels.end()) != out.labels.end())
        throw ConfigError("synth: duplicate phone label");

    std::vector<int> order(static_cast<std::size_t>(n_total));
    std::iota(order.begin(), order.end(), 0);
    pattern_rng.shuffle(order);
    const int n_active = std::max(1, static_cast<int>(std::lround(spec.active_fraction * n_total)));
    out.active_channels.assign(order.begin(), order.begin() + n_active);
    std::sort(out.active_channels.begin(), out.active_channels.end());

    for (std::size_t l = 0; l < out.labels.size(); ++l) {
        Eigen::VectorXd pattern;
        bool distinct = false;
        for (int attempt = 0; attempt < 1000 && !distinct; ++attempt) {
            pattern = Eigen::VectorXd::Zero(n_total);
            for (int c : out.active_channels) pattern(c) = pattern_rng.uniform() < 0.5 ? -1.0 : 1.0;
            distinct = std::all_of(out.patterns.begin(), out.patterns.end(),
                                   [&](const Eigen::VectorXd& other) { return cosine(pattern, other) < 0.9; });
        }
        if (!distinct) throw ConfigError("synth: cannot draw distinct spatial patterns over so few active channels");
        out.patterns.push_back(pattern);
    }

    const auto template_length = static_cast<std::size_t>(std::llround(spec.template_duration * fs));
    const auto& band = band_spec(spec.band);
    for (std::size_t l = 0; l < out.labels.size(); ++l)
        out.templates.push_back(make_template(template_length, fs, band, template_rng));

    std::vector<std::size_t> sequence;
    for (const auto& [label, count] : spec.phones) {
        const auto index = static_cast<std::size_t>(
            std::lower_bound(out.labels.begin(), out.labels.end(), label) - out.labels.begin());
        sequence.insert(sequence.end(), static_cast<std::size_t>(count), index);
    }
    layout_rng.shuffle(sequence);

    // Spread the spare time over the gaps before every event.
    const double slack = effective_duration(spec) - required_duration(spec) - spec.lead;
    std::vector<double> weights(sequence.size() + 1);
    for (auto& w : weights) w = layout_rng.uniform();
    const double weight_sum = std::accumulate(weights.begin(), weights.end(), 0.0);

    out.planted = Eigen::MatrixXd::Zero(n_total, static_cast<Eigen::Index>(n_samples));
    std::vector<Event> events;
    double cursor = spec.lead;
    for (std::size_t e = 0; e < sequence.size(); ++e) {
        cursor += std::max(slack, 0.0) * weights[e] / weight_sum;
        const auto start = std::llround(cursor * fs);
        const double onset = static_cast<double>(start) / fs;
        const std::size_t label = sequence[e];
        events.push_back({onset, onset + spec.event_duration, out.labels[label]});
        const auto& tmpl = out.templates[label];
        for (int c : out.active_channels) {
            const double gain = spec.snr * out.patterns[label](c);
            for (Eigen::Index t = 0; t < tmpl.size() && start + t < static_cast<long long>(n_samples); ++t)
                out.planted(c, start + t) += gain * tmpl(t);
        }
        cursor = onset + spec.slot;
    }
    out.events = EventTable(std::move(events));
    return out;
}

std::pair<Recording, EventTable> generate(const SynthSpec& spec) {
    auto parts = generate_components(spec);
    SampleMatrix data = (parts.noise + parts.planted).cast<float>();
    return {Recording(spec.fs, std::move(parts.channels), std::move(data)), std::move(parts.events)};
}

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("synth spec must be a JSON object");
    SynthSpec spec;
    try {
        for (auto it = j.begin(); it != j.end(); ++it) {
            const auto& key = it.key();
            const auto& v = it.value();
            if (key == "n_channels") spec.n_channels = v.get<int>();
            else if (key == "n_magnetometers") spec.n_magnetometers = v.get<int>();
            else if (key == "fs") spec.fs = v.get<double>();
            else if (key == "duration") spec.duration = v.get<double>();
            else if (key == "snr") spec.snr = v.get<double>();
            else if (key == "active_fraction") spec.active_fraction = v.get<double>();
            else if (key == "seed") spec.seed = v.get<std::uint64_t>();
            else if (key == "template_duration") spec.template_duration = v.get<double>();
            else if (key == "event_duration") spec.event_duration = v.get<double>();
            else if (key == "slot") spec.slot = v.get<double>();
            else if (key == "lead") spec.lead = v.get<double>();
            else if (key == "band") {
                const auto band = parse_band(v.get<std::string>());
                if (!band) throw ConfigError("synth: unknown band '" + v.get<std::string>() + "'");
                spec.band = *band;
            } else if (key == "phones") {
                spec.phones.clear();
                if (v.is_object()) {
                    for (auto p = v.begin(); p != v.end(); ++p) spec.phones.emplace_back(p.key(), p.value().get<int>());
                } else {
                    for (const auto& row : v) {
                        if (row.is_array() && row.size() == 2)
                            spec.phones.emplace_back(row[0].get<std::string>(), row[1].get<int>());
                        else
                            spec.phones.emplace_back(row.at("label").get<std::string>(), row.at("count").get<int>());
                    }
                }
            } else {
                throw ConfigError("synth: unknown field '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("synth spec: ") + e.what());
    }
    validate(spec);
    return spec;
}

nlohmann::json to_json(const SynthSpec& spec) {
    nlohmann::json phones = nlohmann::json::array();
    for (const auto& [label, count] : spec.phones) phones.push_back({label, count});
    return {{"n_channels", spec.n_channels},
            {"n_magnetometers", spec.n_magnetometers},
            {"fs", spec.fs},
            {"duration", spec.duration},
            {"phones", phones},
            {"snr", spec.snr},
            {"band", band_spec(spec.band).name},
            {"active_fraction", spec.active_fraction},
            {"seed", spec.seed},
            {"template_duration", spec.template_duration},
            {"event_duration", spec.event_duration},
            {"slot", spec.slot},
            {"lead", spec.lead}};
}

}  // namespace megphone
