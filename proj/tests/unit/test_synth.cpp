#include <doctest.h>

#include "megphone/epochs.hpp"
#include "megphone/error.hpp"
#include "megphone/eval.hpp"
#include "megphone/synth.hpp"
#include "support.hpp"

#include <cmath>
#include <complex>
#include <cstring>
#include <numbers>

using namespace megphone;

namespace {

SynthSpec small_spec(std::uint64_t seed) {
    SynthSpec s;
    s.n_channels = 20;
    s.phones = {{"a", 15}, {"l", 12}};
    s.seed = seed;
    return s;
}

bool same_bits(const Recording& a, const Recording& b) {
    return a.data().size() == b.data().size() &&
           std::memcmp(a.data().data(), b.data().data(), sizeof(float) * a.data().size()) == 0;
}

// Power of x at frequency f via a direct DFT sum.
double power_at(const Eigen::RowVectorXd& x, double f, double fs) {
    std::complex<double> acc = 0.0;
    for (Eigen::Index n = 0; n < x.size(); ++n)
        acc += x(n) * std::polar(1.0, -2.0 * std::numbers::pi * f * static_cast<double>(n) / fs);
    return std::norm(acc) / static_cast<double>(x.size());
}

}  // namespace

TEST_CASE("same seed gives identical output") {
    for (std::uint64_t seed : {0u, 1u, 99u}) {
        const auto [r1, e1] = generate(small_spec(seed));
        const auto [r2, e2] = generate(small_spec(seed));
        CHECK(same_bits(r1, r2));
        CHECK(r1.channels() == r2.channels());
        CHECK(e1 == e2);
    }
    const auto [a, ea] = generate(small_spec(1));
    const auto [b, eb] = generate(small_spec(2));
    CHECK_FALSE(same_bits(a, b));
}

TEST_CASE("events fit, never overlap and keep a 50 ms gap") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        auto spec = small_spec(seed);
        spec.duration = seed % 2 ? 30.0 : 0.0;
        const auto c = generate_components(spec);
        const auto& rows = c.events.rows();
        REQUIRE(rows.size() == 27);
        std::map<std::string, int> counts;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            counts[rows[i].label]++;
            CHECK(rows[i].offset - rows[i].onset == doctest::Approx(spec.event_duration));
            CHECK(rows[i].onset >= spec.lead - 1e-12);
            if (i > 0) {
                CHECK(rows[i].onset - rows[i - 1].offset >= 0.05 - 1e-9);
                CHECK(rows[i].onset - rows[i - 1].onset >= spec.template_duration - 1e-9);
            }
        }
        CHECK(counts["a"] == 15);
        CHECK(counts["l"] == 12);
        const double length = static_cast<double>(c.noise.cols()) / spec.fs;
        CHECK(rows.back().onset + spec.template_duration <= length);
        if (spec.duration > 0) CHECK(length == doctest::Approx(30.0));
    }
}

TEST_CASE("patterns are distinct and templates are in band") {
    auto spec = small_spec(4);
    spec.n_channels = 100;
    spec.phones = {{"a", 3}, {"e", 3}, {"i", 3}, {"o", 3}};
    const auto c = generate_components(spec);
    REQUIRE(c.patterns.size() == 4);
    CHECK(c.labels == std::vector<std::string>{"a", "e", "i", "o"});
    CHECK(c.active_channels.size() == 25);
    for (std::size_t i = 0; i < 4; ++i) {
        for (int ch = 0; ch < 100; ++ch) {
            const bool active = std::find(c.active_channels.begin(), c.active_channels.end(), ch) != c.active_channels.end();
            const double v = c.patterns[i](ch);
            CHECK((active ? std::abs(v) == 1.0 : v == 0.0));
        }
        for (std::size_t j = 0; j < i; ++j) {
            const double cosine = c.patterns[i].dot(c.patterns[j]) / (c.patterns[i].norm() * c.patterns[j].norm());
            CHECK(cosine < 0.9);
        }
        const auto& t = c.templates[i];
        CHECK(t.size() == 200);
        CHECK(std::sqrt(t.squaredNorm() / static_cast<double>(t.size())) == doctest::Approx(1.0));
    }
}

TEST_CASE("planted to noise RMS matches the requested snr") {
    for (double snr : {0.5, 2.0, 3.0}) {
        auto spec = small_spec(7);
        spec.snr = snr;
        const auto c = generate_components(spec);
        const auto template_len = static_cast<Eigen::Index>(std::lround(spec.template_duration * spec.fs));
        for (int ch : c.active_channels) {
            double planted = 0.0;
            Eigen::Index count = 0;
            for (const auto& e : c.events.rows()) {
                const auto start = static_cast<Eigen::Index>(std::lround(e.onset * spec.fs));
                planted += c.planted.row(ch).segment(start, template_len).squaredNorm();
                count += template_len;
            }
            const double planted_rms = std::sqrt(planted / static_cast<double>(count));
            const double noise_rms = std::sqrt(c.noise.row(ch).squaredNorm() / static_cast<double>(c.noise.cols()));
            CHECK(std::abs(planted_rms / noise_rms / snr - 1.0) <= 0.05);
        }
        // Inactive channels carry nothing.
        for (int ch = 0; ch < spec.n_channels; ++ch)
            if (std::find(c.active_channels.begin(), c.active_channels.end(), ch) == c.active_channels.end())
                CHECK(c.planted.row(ch).isZero(0.0));
    }
}

TEST_CASE("zero snr is pure noise") {
    auto spec = small_spec(8);
    spec.snr = 0.0;
    const auto c = generate_components(spec);
    CHECK(c.planted.isZero(0.0));
    const auto [rec, events] = generate(spec);
    for (Eigen::Index ch = 0; ch < c.noise.rows(); ++ch)
        for (Eigen::Index t = 0; t < c.noise.cols(); ++t)
            CHECK(rec.data()(ch, t) == static_cast<float>(c.noise(ch, t)));
}

TEST_CASE("pure noise decodes at chance") {
    auto spec = small_spec(9);
    spec.n_channels = 30;
    spec.snr = 0.0;
    spec.phones = {{"a", 60}, {"l", 60}};
    const auto [rec, events] = generate(spec);
    const auto set = extract_epochs(rec, events);
    const auto ds = build_pair_dataset(set.epochs, "a", "l", 1);
    const auto ev = evaluate(ModelSpec::preset("elastic_net"), ds, kfold(ds.y, 5, 0));
    CHECK(std::abs(ev.mean.accuracy - 0.5) <= 0.1);
}

TEST_CASE("background has a 1/f amplitude spectrum") {
    auto spec = small_spec(10);
    spec.snr = 0.0;
    spec.duration = 20.0;
    const auto c = generate_components(spec);
    // Least-squares slope of log power against log frequency, averaged over channels.
    std::vector<double> freqs{2, 4, 8, 16, 32, 64, 128, 256};
    std::vector<double> logp(freqs.size(), 0.0);
    for (Eigen::Index ch = 0; ch < 8; ++ch)
        for (std::size_t k = 0; k < freqs.size(); ++k) {
            double p = 0.0;
            for (double df : {-0.3, -0.2, -0.1, 0.0, 0.1, 0.2, 0.3}) p += power_at(c.noise.row(ch), freqs[k] + df, spec.fs);
            logp[k] += std::log(p) / 8.0;
        }
    double mx = 0, my = 0;
    for (std::size_t k = 0; k < freqs.size(); ++k) {
        mx += std::log(freqs[k]) / freqs.size();
        my += logp[k] / freqs.size();
    }
    double sxy = 0, sxx = 0;
    for (std::size_t k = 0; k < freqs.size(); ++k) {
        sxy += (std::log(freqs[k]) - mx) * (logp[k] - my);
        sxx += (std::log(freqs[k]) - mx) * (std::log(freqs[k]) - mx);
    }
    CHECK(sxy / sxx == doctest::Approx(-2.0).epsilon(0.15));
    for (Eigen::Index ch = 0; ch < c.noise.rows(); ++ch)
        CHECK(std::sqrt(c.noise.row(ch).squaredNorm() / c.noise.cols()) == doctest::Approx(1.0));
}

TEST_CASE("channel layout") {
    auto spec = small_spec(11);
    spec.n_magnetometers = 5;
    const auto [rec, events] = generate(spec);
    CHECK(rec.n_channels() == 25);
    CHECK(rec.channels()[19].kind == ChannelKind::gradiometer);
    CHECK(rec.channels()[20].kind == ChannelKind::magnetometer);
    CHECK(rec.sample_rate() == 1000.0);
}

TEST_CASE("invalid specs") {
    auto bad = [](auto edit) {
        auto s = small_spec(0);
        edit(s);
        return s;
    };
    CHECK_THROWS_AS(validate(bad([](SynthSpec& s) { s.phones.clear(); })), ConfigError);
    CHECK_THROWS_AS(validate(bad([](SynthSpec& s) { s.phones[0].second = 0; })), ConfigError);
    CHECK_THROWS_AS(validate(bad([](SynthSpec& s) { s.snr = -1; })), ConfigError);
    CHECK_THROWS_AS(validate(bad([](SynthSpec& s) { s.active_fraction = 0; })), ConfigError);
    CHECK_THROWS_AS(validate(bad([](SynthSpec& s) { s.active_fraction = 1.5; })), ConfigError);
    CHECK_THROWS_AS(validate(bad([](SynthSpec& s) { s.duration = 1.0; })), ConfigError);
    CHECK_THROWS_AS(validate(bad([](SynthSpec& s) {
                        s.fs = 400;
                        s.band = Band::hga;
                    })),
                    ConfigError);
    CHECK_NOTHROW(validate(small_spec(0)));
}

TEST_CASE("synth settings JSON round trip") {
    auto spec = small_spec(12);
    spec.band = Band::beta;
    spec.n_magnetometers = 3;
    const auto back = synth_spec_from_json(to_json(spec));
    CHECK(to_json(back) == to_json(spec));
    CHECK(back.band == Band::beta);
    CHECK_THROWS_AS(synth_spec_from_json(nlohmann::json{{"phones", {{"a", 3}}}, {"colour", "red"}}), ConfigError);
}
