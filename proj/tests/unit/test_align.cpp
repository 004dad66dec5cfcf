#include <doctest.h>

#include "megphone/align.hpp"
#include "megphone/error.hpp"
#include "support.hpp"

#include <cmath>
#include <numbers>

using namespace megphone;
using megphone::testing::Gen;

namespace {

// Speech-like audio: a carrier gated by random syllable-length bursts.
std::vector<double> speech_like(Gen& gen, std::size_t n, double fs) {
    std::vector<double> x(n, 0.0);
    std::size_t t = 0;
    while (t < n) {
        const auto burst = static_cast<std::size_t>(gen.uniform(0.08, 0.3) * fs);
        const auto pause = static_cast<std::size_t>(gen.uniform(0.05, 0.4) * fs);
        const double amp = gen.uniform(0.3, 1.0);
        for (std::size_t i = 0; i < burst && t + i < n; ++i) {
            const double w = std::sin(std::numbers::pi * static_cast<double>(i) / static_cast<double>(burst));
            x[t + i] = amp * w * gen.normal();
        }
        t += burst + pause;
    }
    return x;
}

// misc[t] = audio[t - shift] (zero outside) plus noise at the requested SNR in dB.
std::vector<double> delayed(Gen& gen, const std::vector<double>& audio, long shift, double snr_db) {
    std::vector<double> misc(audio.size(), 0.0);
    double power = 0.0;
    for (double v : audio) power += v * v;
    power /= static_cast<double>(audio.size());
    const double noise_sd = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
    for (long t = 0; t < static_cast<long>(misc.size()); ++t) {
        const long s = t - shift;
        misc[static_cast<std::size_t>(t)] =
            (s >= 0 && s < static_cast<long>(audio.size()) ? audio[static_cast<std::size_t>(s)] : 0.0) +
            noise_sd * gen.normal();
    }
    return misc;
}

}  // namespace

TEST_CASE("self alignment") {
    Gen gen(1);
    const auto audio = speech_like(gen, 20000, 1000.0);
    const auto r = align(audio, audio, 1000.0, 2.0);
    CHECK(r.delay == 0.0);
    CHECK(r.peak_correlation == doctest::Approx(1.0));
    CHECK_FALSE(r.low_confidence);
    CHECK(r.iterations.size() == 4);
}

TEST_CASE("planted 1.234 s delay at 10 dB SNR") {
    const double fs = 1000.0;
    for (std::uint64_t seed : {2u, 3u, 4u}) {
        Gen gen(seed);
        const auto audio = speech_like(gen, 60000, fs);
        const auto misc = delayed(gen, audio, 1234, 10.0);
        const auto r = align(misc, audio, fs, 3.0);
        CHECK(std::abs(r.delay - 1.234) <= 1.0 / fs + 1e-12);
        CHECK_FALSE(r.low_confidence);
    }
}

TEST_CASE("shift equivariance property") {
    const double fs = 500.0;
    Gen gen(5);
    for (int trial = 0; trial < 8; ++trial) {
        const auto audio = speech_like(gen, 30000, fs);
        const long shift = gen.integer(-900, 900);
        const auto misc = delayed(gen, audio, shift, 20.0);
        const auto forward = align(misc, audio, fs, 2.0);
        const auto backward = align(audio, misc, fs, 2.0);
        CAPTURE(shift);
        CHECK(std::abs(forward.delay * fs - static_cast<double>(shift)) <= 1.0 + 1e-9);
        CHECK(std::abs(backward.delay * fs + static_cast<double>(shift)) <= 1.0 + 1e-9);
    }
}

TEST_CASE("refinement windows are nested and shrinking") {
    Gen gen(6);
    const auto audio = speech_like(gen, 40000, 1000.0);
    const auto misc = delayed(gen, audio, -700, 10.0);
    const auto r = align(misc, audio, 1000.0, 4.0);
    REQUIRE(r.iterations.size() == 4);
    for (std::size_t i = 1; i < r.iterations.size(); ++i) {
        const auto& prev = r.iterations[i - 1];
        const auto& cur = r.iterations[i];
        CHECK(cur.window_lo >= prev.window_lo);
        CHECK(cur.window_hi <= prev.window_hi);
        CHECK(cur.window_hi - cur.window_lo < prev.window_hi - prev.window_lo);
        CHECK(cur.delay_window < prev.delay_window);
        CHECK(cur.band_hi == doctest::Approx(2.0 * prev.band_hi));
    }
    CHECK(r.iterations[0].band_hi == 10.0);
}

TEST_CASE("uncorrelated noise is flagged") {
    double worst = 0.0;
    for (std::uint64_t seed = 100; seed < 120; ++seed) {
        Gen gen(seed);
        const auto audio = speech_like(gen, 30000, 1000.0);
        const auto noise = gen.normals(30000);
        const auto r = align(noise, audio, 1000.0, 2.0);
        worst = std::max(worst, r.peak_correlation);
        CHECK(r.low_confidence);
    }
    CHECK(worst < 0.2);
}

TEST_CASE("invalid alignment requests") {
    Gen gen(7);
    const auto audio = speech_like(gen, 5000, 1000.0);
    CHECK_THROWS_AS(align(audio, audio, 1000.0, 0.0), ConfigError);
    CHECK_THROWS_AS(align(audio, audio, 1000.0, 3.0), ConfigError);
    CHECK_THROWS_AS(align(std::vector<double>(5000, 1.0), audio, 1000.0, 1.0), DataError);
}
