#include "megphone/align.hpp"

#include "dsp/fft.hpp"
#include "megphone/dsp/fir.hpp"
#include "megphone/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace megphone {

namespace {

std::vector<double> envelope(std::span<const double> x, double cutoff, double fs) {
    std::vector<double> rectified(x.size());
    std::transform(x.begin(), x.end(), rectified.begin(), [](double v) { return std::abs(v); });
    if (cutoff >= 0.5 * fs) return rectified;
    const FirFilter lowpass = design_fir(std::nullopt, cutoff, fs);
    if (x.size() <= lowpass.length())
        throw DataError("align: signal of " + std::to_string(x.size()) + " samples is too short for the " +
                        std::to_string(cutoff) + " Hz envelope filter");
    return apply_zero_phase(lowpass, rectified);
}

bool has_variance(const std::vector<double>& v) {
    double mean = 0.0;
    for (double s : v) mean += s;
    mean /= static_cast<double>(v.size());
    double ss = 0.0, scale = 0.0;
    for (double s : v) {
        ss += (s - mean) * (s - mean);
        scale += s * s;
    }
    return ss > 1e-20 * std::max(scale, 1e-300);
}

// Pearson correlation between misc[t] and audio[t - lag] over their overlap,
// for every lag in [lo, hi]. Cross products come from one FFT correlation,
// the marginal moments from prefix sums.
class LagCorrelator {
public:
    LagCorrelator(const std::vector<double>& misc, const std::vector<double>& audio)
        : nm_(static_cast<long>(misc.size())), na_(static_cast<long>(audio.size())) {
        std::vector<double> reversed(audio.rbegin(), audio.rend());
        detail::FftConvolver conv(reversed, misc.size());
        cross_.resize(conv.output_length());
        conv.convolve(misc, cross_);
        prefix(misc, m1_, m2_);
        prefix(audio, a1_, a2_);
    }

    double at(long lag) const {
        const long t0 = std::max(0L, lag);
        const long t1 = std::min(nm_, na_ + lag);
        const double n = static_cast<double>(t1 - t0);
        if (n < 2) return 0.0;
        const double sm = m1_[t1] - m1_[t0], smm = m2_[t1] - m2_[t0];
        const double sa = a1_[t1 - lag] - a1_[t0 - lag], saa = a2_[t1 - lag] - a2_[t0 - lag];
        const double sma = cross_[static_cast<std::size_t>(na_ - 1 + lag)];
        const double cov = sma - sm * sa / n;
        const double vm = smm - sm * sm / n;
        const double va = saa - sa * sa / n;
        if (vm <= 1e-12 * smm || va <= 1e-12 * saa) return 0.0;
        return std::clamp(cov / std::sqrt(vm * va), -1.0, 1.0);
    }

private:
    static void prefix(const std::vector<double>& x, std::vector<double>& s1, std::vector<double>& s2) {
        s1.assign(x.size() + 1, 0.0);
        s2.assign(x.size() + 1, 0.0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            s1[i + 1] = s1[i] + x[i];
            s2[i + 1] = s2[i] + x[i] * x[i];
        }
    }

    long nm_, na_;
    std::vector<double> cross_;
    std::vector<double> m1_, m2_, a1_, a2_;
};

}  // namespace

AlignmentResult align(std::span<const double> misc, std::span<const double> audio, double fs, double window,
                      const AlignOptions& options) {
    if (!(fs > 0.0) || !std::isfinite(fs)) throw ConfigError("align: sample rate must be positive");
    if (!(window > 0.0) || !std::isfinite(window)) throw ConfigError("align: window must be positive");
    if (options.stages < 1) throw ConfigError("align: at least one stage is required");
    const std::size_t shorter = std::min(misc.size(), audio.size());
    const long max_lag = std::lround(window * fs);
    if (shorter < 2 || 2 * max_lag > static_cast<long>(shorter))
        throw ConfigError("align: window of " + std::to_string(window) + " s exceeds half the shorter signal (" +
                          std::to_string(static_cast<double>(shorter) / fs) + " s)");

    AlignmentResult result;
    long lo = -max_lag, hi = max_lag;
    double half = static_cast<double>(max_lag);
    long estimate = 0;
    double cutoff = options.initial_cutoff;

    for (int stage = 0; stage < options.stages; ++stage) {
        if (stage > 0) {
            half *= 0.5;
            const long h = static_cast<long>(std::floor(half));
            lo = std::max(lo, estimate - h);
            hi = std::min(hi, estimate + h);
            cutoff *= 2.0;
        }
        const double band_hi = std::min(cutoff, 0.5 * fs);
        const auto env_misc = envelope(misc, cutoff, fs);
        const auto env_audio = envelope(audio, cutoff, fs);
        if (!has_variance(env_misc) || !has_variance(env_audio))
            throw DataError("align: zero variance in the " + std::to_string(band_hi) + " Hz envelope");

        const LagCorrelator corr(env_misc, env_audio);
        double best = -std::numeric_limits<double>::infinity();
        for (long lag = lo; lag <= hi; ++lag) {
            const double r = corr.at(lag);
            if (r > best || (r == best && std::labs(lag) < std::labs(estimate))) {
                best = r;
                estimate = lag;
            }
        }

        AlignmentStage trace;
        trace.window_lo = static_cast<double>(lo) / fs;
        trace.window_hi = static_cast<double>(hi) / fs;
        trace.delay_window = half / fs;
        trace.band_hi = band_hi;
        trace.delay_estimate = static_cast<double>(estimate) / fs;
        trace.correlation = best;
        result.iterations.push_back(trace);
    }

    result.delay = static_cast<double>(estimate) / fs;
    result.peak_correlation = result.iterations.back().correlation;
    result.low_confidence = result.peak_correlation < options.min_confidence;
    return result;
}

}  // namespace megphone
