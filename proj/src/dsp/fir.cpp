#include "megphone/dsp/fir.hpp"

#include "dsp/fft.hpp"
#include "megphone/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace megphone {

namespace {

constexpr std::size_t kDirectConvolutionMaxTaps = 129;

// Unit-DC-gain Hamming-windowed sinc low-pass with -6 dB point at cutoff.
std::vector<double> windowed_sinc(double cutoff, double fs, std::size_t length) {
    const std::size_t m = (length - 1) / 2;
    const double fc = cutoff / fs;
    std::vector<double> h(length);
    for (std::size_t n = 0; n <= m; ++n) {
        const double k = static_cast<double>(n) - static_cast<double>(m);
        const double sinc = (k == 0.0) ? 2.0 * fc
                                       : std::sin(2.0 * std::numbers::pi * fc * k) / (std::numbers::pi * k);
        const double window =
            0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                   static_cast<double>(length - 1));
        h[n] = sinc * window;
        h[length - 1 - n] = h[n];
    }
    double sum = 0.0;
    for (double v : h) sum += v;
    for (double& v : h) v /= sum;
    return h;
}

std::vector<double> reflect_pad(std::span<const double> x, std::size_t pad) {
    const std::size_t n = x.size();
    std::vector<double> padded(n + 2 * pad);
    for (std::size_t i = 0; i < pad; ++i) padded[i] = x[pad - i];
    std::copy(x.begin(), x.end(), padded.begin() + static_cast<std::ptrdiff_t>(pad));
    for (std::size_t j = 0; j < pad; ++j) padded[pad + n + j] = x[n - 2 - j];
    return padded;
}

void check_length(const FirFilter& filter, std::size_t n) {
    if (n <= filter.length())
        throw DataError("signal of " + std::to_string(n) + " samples is shorter than the " +
                        std::to_string(filter.length()) + "-tap filter");
}

// Zero-phase filtering with a reusable FFT convolver for equal-length signals.
class ZeroPhaseFilter {
public:
    ZeroPhaseFilter(const FirFilter& filter, std::size_t signal_length) : filter_(filter), n_(signal_length) {
        check_length(filter, n_);
        if (filter.length() > kDirectConvolutionMaxTaps) {
            convolver_.emplace(filter.coefficients, n_ + 2 * filter.delay());
            full_.resize(convolver_->output_length());
        }
    }

    void apply(std::span<const double> x, std::span<double> out) {
        const std::size_t m = filter_.delay();
        const auto padded = reflect_pad(x, m);
        if (convolver_) {
            convolver_->convolve(padded, full_);
            // full[i] = sum_k h[k] padded[i-k]; output n aligns with padded[n + m] = x[n].
            for (std::size_t i = 0; i < n_; ++i) out[i] = full_[i + 2 * m];
        } else {
            const auto& h = filter_.coefficients;
            for (std::size_t i = 0; i < n_; ++i) {
                double acc = 0.0;
                const double* p = padded.data() + i + 2 * m;
                for (std::size_t k = 0; k < h.size(); ++k) acc += h[k] * p[-static_cast<std::ptrdiff_t>(k)];
                out[i] = acc;
            }
        }
    }

private:
    const FirFilter& filter_;
    std::size_t n_;
    std::optional<detail::FftConvolver> convolver_;
    std::vector<double> full_;
};

}  // namespace

double transition_bandwidth(double edge_hz) { return std::min(std::max(0.25 * edge_hz, 2.0), edge_hz); }

FirFilter design_fir(std::optional<double> lo, std::optional<double> hi, double fs) {
    if (!(fs > 0.0)) throw ConfigError("sampling rate must be positive");
    const double nyquist = fs / 2.0;
    if (!lo && !hi) throw ConfigError("FIR design needs at least one pass-band edge");
    if (lo && !(*lo > 0.0)) throw ConfigError("band-pass lower edge must be > 0 Hz");
    if (hi && !(*hi > 0.0)) throw ConfigError("upper edge must be > 0 Hz");
    if (hi && *hi >= nyquist)
        throw ConfigError("upper edge " + std::to_string(*hi) + " Hz is not below Nyquist (" +
                          std::to_string(nyquist) + " Hz)");
    if (lo && *lo >= nyquist) throw ConfigError("lower edge is not below Nyquist");
    if (lo && hi && *lo >= *hi) throw ConfigError("lower edge must be below upper edge");

    FirDesign design{lo, hi, fs, 0.0, 0.0};
    double narrowest = std::numeric_limits<double>::infinity();
    if (lo) {
        design.transition_lo = transition_bandwidth(*lo);
        narrowest = std::min(narrowest, design.transition_lo);
    }
    if (hi) {
        design.transition_hi = std::min(transition_bandwidth(*hi), nyquist - *hi);
        narrowest = std::min(narrowest, design.transition_hi);
    }

    auto length = static_cast<std::size_t>(std::ceil(3.3 * fs / narrowest));
    if (length % 2 == 0) ++length;
    length = std::max<std::size_t>(length, 3);

    std::vector<double> h(length, 0.0);
    if (hi) {
        h = windowed_sinc(*hi + design.transition_hi / 2.0, fs, length);
    } else {
        h[(length - 1) / 2] = 1.0;  // all-pass, the high-pass is delta - low-pass
    }
    if (lo) {
        const auto low = windowed_sinc(*lo - design.transition_lo / 2.0, fs, length);
        for (std::size_t i = 0; i < length; ++i) h[i] -= low[i];
    }
    return FirFilter{std::move(h), design};
}

std::vector<double> apply_zero_phase(const FirFilter& filter, std::span<const double> x) {
    ZeroPhaseFilter zp(filter, x.size());
    std::vector<double> out(x.size());
    zp.apply(x, out);
    return out;
}

Recording filter_recording(const Recording& recording, const FirFilter& filter) {
    const std::size_t n = recording.n_samples();
    ZeroPhaseFilter zp(filter, n);
    SampleMatrix data(recording.data().rows(), recording.data().cols());
    std::vector<double> in(n), out(n);
    for (std::size_t c = 0; c < recording.n_channels(); ++c) {
        const auto src = recording.channel(c);
        std::copy(src.begin(), src.end(), in.begin());
        zp.apply(in, out);
        float* dst = data.row(static_cast<Eigen::Index>(c)).data();
        for (std::size_t i = 0; i < n; ++i) dst[i] = static_cast<float>(out[i]);
    }
    return Recording(recording.sample_rate(), recording.channels(), std::move(data));
}

Recording decimate(const Recording& recording, int factor) {
    if (factor < 1) throw ConfigError("decimation factor must be >= 1");
    if (factor == 1) return recording;
    const std::size_t n_out = (recording.n_samples() + static_cast<std::size_t>(factor) - 1) /
                              static_cast<std::size_t>(factor);
    if (n_out < 2) throw DataError("decimation by " + std::to_string(factor) + " leaves fewer than 2 samples");

    const double fs = recording.sample_rate();
    const auto antialias = design_fir(std::nullopt, 0.5 * fs / factor, fs);
    const Recording filtered = filter_recording(recording, antialias);

    SampleMatrix data(recording.data().rows(), static_cast<Eigen::Index>(n_out));
    for (Eigen::Index c = 0; c < data.rows(); ++c) {
        for (std::size_t i = 0; i < n_out; ++i) {
            data(c, static_cast<Eigen::Index>(i)) =
                filtered.data()(c, static_cast<Eigen::Index>(i * static_cast<std::size_t>(factor)));
        }
    }
    return Recording(fs / factor, recording.channels(), std::move(data));
}

}  // namespace megphone
