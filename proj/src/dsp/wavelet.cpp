#include "megphone/dsp/wavelet.hpp"

#include "megphone/error.hpp"

#include <algorithm>

namespace megphone {

const std::array<double, 8> Db4::dec_lo = {
    -0.010597401785069032, 0.0328830116668852,  0.030841381835560764, -0.18703481171909309,
    -0.027983769416859854, 0.6308807679298589,  0.7148465705529157,   0.2303778133088965};
const std::array<double, 8> Db4::dec_hi = {
    -0.2303778133088965,  0.7148465705529157,   -0.6308807679298589, -0.027983769416859854,
    0.18703481171909309,  0.030841381835560764, -0.0328830116668852, -0.010597401785069032};
const std::array<double, 8> Db4::rec_lo = {
    0.2303778133088965,   0.7148465705529157,   0.6308807679298589, -0.027983769416859854,
    -0.18703481171909309, 0.030841381835560764, 0.0328830116668852, -0.010597401785069032};
const std::array<double, 8> Db4::rec_hi = {
    -0.010597401785069032, -0.0328830116668852, 0.030841381835560764, 0.18703481171909309,
    -0.027983769416859854, -0.6308807679298589, 0.7148465705529157,   -0.2303778133088965};

namespace {

constexpr std::ptrdiff_t kTaps = 8;

// Half-sample symmetric extension: x[-1] = x[0], x[n] = x[n-1].
double extended(std::span<const double> x, std::ptrdiff_t i) {
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return x[static_cast<std::size_t>(i)];
}

std::vector<double> analysis(std::span<const double> x, const std::array<double, 8>& filter) {
    const auto n = static_cast<std::ptrdiff_t>(x.size());
    const std::ptrdiff_t out_len = (n + kTaps - 1) / 2;
    std::vector<double> out(static_cast<std::size_t>(out_len));
    for (std::ptrdiff_t k = 0; k < out_len; ++k) {
        double acc = 0.0;
        const std::ptrdiff_t base = 2 * k + 1;
        if (base - (kTaps - 1) >= 0 && base < n) {
            for (std::ptrdiff_t j = 0; j < kTaps; ++j) acc += filter[j] * x[static_cast<std::size_t>(base - j)];
        } else {
            for (std::ptrdiff_t j = 0; j < kTaps; ++j) acc += filter[j] * extended(x, base - j);
        }
        out[static_cast<std::size_t>(k)] = acc;
    }
    return out;
}

// Valid part of (upsample(c) * filter): y[m + 6] for m in [0, 2M - 6).
void synthesis_add(std::span<const double> c, const std::array<double, 8>& filter, std::vector<double>& out) {
    const auto m = static_cast<std::ptrdiff_t>(c.size());
    const std::ptrdiff_t out_len = 2 * m - kTaps + 2;
    for (std::ptrdiff_t o = 0; o < out_len; ++o) {
        const std::ptrdiff_t n = o + kTaps - 2;
        double acc = 0.0;
        // y[n] = sum_k c[k] f[n - 2k] with 0 <= n - 2k < 8.
        const std::ptrdiff_t k_lo = std::max<std::ptrdiff_t>(0, (n - kTaps + 2) / 2);
        const std::ptrdiff_t k_hi = std::min<std::ptrdiff_t>(m - 1, n / 2);
        for (std::ptrdiff_t k = k_lo; k <= k_hi; ++k) {
            const std::ptrdiff_t t = n - 2 * k;
            if (t >= 0 && t < kTaps) acc += c[static_cast<std::size_t>(k)] * filter[static_cast<std::size_t>(t)];
        }
        out[static_cast<std::size_t>(o)] += acc;
    }
}

std::vector<double> truncated(std::vector<double> v, std::size_t n) {
    v.resize(n);
    return v;
}

}  // namespace

DwtCoefficients dwt_db4(std::span<const double> x) {
    if (x.empty()) throw DataError("dwt of an empty signal");
    return {analysis(x, Db4::dec_lo), analysis(x, Db4::dec_hi)};
}

std::vector<double> idwt_db4(std::span<const double> approx, std::span<const double> detail) {
    const std::size_t m = std::max(approx.size(), detail.size());
    if (!approx.empty() && !detail.empty() && approx.size() != detail.size())
        throw DataError("idwt: approximation and detail lengths differ");
    if (m < 4) throw DataError("idwt: need at least 4 coefficients");
    std::vector<double> out(2 * m - kTaps + 2, 0.0);
    if (!approx.empty()) synthesis_add(approx, Db4::rec_lo, out);
    if (!detail.empty()) synthesis_add(detail, Db4::rec_hi, out);
    return out;
}

WaveletDecomposition wavelet_decompose(std::span<const double> s) {
    if (s.size() < static_cast<std::size_t>(kTaps))
        throw DataError("wavelet decomposition needs at least 8 samples, got " + std::to_string(s.size()));
    const std::size_t n = s.size();
    const auto level1 = dwt_db4(s);
    const auto level2 = dwt_db4(level1.approx);
    const std::size_t n1 = level1.approx.size();

    WaveletDecomposition parts;
    parts.a1 = truncated(idwt_db4(level1.approx, {}), n);
    parts.d1 = truncated(idwt_db4({}, level1.detail), n);
    parts.a2 = truncated(idwt_db4(truncated(idwt_db4(level2.approx, {}), n1), {}), n);
    parts.d2 = truncated(idwt_db4(truncated(idwt_db4({}, level2.detail), n1), {}), n);
    return parts;
}

std::vector<double> wavelet_reconstruct(const WaveletDecomposition& parts) {
    std::vector<double> s(parts.a2.size());
    for (std::size_t i = 0; i < s.size(); ++i) s[i] = parts.a2[i] + parts.d2[i] + parts.d1[i];
    return s;
}

std::vector<double> wavelet_denoise(std::span<const double> s) {
    if (s.size() < static_cast<std::size_t>(kTaps))
        throw DataError("wavelet denoising needs at least 8 samples, got " + std::to_string(s.size()));
    const auto level1 = dwt_db4(s);
    const auto level2 = dwt_db4(level1.approx);
    return truncated(idwt_db4(truncated(idwt_db4(level2.approx, {}), level1.approx.size()), {}), s.size());
}

Recording wavelet_denoise(const Recording& recording) {
    SampleMatrix data(recording.data().rows(), recording.data().cols());
    std::vector<double> x(recording.n_samples());
    for (std::size_t c = 0; c < recording.n_channels(); ++c) {
        const auto src = recording.channel(c);
        std::copy(src.begin(), src.end(), x.begin());
        const auto y = wavelet_denoise(x);
        float* dst = data.row(static_cast<Eigen::Index>(c)).data();
        for (std::size_t i = 0; i < y.size(); ++i) dst[i] = static_cast<float>(y[i]);
    }
    return Recording(recording.sample_rate(), recording.channels(), std::move(data));
}

}  // namespace megphone
