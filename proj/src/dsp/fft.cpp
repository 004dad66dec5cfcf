#include "dsp/fft.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cstring>
#include <mutex>
#include <stdexcept>

namespace megphone::detail {

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct RealBuffer {
    explicit RealBuffer(std::size_t n) : data(fftw_alloc_real(n)) {
        if (!data) throw std::bad_alloc();
    }
    ~RealBuffer() { fftw_free(data); }
    RealBuffer(const RealBuffer&) = delete;
    RealBuffer& operator=(const RealBuffer&) = delete;
    double* data;
};

struct ComplexBuffer {
    explicit ComplexBuffer(std::size_t n) : data(fftw_alloc_complex(n)) {
        if (!data) throw std::bad_alloc();
    }
    ~ComplexBuffer() { fftw_free(data); }
    ComplexBuffer(const ComplexBuffer&) = delete;
    ComplexBuffer& operator=(const ComplexBuffer&) = delete;
    fftw_complex* data;
};

struct Plan {
    explicit Plan(fftw_plan p) : plan(p) {
        if (!plan) throw std::runtime_error("FFTW planning failed");
    }
    ~Plan() {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    Plan(const Plan&) = delete;
    Plan& operator=(const Plan&) = delete;
    fftw_plan plan;
};

fftw_plan make_r2c(std::size_t n, double* in, fftw_complex* out) {
    std::lock_guard lock(planner_mutex());
    return fftw_plan_dft_r2c_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
}

fftw_plan make_c2r(std::size_t n, fftw_complex* in, double* out) {
    std::lock_guard lock(planner_mutex());
    return fftw_plan_dft_c2r_1d(static_cast<int>(n), in, out, FFTW_ESTIMATE);
}

}  // namespace

std::size_t good_fft_size(std::size_t min_size) {
    std::size_t n = std::max<std::size_t>(min_size, 1);
    while (true) {
        std::size_t m = n;
        for (std::size_t p : {2, 3, 5}) {
            while (m % p == 0) m /= p;
        }
        if (m == 1) return n;
        ++n;
    }
}

std::vector<std::complex<double>> rfft(std::span<const double> x, std::size_t n) {
    if (x.size() > n) throw std::invalid_argument("rfft: input longer than transform size");
    RealBuffer in(n);
    ComplexBuffer out(n / 2 + 1);
    Plan plan(make_r2c(n, in.data, out.data));
    std::fill(in.data, in.data + n, 0.0);
    std::copy(x.begin(), x.end(), in.data);
    fftw_execute(plan.plan);
    std::vector<std::complex<double>> result(n / 2 + 1);
    for (std::size_t k = 0; k < result.size(); ++k) result[k] = {out.data[k][0], out.data[k][1]};
    return result;
}

std::vector<double> irfft(std::span<const std::complex<double>> spectrum, std::size_t n) {
    if (spectrum.size() != n / 2 + 1) throw std::invalid_argument("irfft: spectrum size mismatch");
    ComplexBuffer in(n / 2 + 1);
    RealBuffer out(n);
    Plan plan(make_c2r(n, in.data, out.data));
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
        in.data[k][0] = spectrum[k].real();
        in.data[k][1] = spectrum[k].imag();
    }
    fftw_execute(plan.plan);
    std::vector<double> result(out.data, out.data + n);
    const double scale = 1.0 / static_cast<double>(n);
    for (auto& v : result) v *= scale;
    return result;
}

FftConvolver::FftConvolver(std::span<const double> kernel, std::size_t signal_length)
    : signal_length_(signal_length),
      kernel_length_(kernel.size()),
      n_(good_fft_size(signal_length + kernel.size() - 1)) {
    if (kernel.empty() || signal_length == 0) throw std::invalid_argument("FftConvolver: empty input");
    time_ = fftw_alloc_real(n_);
    auto* freq = fftw_alloc_complex(n_ / 2 + 1);
    auto* kfreq = fftw_alloc_complex(n_ / 2 + 1);
    freq_ = freq;
    kernel_freq_ = kfreq;
    {
        std::lock_guard lock(planner_mutex());
        forward_ = fftw_plan_dft_r2c_1d(static_cast<int>(n_), time_, freq, FFTW_ESTIMATE);
        backward_ = fftw_plan_dft_c2r_1d(static_cast<int>(n_), freq, time_, FFTW_ESTIMATE);
    }
    std::fill(time_, time_ + n_, 0.0);
    std::copy(kernel.begin(), kernel.end(), time_);
    fftw_execute(static_cast<fftw_plan>(forward_));
    std::memcpy(kfreq, freq, sizeof(fftw_complex) * (n_ / 2 + 1));
}

FftConvolver::~FftConvolver() {
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(static_cast<fftw_plan>(forward_));
        fftw_destroy_plan(static_cast<fftw_plan>(backward_));
    }
    fftw_free(time_);
    fftw_free(freq_);
    fftw_free(kernel_freq_);
}

void FftConvolver::convolve(std::span<const double> signal, std::span<double> out) {
    if (signal.size() != signal_length_ || out.size() != output_length())
        throw std::invalid_argument("FftConvolver: size mismatch");
    std::fill(time_, time_ + n_, 0.0);
    std::copy(signal.begin(), signal.end(), time_);
    fftw_execute(static_cast<fftw_plan>(forward_));
    auto* freq = static_cast<fftw_complex*>(freq_);
    const auto* kfreq = static_cast<const fftw_complex*>(kernel_freq_);
    for (std::size_t k = 0; k < n_ / 2 + 1; ++k) {
        const double re = freq[k][0] * kfreq[k][0] - freq[k][1] * kfreq[k][1];
        const double im = freq[k][0] * kfreq[k][1] + freq[k][1] * kfreq[k][0];
        freq[k][0] = re;
        freq[k][1] = im;
    }
    fftw_execute(static_cast<fftw_plan>(backward_));
    const double scale = 1.0 / static_cast<double>(n_);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = time_[i] * scale;
}

}  // namespace megphone::detail
