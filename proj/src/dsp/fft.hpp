#pragma once

// Thin FFTW wrappers. Plans are created with FFTW_ESTIMATE on fftw_malloc'd
// buffers: planning is then a pure function of the transform size, which keeps
// results bit-identical between runs. Planner calls are serialized because the
// FFTW planner is not thread-safe.

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace megphone::detail {

// Smallest n >= min_size whose only prime factors are 2, 3 and 5.
std::size_t good_fft_size(std::size_t min_size);

// Real-to-complex transform of x zero-padded to n; returns n/2 + 1 bins.
std::vector<std::complex<double>> rfft(std::span<const double> x, std::size_t n);

// Inverse of rfft for a length-n signal, including the 1/n normalization.
std::vector<double> irfft(std::span<const std::complex<double>> spectrum, std::size_t n);

// Linear convolution of many signals with one fixed kernel via FFT.
class FftConvolver {
public:
    FftConvolver(std::span<const double> kernel, std::size_t signal_length);
    ~FftConvolver();
    FftConvolver(const FftConvolver&) = delete;
    FftConvolver& operator=(const FftConvolver&) = delete;

    // Full linear convolution; out must hold signal_length + kernel_length - 1 values.
    void convolve(std::span<const double> signal, std::span<double> out);

    std::size_t output_length() const { return signal_length_ + kernel_length_ - 1; }

private:
    std::size_t signal_length_;
    std::size_t kernel_length_;
    std::size_t n_;
    double* time_ = nullptr;
    void* freq_ = nullptr;
    void* kernel_freq_ = nullptr;
    void* forward_ = nullptr;
    void* backward_ = nullptr;
};

}  // namespace megphone::detail
