#pragma once

#include "megphone/dataio.hpp"

#include <array>
#include <span>
#include <vector>

namespace megphone {

// Daubechies-4 analysis/synthesis filters (8 taps).
struct Db4 {
    static const std::array<double, 8> dec_lo;
    static const std::array<double, 8> dec_hi;
    static const std::array<double, 8> rec_lo;
    static const std::array<double, 8> rec_hi;
};

struct DwtCoefficients {
    std::vector<double> approx;
    std::vector<double> detail;
};

// One db4 analysis step with half-sample symmetric boundary extension.
// Produces floor((n + 7) / 2) coefficients per band.
DwtCoefficients dwt_db4(std::span<const double> x);

// One synthesis step; returns 2 * size - 6 samples (the caller trims to length).
// Either band may be empty, which is treated as all-zero coefficients.
std::vector<double> idwt_db4(std::span<const double> approx, std::span<const double> detail);

// Two-level decomposition expressed as signal-domain components, each the same
// length as the input: s = a1 + d1 = a2 + d2 + d1.
struct WaveletDecomposition {
    std::vector<double> a1;
    std::vector<double> d1;
    std::vector<double> a2;
    std::vector<double> d2;
};

// Throws DataError for signals shorter than 8 samples.
WaveletDecomposition wavelet_decompose(std::span<const double> s);

// a2 + d2 + d1.
std::vector<double> wavelet_reconstruct(const WaveletDecomposition& parts);

// Keeps only the level-2 approximation a2 (equivalently s - d1 - d2).
std::vector<double> wavelet_denoise(std::span<const double> s);

// wavelet_denoise applied to every channel.
Recording wavelet_denoise(const Recording& recording);

}  // namespace megphone
