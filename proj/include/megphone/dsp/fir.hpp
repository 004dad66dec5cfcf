#pragma once

#include "megphone/dataio.hpp"

#include <optional>
#include <span>
#include <vector>

namespace megphone {

struct FirDesign {
    std::optional<double> lo;  // pass-band lower edge (Hz); none for low-pass
    std::optional<double> hi;  // pass-band upper edge (Hz); none for high-pass
    double fs = 0.0;
    double transition_lo = 0.0;  // 0 when the edge is absent
    double transition_hi = 0.0;
};

// Linear-phase FIR: odd length, coefficients symmetric about the centre tap.
struct FirFilter {
    std::vector<double> coefficients;
    FirDesign design;

    std::size_t length() const { return coefficients.size(); }
    std::size_t delay() const { return (coefficients.size() - 1) / 2; }
};

// Automatic transition bandwidth for a pass-band edge: min(max(0.25 f, 2 Hz), f).
double transition_bandwidth(double edge_hz);

// Hamming-windowed sinc design. Each pass-band edge gets its own transition
// band lying entirely outside the pass band: the -6 dB point sits half a
// transition width beyond the edge, so the stop band begins one full
// transition width past it. The upper transition is additionally capped at
// Nyquist - hi. Length is ceil(3.3 fs / min transition), rounded up to odd.
//
// lo only   -> high-pass, hi only -> low-pass, both -> band-pass.
// Throws ConfigError for hi >= Nyquist, lo <= 0, lo >= hi or no edges at all.
FirFilter design_fir(std::optional<double> lo, std::optional<double> hi, double fs);

// Zero-phase application: the signal is reflect-padded by (length-1)/2 samples
// on both sides, convolved once with the symmetric kernel and cropped so that
// the kernel centre lines up with each input sample. Output has the input length.
// Throws DataError if the signal is not longer than the filter.
std::vector<double> apply_zero_phase(const FirFilter& filter, std::span<const double> x);

// Zero-phase filtering of every channel of a recording.
Recording filter_recording(const Recording& recording, const FirFilter& filter);

// Anti-alias low-pass at 0.5 fs / factor (the design_fir low-pass), then keep
// every factor-th sample starting at index 0. factor == 1 returns the input.
// Throws ConfigError for factor < 1 and DataError if fewer than 2 samples remain.
Recording decimate(const Recording& recording, int factor = 10);

}  // namespace megphone
