#pragma once

#include <span>
#include <vector>

namespace megphone {

struct AlignmentStage {
    double window_lo = 0.0;       // searched delay interval (s)
    double window_hi = 0.0;
    double delay_window = 0.0;    // half-width of the searched interval (s)
    double band_hi = 0.0;         // envelope low-pass cutoff (Hz)
    double delay_estimate = 0.0;  // s
    double correlation = 0.0;     // Pearson correlation at the estimate
};

struct AlignmentResult {
    // misc[t] ~ audio[t - delay]: a positive delay means the MISC channel trails
    // the audio file, so audio-time annotations map to MEG time as t + delay.
    double delay = 0.0;
    double peak_correlation = 0.0;
    bool low_confidence = false;
    std::vector<AlignmentStage> iterations;
};

struct AlignOptions {
    int stages = 4;
    double initial_cutoff = 10.0;      // Hz, doubled at every refinement
    double min_confidence = 0.2;       // peak correlations below this are flagged
};

// Coarse-to-fine delay estimation between the MISC channel copy of the audio
// and the audio itself, both sampled at fs. Stage 1 correlates |x| envelopes
// low-passed at 10 Hz over +-window; each further stage halves the delay
// window around the current estimate (clipped to the previous window) and
// doubles the envelope cutoff, capped at Nyquist.
//
// Throws ConfigError for window <= 0 or window beyond half the shorter signal,
// DataError if either envelope has zero variance in an analysis band.
AlignmentResult align(std::span<const double> misc, std::span<const double> audio, double fs, double window,
                      const AlignOptions& options = {});

}  // namespace megphone
