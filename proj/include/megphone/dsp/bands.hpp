#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace megphone {

enum class Band { delta, theta, alpha, beta, gamma, hga };

struct BandSpec {
    Band band;
    std::string_view name;
    double lo;  // Hz
    double hi;  // Hz
};

// Delta 0.2-3, Theta 4-7, Alpha 8-13, Beta 14-31, Gamma 32-100, HGA 60-300 Hz.
const std::array<BandSpec, 6>& canonical_bands();

const BandSpec& band_spec(Band band);

// Case-insensitive lookup by name ("Theta", "hga", ...).
std::optional<Band> parse_band(std::string_view name);

}  // namespace megphone
