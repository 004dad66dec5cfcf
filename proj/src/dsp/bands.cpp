#include "megphone/dsp/bands.hpp"

#include <algorithm>
#include <cctype>
#include <string>

namespace megphone {

const std::array<BandSpec, 6>& canonical_bands() {
    static const std::array<BandSpec, 6> table = {{
        {Band::delta, "Delta", 0.2, 3.0},
        {Band::theta, "Theta", 4.0, 7.0},
        {Band::alpha, "Alpha", 8.0, 13.0},
        {Band::beta, "Beta", 14.0, 31.0},
        {Band::gamma, "Gamma", 32.0, 100.0},
        {Band::hga, "HGA", 60.0, 300.0},
    }};
    return table;
}

const BandSpec& band_spec(Band band) { return canonical_bands()[static_cast<std::size_t>(band)]; }

std::optional<Band> parse_band(std::string_view name) {
    auto lower = [](std::string_view s) {
        std::string out(s);
        std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
        return out;
    };
    const auto wanted = lower(name);
    for (const auto& spec : canonical_bands()) {
        if (lower(spec.name) == wanted) return spec.band;
    }
    return std::nullopt;
}

}  // namespace megphone
