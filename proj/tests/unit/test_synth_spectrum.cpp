#include <doctest.h>

#include "megphone/synth.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <complex>
#include <numbers>

using namespace megphone;

namespace {

constexpr double kPi = std::numbers::pi;

// Share of the energy of x lying in lo..hi Hz (both signs of frequency),
// from the DFT bins in the band and Parseval for the total.
double band_fraction(const Eigen::RowVectorXd& x, double fs, double lo, double hi) {
    const auto n = static_cast<double>(x.size());
    const double total = x.squaredNorm();
    double in_band = 0.0;
    const auto k0 = static_cast<long>(std::ceil(lo * n / fs));
    const auto k1 = static_cast<long>(std::floor(hi * n / fs));
    for (long k = k0; k <= k1; ++k) {
        std::complex<double> acc = 0.0;
        for (Eigen::Index t = 0; t < x.size(); ++t)
            acc += x(t) * std::polar(1.0, -2.0 * kPi * static_cast<double>(k) * static_cast<double>(t) / n);
        in_band += 2.0 * std::norm(acc) / n;
    }
    return in_band / total;
}

// Largest share of energy any real sequence of `length` samples can place in
// lo..hi Hz: top eigenvalue of the band-limiting kernel restricted to the window.
double concentration_bound(int length, double fs, double lo, double hi) {
    Eigen::MatrixXd A(length, length);
    for (int m = 0; m < length; ++m)
        for (int n = 0; n < length; ++n) {
            const double d = m - n;
            A(m, n) = d == 0 ? 2.0 * (hi - lo) / fs
                             : (std::sin(2.0 * kPi * hi / fs * d) - std::sin(2.0 * kPi * lo / fs * d)) / (kPi * d);
        }
    return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(A, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff();
}

}  // namespace

TEST_CASE("excess power of a Theta corpus concentrates in 4-7 Hz") {
    SynthSpec spec;
    spec.phones = {{"a", 60}, {"l", 60}};
    spec.snr = 2.0;
    spec.band = Band::theta;
    spec.seed = 3;
    const auto present = generate_components(spec);
    SynthSpec quiet = spec;
    quiet.snr = 0.0;
    const auto absent = generate_components(quiet);
    REQUIRE(present.noise == absent.noise);

    double fraction = 0.0;
    const int probes = 4;
    for (int i = 0; i < probes; ++i) {
        const int ch = present.active_channels[static_cast<std::size_t>(i)];
        const Eigen::RowVectorXd excess = (present.noise + present.planted).row(ch) - absent.noise.row(ch);
        fraction += band_fraction(excess, spec.fs, 4.0, 7.0) / probes;
    }
    const int length = static_cast<int>(std::lround(spec.template_duration * spec.fs));
    const double bound = concentration_bound(length, spec.fs, 4.0, 7.0);
    MESSAGE("measured 4-7 Hz share of excess power: " << fraction);
    MESSAGE("upper bound for any " << length << "-sample response: " << bound);
    CHECK(fraction >= 0.80);
}
