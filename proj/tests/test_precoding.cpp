// SPDX-License-Identifier: Apache-2.0

#include <catch2/catch_amalgamated.hpp>

#include "radioloc/precoding.hpp"

using namespace radioloc;

namespace {

SpectralGrid wide_grid() { return {28e9, 6.25e6, 64, 1.0 / 6.25e6, 1}; }

ArrayGeometry big_ula(const SpectralGrid &g) {
    return ArrayGeometry::ula(64, g.wavelength() / 2);
}

}  // namespace

TEST_CASE("phase precoder reaches full array gain at the carrier") {
    const SpectralGrid g = wide_grid();
    const ArrayGeometry arr = big_ula(g);
    const Angles target{kPi / 4, 0.0};
    const Precoder f = make_precoder(arr, g, PrecoderKind::phase, target);
    const int n0 = g.n_subcarriers / 2;  // subcarrier n = 0
    const double p = response_power(arr, g, f, n0, target, 1e9, {});
    REQUIRE(p == Catch::Approx(64.0).epsilon(1e-12));
}

TEST_CASE("time-delay precoder reaches full gain on every subcarrier") {
    const SpectralGrid g = wide_grid();
    const ArrayGeometry arr = big_ula(g);
    const Angles target{kPi / 4, 0.0};
    const Precoder f = make_precoder(arr, g, PrecoderKind::time_delay, target);
    ModelFlags flags;
    flags.beam_squint = true;
    for (int n_idx = 0; n_idx < g.n_subcarriers; ++n_idx) {
        const double p = response_power(arr, g, f, n_idx, target, 1e9, flags);
        REQUIRE(p == Catch::Approx(64.0).epsilon(1e-9));
    }
}

TEST_CASE("time-delay response at the target is flat across the band") {
    const SpectralGrid g = wide_grid();
    const ArrayGeometry arr = big_ula(g);
    const Angles target{1.1, 0.0};
    const Precoder f = make_precoder(arr, g, PrecoderKind::time_delay, target);
    ModelFlags flags;
    flags.beam_squint = true;
    double lo = 1e300, hi = 0.0;
    for (int n_idx = 0; n_idx < g.n_subcarriers; ++n_idx) {
        const double p = response_power(arr, g, f, n_idx, target, 1e9, flags);
        lo = std::min(lo, p);
        hi = std::max(hi, p);
    }
    REQUIRE(10.0 * std::log10(hi / lo) < 0.1);
}

TEST_CASE("band-edge peak of a phase precoder shifts by the predicted angle") {
    const SpectralGrid g = wide_grid();
    const ArrayGeometry arr = big_ula(g);
    const double target = kPi / 4;
    const Precoder f = make_precoder(arr, g, PrecoderKind::phase, Angles{target, 0.0});
    ModelFlags flags;
    flags.beam_squint = true;
    for (int n_idx : {0, g.n_subcarriers - 1}) {
        const double f_n = g.subcarrier_freq(g.subcarrier(n_idx));
        const double predicted = std::acos(std::cos(target) * g.f_c / f_n);
        const double peak = peak_response_azimuth(arr, g, f, n_idx, target - 0.05,
                                                  target + 0.05, flags);
        REQUIRE(peak == Catch::Approx(predicted).margin(1e-4));
    }
}

TEST_CASE("squint displacement grows with subcarrier offset and vanishes at center") {
    const SpectralGrid g = wide_grid();
    const ArrayGeometry arr = big_ula(g);
    const double target = kPi / 4;
    const Precoder f = make_precoder(arr, g, PrecoderKind::phase, Angles{target, 0.0});
    ModelFlags flags;
    flags.beam_squint = true;
    double prev = -1.0;
    for (int n : {0, 8, 16, 24, 31}) {
        const int n_idx = g.n_subcarriers / 2 + n;
        const double peak = peak_response_azimuth(arr, g, f, n_idx, target - 0.05,
                                                  target + 0.05, flags);
        const double shift = std::abs(peak - target);
        if (n == 0)
            REQUIRE(shift < 1e-6);
        else
            REQUIRE(shift > prev);
        prev = shift;
    }
}

TEST_CASE("far-field response map is distance independent") {
    const SpectralGrid g = wide_grid();
    const ArrayGeometry arr = big_ula(g);
    const Precoder f = make_precoder(arr, g, PrecoderKind::phase, Angles{0.9, 0.0});
    ResponseGrid probe;
    probe.azimuths = default_azimuth_grid(181);
    probe.distances = {1.0, 10.0, 100.0};
    probe.subcarrier_indices = {g.n_subcarriers / 2};
    const Eigen::MatrixXd map = response_map(arr, g, f, probe, {});
    for (int i = 0; i < map.rows(); ++i) {
        REQUIRE(map(i, 0) == Catch::Approx(map(i, 1)).margin(1e-9));
        REQUIRE(map(i, 0) == Catch::Approx(map(i, 2)).margin(1e-9));
    }
}

TEST_CASE("far-field precoder loses over 3 dB at close range") {
    const SpectralGrid g = wide_grid();
    const ArrayGeometry arr = big_ula(g);
    // broadside, where the wavefront curvature across the aperture is largest
    const Angles target{kPi / 2, 0.0};
    const double dist = 2.8;
    ModelFlags nf;
    nf.near_field = true;
    const Precoder ff = make_precoder(arr, g, PrecoderKind::phase, target);
    const Precoder focus =
        make_precoder(arr, g, PrecoderKind::near_field_focus, target, dist);
    const int n0 = g.n_subcarriers / 2;
    const double p_ff = response_power(arr, g, ff, n0, target, dist, nf);
    const double p_nf = response_power(arr, g, focus, n0, target, dist, nf);
    REQUIRE(p_nf == Catch::Approx(64.0).epsilon(1e-9));
    REQUIRE(10.0 * std::log10(p_nf / p_ff) > 3.0);
}

TEST_CASE("focusing precoder peaks at the focus distance") {
    const SpectralGrid g = wide_grid();
    const ArrayGeometry arr = big_ula(g);
    const Angles target{kPi / 4, 0.0};
    const Precoder focus =
        make_precoder(arr, g, PrecoderKind::near_field_focus, target, 2.8);
    ModelFlags nf;
    nf.near_field = true;
    const std::vector<double> dists = default_distance_grid(200);
    const int n0 = g.n_subcarriers / 2;
    int best = -1;
    double best_v = -1.0;
    for (size_t i = 0; i < dists.size(); ++i) {
        const double v = response_power(arr, g, focus, n0, target, dists[i], nf);
        if (v > best_v) {
            best_v = v;
            best = static_cast<int>(i);
        }
    }
    // within one log-grid cell of 2.8 m
    REQUIRE(dists[std::max(0, best - 1)] <= 2.8);
    REQUIRE(dists[std::min<int>(dists.size() - 1, best + 1)] >= 2.8);
}

TEST_CASE("single-element response map is flat zero dB") {
    const SpectralGrid g = wide_grid();
    ArrayGeometry arr;  // one element at the center
    const Precoder f = make_precoder(arr, g, PrecoderKind::phase, Angles{0.3, 0.0});
    ResponseGrid probe;
    probe.azimuths = default_azimuth_grid(91);
    const Eigen::MatrixXd map = response_map(arr, g, f, probe, {});
    REQUIRE(map.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("missing focus distance is rejected") {
    const SpectralGrid g = wide_grid();
    REQUIRE_THROWS_AS(
        make_precoder(big_ula(g), g, PrecoderKind::near_field_focus, Angles{0.0, 0.0}),
        ConfigError);
}
