// SPDX-License-Identifier: Apache-2.0
//
// Precoder construction (frequency-flat phase, true-time-delay, near-field
// focusing) and array response sweeps over angle/distance/frequency grids.

#pragma once

#include <limits>

#include "radioloc/channel.hpp"

namespace radioloc {

enum class PrecoderKind { phase, time_delay, near_field_focus };

struct Precoder {
    PrecoderKind kind = PrecoderKind::phase;
    Angles target;
    double focus_distance = std::numeric_limits<double>::infinity();
    std::vector<Eigen::VectorXcd> coeffs;  // per subcarrier index; size 1 if flat

    const Eigen::VectorXcd &at(int n_idx) const {
        return coeffs.size() == 1 ? coeffs[0] : coeffs[n_idx];
    }
};

// Phase precoders conjugate the carrier-frequency steering vector; time-delay
// precoders conjugate the per-subcarrier steering vector (equivalently,
// per-element delays tau_p applied across the band); near-field focus
// precoders conjugate the curvature response at the focus point at the
// carrier. All are unit-norm per subcarrier.
inline Precoder make_precoder(const ArrayGeometry &arr, const SpectralGrid &grid,
                              PrecoderKind kind, const Angles &target,
                              double focus_distance =
                                  std::numeric_limits<double>::infinity()) {
    Precoder f;
    f.kind = kind;
    f.target = target;
    f.focus_distance = focus_distance;
    const double inv_sqrt_p = 1.0 / std::sqrt(double(arr.size()));
    switch (kind) {
        case PrecoderKind::phase:
            f.coeffs = {steering_vector(arr, target, grid.wavelength()).conjugate() *
                        inv_sqrt_p};
            break;
        case PrecoderKind::time_delay:
            for (int n_idx = 0; n_idx < grid.n_subcarriers; ++n_idx) {
                const double lambda = grid.wavelength_at(grid.subcarrier(n_idx));
                f.coeffs.push_back(steering_vector(arr, target, lambda).conjugate() *
                                   inv_sqrt_p);
            }
            break;
        case PrecoderKind::near_field_focus: {
            if (!std::isfinite(focus_distance))
                throw ConfigError("make_precoder: near_field_focus needs a focus distance");
            const Eigen::Vector3d focus =
                arr.center + arr.orientation * unit_from_angles(target) * focus_distance;
            f.coeffs = {near_field_response(arr, focus, grid.wavelength()).conjugate() *
                        inv_sqrt_p};
            break;
        }
    }
    return f;
}

// Model response used when sweeping: far field unless the near-field flag is
// set and the probe distance is finite.
inline Eigen::VectorXcd model_response(const ArrayGeometry &arr, const Angles &dir,
                                       double distance, double lambda,
                                       const ModelFlags &flags) {
    if (flags.near_field && std::isfinite(distance)) {
        const Eigen::Vector3d src =
            arr.center + arr.orientation * unit_from_angles(dir) * distance;
        return near_field_response(arr, src, lambda);
    }
    return steering_vector(arr, dir, lambda);
}

// |f_n^H a(angle, distance, lambda_n)|^2 in dB for one probe point.
inline double response_power(const ArrayGeometry &arr, const SpectralGrid &grid,
                             const Precoder &f, int n_idx, const Angles &dir,
                             double distance, const ModelFlags &flags) {
    const double lambda = flags.beam_squint
                              ? grid.wavelength_at(grid.subcarrier(n_idx))
                              : grid.wavelength();
    const Eigen::VectorXcd a = model_response(arr, dir, distance, lambda, flags);
    // transmit response a^T f (no conjugation of the array response)
    const Complex v = (a.transpose() * f.at(n_idx)).value();
    return std::norm(v);
}

struct ResponseGrid {
    std::vector<double> azimuths;
    std::vector<double> distances = {std::numeric_limits<double>::infinity()};
    std::vector<int> subcarrier_indices = {0};  // indices into the grid, 0-based
};

// Response map over (azimuth) x (distance, subcarrier), normalized so the
// global peak is 0 dB. Column ordering: distance-major, subcarrier-minor.
inline Eigen::MatrixXd response_map(const ArrayGeometry &arr,
                                    const SpectralGrid &grid, const Precoder &f,
                                    const ResponseGrid &probe,
                                    const ModelFlags &flags) {
    if (probe.azimuths.empty() || probe.distances.empty() ||
        probe.subcarrier_indices.empty())
        throw ValidationError("response_map: empty probe grid");
    const int rows = static_cast<int>(probe.azimuths.size());
    const int cols =
        static_cast<int>(probe.distances.size() * probe.subcarrier_indices.size());
    Eigen::MatrixXd map(rows, cols);
    for (int i = 0; i < rows; ++i) {
        const Angles dir{probe.azimuths[i], 0.0};
        int c = 0;
        for (double d : probe.distances)
            for (int n_idx : probe.subcarrier_indices)
                map(i, c++) = response_power(arr, grid, f, n_idx, dir, d, flags);
    }
    const double peak = map.maxCoeff();
    if (peak <= 0.0) throw NumericalError("response_map: all-zero response");
    return (10.0 * (map.array() / peak).log10()).matrix();
}

// Golden-section refinement of the response peak in azimuth.
inline double peak_response_azimuth(const ArrayGeometry &arr,
                                    const SpectralGrid &grid, const Precoder &f,
                                    int n_idx, double az_lo, double az_hi,
                                    const ModelFlags &flags,
                                    double distance =
                                        std::numeric_limits<double>::infinity()) {
    const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = az_lo, b = az_hi;
    double c = b - gr * (b - a), d = a + gr * (b - a);
    auto val = [&](double az) {
        return response_power(arr, grid, f, n_idx, Angles{az, 0.0}, distance, flags);
    };
    double fc = val(c), fd = val(d);
    for (int it = 0; it < 120 && (b - a) > 1e-12; ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - gr * (b - a);
            fc = val(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + gr * (b - a);
            fd = val(d);
        }
    }
    return 0.5 * (a + b);
}

// Sweep defaults: 721 azimuths over (-pi/2, pi/2), log-spaced distances
// 0.5-100 m.
inline std::vector<double> default_azimuth_grid(int n = 721) {
    std::vector<double> az(n);
    for (int i = 0; i < n; ++i)
        az[i] = -kPi / 2 + (i + 1) * kPi / (n + 1);
    return az;
}

inline std::vector<double> default_distance_grid(int n = 200, double lo = 0.5,
                                                 double hi = 100.0) {
    std::vector<double> d(n);
    for (int i = 0; i < n; ++i)
        d[i] = lo * std::pow(hi / lo, double(i) / (n - 1));
    return d;
}

}  // namespace radioloc
