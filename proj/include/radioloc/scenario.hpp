// SPDX-License-Identifier: Apache-2.0
//
// Core domain types for geometric radio localization: spectral grid, array
// geometry, propagation paths, RIS panels, clocks, and the full Scenario.
// All types are immutable after construction and safe to share across threads.

#pragma once

#include <cmath>
#include <complex>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace radioloc {

inline constexpr double kSpeedOfLight = 299792458.0;  // m/s
inline constexpr double kPi = 3.14159265358979323846;

using Complex = std::complex<double>;

// ---------------------------------------------------------------------------
// Errors

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct GeometryError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Angles and direction vectors.
//
// Convention: azimuth in (-pi, pi], elevation in [-pi/2, pi/2],
// u(az, el) = (cos el cos az, cos el sin az, sin el) in the local frame.

struct Angles {
    double az = 0.0;
    double el = 0.0;
};

inline Eigen::Vector3d unit_from_angles(const Angles &a) {
    const double ce = std::cos(a.el);
    return {ce * std::cos(a.az), ce * std::sin(a.az), std::sin(a.el)};
}

inline Angles angles_from_unit(const Eigen::Vector3d &u) {
    Angles a;
    a.az = std::atan2(u.y(), u.x());
    a.el = std::asin(std::clamp(u.z() / u.norm(), -1.0, 1.0));
    return a;
}

// d(u)/d(az), d(u)/d(el) at the given angles.
inline Eigen::Vector3d unit_daz(const Angles &a) {
    const double ce = std::cos(a.el);
    return {-ce * std::sin(a.az), ce * std::cos(a.az), 0.0};
}

inline Eigen::Vector3d unit_del(const Angles &a) {
    const double se = std::sin(a.el);
    return {-se * std::cos(a.az), -se * std::sin(a.az), std::cos(a.el)};
}

// Jacobian of (az, el) with respect to an unnormalized direction vector g.
// Row 0 = d az/d g, row 1 = d el/d g.
inline Eigen::Matrix<double, 2, 3> angle_jacobian(const Eigen::Vector3d &g) {
    const double r = g.norm();
    const double rho2 = g.x() * g.x() + g.y() * g.y();
    Eigen::Matrix<double, 2, 3> J;
    J.row(0) << -g.y() / rho2, g.x() / rho2, 0.0;
    const double rho = std::sqrt(rho2);
    // el = asin(z/r): d el/d g = (1/(r^2 rho)) * (-z*gx, -z*gy, rho^2 ... )
    J.row(1) << -g.x() * g.z() / (r * r * rho), -g.y() * g.z() / (r * r * rho),
        rho / (r * r);
    return J;
}

inline Eigen::Matrix3d skew(const Eigen::Vector3d &v) {
    Eigen::Matrix3d S;
    S << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return S;
}

// Rodrigues exponential of a rotation increment.
inline Eigen::Matrix3d rotation_exp(const Eigen::Vector3d &w) {
    const double t = w.norm();
    if (t < 1e-14) return Eigen::Matrix3d::Identity() + skew(w);
    const Eigen::Vector3d axis = w / t;
    return Eigen::AngleAxisd(t, axis).toRotationMatrix();
}

// ---------------------------------------------------------------------------
// SpectralGrid: OFDM time-frequency raster. Subcarrier index n runs over the
// symmetric set {-N/2, ..., N/2 - 1} so the carrier sits at the grid center.

struct SpectralGrid {
    double f_c = 0.0;       // carrier frequency [Hz]
    double delta_f = 0.0;   // subcarrier spacing [Hz]
    int n_subcarriers = 0;  // count, indexed n
    double T_s = 0.0;       // symbol duration [s]
    int n_symbols = 1;      // count, indexed k

    double bandwidth() const { return n_subcarriers * delta_f; }
    double wavelength() const { return kSpeedOfLight / f_c; }

    int subcarrier(int idx) const { return idx - n_subcarriers / 2; }
    double subcarrier_freq(int n) const { return f_c + n * delta_f; }
    double wavelength_at(int n) const { return kSpeedOfLight / subcarrier_freq(n); }

    void validate() const {
        if (!(f_c > 0)) throw ValidationError("grid: f_c must be > 0");
        if (!(delta_f > 0)) throw ValidationError("grid: delta_f must be > 0");
        if (n_subcarriers < 1) throw ValidationError("grid: n_subcarriers must be >= 1");
        if (n_symbols < 1) throw ValidationError("grid: n_symbols must be >= 1");
        if (!(bandwidth() < f_c))
            throw ValidationError("grid: bandwidth W = N*delta_f must be < f_c");
        if (T_s < 1.0 / delta_f - 1e-15)
            throw ValidationError("grid: T_s must be >= 1/delta_f");
    }
};

// ---------------------------------------------------------------------------
// ArrayGeometry: phase-reference center, orientation (local -> global), and
// element offsets in the local frame. Gain pattern maps a local-frame
// direction to a linear power gain; default isotropic (G = 1).

using GainPattern = std::function<double(const Angles &)>;

struct ArrayGeometry {
    Eigen::Vector3d center = Eigen::Vector3d::Zero();
    Eigen::Matrix3d orientation = Eigen::Matrix3d::Identity();
    std::vector<Eigen::Vector3d> element_offsets = {Eigen::Vector3d::Zero()};
    GainPattern gain_pattern;  // empty => isotropic

    int size() const { return static_cast<int>(element_offsets.size()); }

    double gain(const Angles &local_dir) const {
        return gain_pattern ? gain_pattern(local_dir) : 1.0;
    }

    Eigen::Vector3d element_position(int p) const {
        return center + orientation * element_offsets[p];
    }

    // Largest element distance from the phase center.
    double aperture_radius() const {
        double r = 0.0;
        for (const auto &o : element_offsets) r = std::max(r, o.norm());
        return r;
    }

    // Direction toward a global point, expressed in the local frame.
    Angles local_direction_to(const Eigen::Vector3d &global_point) const {
        const Eigen::Vector3d g = orientation.transpose() * (global_point - center);
        return angles_from_unit(g);
    }

    void validate() const {
        if (element_offsets.empty())
            throw ValidationError("array: element count must be >= 1");
        if ((orientation * orientation.transpose() - Eigen::Matrix3d::Identity())
                .norm() > 1e-9 ||
            orientation.determinant() < 0.0)
            throw ValidationError("array: orientation must be a proper rotation");
        for (const auto &o : element_offsets)
            if (!o.allFinite())
                throw ValidationError("array: element offsets must be finite");
    }

    // Uniform linear array along the local x axis, centered on the origin.
    static ArrayGeometry ula(int n, double spacing) {
        ArrayGeometry a;
        a.element_offsets.clear();
        for (int p = 0; p < n; ++p) {
            const double x = (p - 0.5 * (n - 1)) * spacing;
            a.element_offsets.push_back({x, 0.0, 0.0});
        }
        return a;
    }

    // Uniform planar array in the local x-y plane.
    static ArrayGeometry upa(int nx, int ny, double spacing) {
        ArrayGeometry a;
        a.element_offsets.clear();
        for (int q = 0; q < ny; ++q)
            for (int p = 0; p < nx; ++p)
                a.element_offsets.push_back({(p - 0.5 * (nx - 1)) * spacing,
                                             (q - 0.5 * (ny - 1)) * spacing, 0.0});
        return a;
    }
};

// ---------------------------------------------------------------------------
// Paths, RIS, clocks

enum class PathKind { los, single_bounce };

struct PathGeometry {
    PathKind kind = PathKind::los;
    Eigen::Vector3d incidence_point = Eigen::Vector3d::Zero();  // single-bounce only
    double reflection_phase = 0.0;  // [0, 2pi), 0 for LoS
    double reflection_loss = 1.0;   // linear amplitude factor in (0, 1]

    void validate() const {
        if (kind == PathKind::single_bounce && !incidence_point.allFinite())
            throw ValidationError("path: single-bounce requires a finite incidence point");
        if (reflection_phase < 0.0 || reflection_phase >= 2.0 * kPi)
            throw ValidationError("path: reflection_phase must be in [0, 2pi)");
        if (!(reflection_loss > 0.0) || reflection_loss > 1.0)
            throw ValidationError("path: reflection_loss must be in (0, 1]");
    }
};

// Default amplitude loss for single-bounce reflections (-20 dB).
inline constexpr double kDefaultReflectionLoss = 0.1;

enum class RisProfileSet { continuous_unit_modulus, quantized_phase };

struct RisPanel {
    ArrayGeometry geometry;  // geometry.center is the RIS position
    RisProfileSet profile_set = RisProfileSet::continuous_unit_modulus;
    std::vector<Eigen::VectorXcd> profiles;  // one length-M vector per symbol k

    int elements() const { return geometry.size(); }

    void validate(int n_symbols) const {
        geometry.validate();
        if (static_cast<int>(profiles.size()) != n_symbols)
            throw ValidationError("ris: profile count must equal n_symbols");
        for (const auto &w : profiles) {
            if (w.size() != geometry.size())
                throw ValidationError("ris: profile length must equal element count");
            for (int m = 0; m < w.size(); ++m)
                if (std::abs(w[m]) > 1.0 + 1e-12)
                    throw ValidationError("ris: |omega_{m,k}| must be <= 1");
        }
    }
};

// Walsh-Hadamard entry H[row, col] for a size-`size` transform (size = 2^m),
// computed via the bit-parity identity.
inline double walsh_entry(int row, int col, int size) {
    int bits = row & (col % size);
    int parity = 0;
    while (bits) {
        parity ^= 1;
        bits &= bits - 1;
    }
    return parity ? -1.0 : 1.0;
}

// Temporal RIS code: element m follows Walsh row m+1 (row 0 is skipped so every
// element signature is orthogonal to any static component over a full period).
inline std::vector<Eigen::VectorXcd> ris_hadamard_profiles(int m_elements,
                                                           int n_symbols) {
    int size = 1;
    while (size < m_elements + 1) size *= 2;
    std::vector<Eigen::VectorXcd> profiles;
    profiles.reserve(n_symbols);
    for (int k = 0; k < n_symbols; ++k) {
        Eigen::VectorXcd w(m_elements);
        for (int m = 0; m < m_elements; ++m) w[m] = walsh_entry(m + 1, k, size);
        profiles.push_back(w);
    }
    return profiles;
}

inline int ris_code_period(int m_elements) {
    int size = 1;
    while (size < m_elements + 1) size *= 2;
    return size;
}

struct ClockModel {
    double bias = 0.0;                          // B [s]
    double cfo = 0.0;                           // [Hz]
    double phase_noise_variance_per_symbol = 0.0;  // [rad^2]
    double tx_chain_phase = 0.0;                // psi_tx [rad]
    double rx_chain_phase = 0.0;                // psi_rx [rad]

    void validate() const {
        if (phase_noise_variance_per_symbol < 0.0)
            throw ValidationError("clock: phase noise variance must be >= 0");
        for (double v : {bias, cfo, tx_chain_phase, rx_chain_phase})
            if (!std::isfinite(v)) throw ValidationError("clock: fields must be finite");
    }
};

struct Terminal {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    ArrayGeometry array;

    // Keeps the array phase center glued to the terminal position.
    void place(const Eigen::Vector3d &p) {
        position = p;
        array.center = p;
    }

    void validate() const {
        array.validate();
        if ((position - array.center).norm() > 1e-9)
            throw ValidationError(
                "terminal: array center must coincide with the terminal position");
    }
};

struct ModelFlags {
    bool near_field = false;
    bool non_stationary = false;
    bool beam_squint = false;
};

struct Scenario {
    Terminal tx;
    Terminal rx;
    std::vector<PathGeometry> paths;  // path 0 = LoS when present
    std::optional<RisPanel> ris;
    SpectralGrid grid;
    ClockModel clock;
    Eigen::Vector3d rx_velocity = Eigen::Vector3d::Zero();
    double noise_psd = 0.0;  // W/Hz
    ModelFlags flags;

    void validate() const {
        grid.validate();
        tx.validate();
        rx.validate();
        clock.validate();
        if (paths.empty() && !ris)
            throw ValidationError("scenario: needs at least one path or a RIS");
        if ((tx.position - rx.position).norm() < 1e-12)
            throw ValidationError("scenario: Tx and Rx positions must be distinct");
        if (!tx.position.allFinite() || !rx.position.allFinite() ||
            !rx_velocity.allFinite())
            throw ValidationError("scenario: positions and velocity must be finite");
        for (const auto &p : paths) p.validate();
        if (ris) ris->validate(grid.n_symbols);
        if (noise_psd < 0.0) throw ValidationError("scenario: noise_psd must be >= 0");
    }
};

// ---------------------------------------------------------------------------
// Per-path geometric parameters

struct PathParams {
    Complex gain;       // alpha_l, Friis magnitude with carrier phase
    Angles aoa;         // at the Rx array, local frame
    Angles aod;         // at the Tx array, local frame
    double delay = 0;   // tau_l [s], includes clock bias B
    double doppler = 0; // nu_l [Hz]
    double path_length = 0;  // total propagation distance [m], excludes bias
};

namespace detail {

inline void check_separated(const Eigen::Vector3d &a, const Eigen::Vector3d &b,
                            const char *what) {
    if ((a - b).norm() < 1e-9)
        throw GeometryError(std::string("degenerate geometry: ") + what);
}

}  // namespace detail

// Evaluates delay, angles, Doppler, and the Friis gain of path l.
// Gain magnitude: |alpha|^2 = (lambda/(4 pi d))^2 G_rx G_tx, with d the total
// path length; single-bounce paths are additionally scaled by reflection_loss.
// Carrier phase: psi = -2 pi d / lambda + psi_tx + psi_rx + reflection_phase.
inline PathParams geometric_path_params(const Scenario &s, int l) {
    if (l < 0 || l >= static_cast<int>(s.paths.size()))
        throw std::out_of_range("geometric_path_params: bad path index");
    const PathGeometry &path = s.paths[l];
    const double lambda = s.grid.wavelength();

    PathParams out;
    Eigen::Vector3d rx_target, tx_target;  // what each array points at
    double total_len;
    double loss = 1.0;
    if (path.kind == PathKind::los) {
        detail::check_separated(s.tx.position, s.rx.position, "Tx coincides with Rx");
        rx_target = s.tx.position;
        tx_target = s.rx.position;
        total_len = (s.tx.position - s.rx.position).norm();
    } else {
        detail::check_separated(s.tx.position, path.incidence_point,
                                "incidence point coincides with Tx");
        detail::check_separated(s.rx.position, path.incidence_point,
                                "incidence point coincides with Rx");
        rx_target = path.incidence_point;
        tx_target = path.incidence_point;
        total_len = (s.tx.position - path.incidence_point).norm() +
                    (s.rx.position - path.incidence_point).norm();
        loss = path.reflection_loss;
    }

    out.path_length = total_len;
    out.delay = total_len / kSpeedOfLight + s.clock.bias;
    out.aoa = s.rx.array.local_direction_to(rx_target);
    out.aod = s.tx.array.local_direction_to(tx_target);

    const double g = s.rx.array.gain(out.aoa) * s.tx.array.gain(out.aod);
    const double amp = lambda / (4.0 * kPi * total_len) * std::sqrt(g) * loss;
    const double psi = -2.0 * kPi * total_len / lambda + s.clock.tx_chain_phase +
                       s.clock.rx_chain_phase + path.reflection_phase;
    out.gain = std::polar(amp, psi);

    // Doppler from the Rx velocity projected on the arrival direction.
    const Eigen::Vector3d u = (rx_target - s.rx.position).normalized();
    out.doppler = s.grid.f_c / kSpeedOfLight * u.dot(s.rx_velocity);
    return out;
}

}  // namespace radioloc
