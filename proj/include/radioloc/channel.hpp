// SPDX-License-Identifier: Apache-2.0
//
// Channel tensor synthesis: far-field steering, near-field responses, the
// multipath sum over the OFDM grid, the RIS term, hardware impairments, and
// the noisy observation model.

#pragma once

#include <random>

#include "radioloc/scenario.hpp"

namespace radioloc {

// ---------------------------------------------------------------------------
// Array responses

// Far-field steering vector: entry p = exp(j 2 pi / lambda * offset_p' u).
// Direction is in the array's local frame.
inline Eigen::VectorXcd steering_vector(const ArrayGeometry &arr,
                                        const Angles &direction, double lambda) {
    if (!(lambda > 0)) throw ValidationError("steering_vector: lambda must be > 0");
    const Eigen::Vector3d u = unit_from_angles(direction);
    Eigen::VectorXcd a(arr.size());
    const double k = 2.0 * kPi / lambda;
    for (int p = 0; p < arr.size(); ++p)
        a[p] = std::polar(1.0, k * arr.element_offsets[p].dot(u));
    return a;
}

// Derivatives of the steering vector with respect to azimuth and elevation.
inline Eigen::VectorXcd steering_vector_deriv(const ArrayGeometry &arr,
                                              const Angles &direction,
                                              double lambda, bool wrt_el) {
    const Eigen::Vector3d du = wrt_el ? unit_del(direction) : unit_daz(direction);
    const Eigen::VectorXcd a = steering_vector(arr, direction, lambda);
    Eigen::VectorXcd d(arr.size());
    const double k = 2.0 * kPi / lambda;
    for (int p = 0; p < arr.size(); ++p)
        d[p] = a[p] * Complex(0.0, k * arr.element_offsets[p].dot(du));
    return d;
}

// Wavefront-curvature response: entry p = exp(-j 2 pi (d_p - d_ref) / lambda)
// with d_p the distance from the source to element p and d_ref the distance to
// the phase center. Source position is in the global frame. When the source
// falls inside the array bounding sphere the model is still evaluated but
// `inside_aperture` (if given) is set.
inline Eigen::VectorXcd near_field_response(const ArrayGeometry &arr,
                                            const Eigen::Vector3d &source,
                                            double lambda,
                                            bool *inside_aperture = nullptr) {
    if (!(lambda > 0)) throw ValidationError("near_field_response: lambda must be > 0");
    const double d_ref = (source - arr.center).norm();
    if (d_ref < 1e-12)
        throw GeometryError("near_field_response: source coincides with array center");
    if (inside_aperture) *inside_aperture = d_ref < arr.aperture_radius();
    Eigen::VectorXcd a(arr.size());
    const double k = 2.0 * kPi / lambda;
    for (int p = 0; p < arr.size(); ++p) {
        const double d_p = (source - arr.element_position(p)).norm();
        if (d_p < 1e-12)
            throw GeometryError("near_field_response: source coincides with an element");
        a[p] = std::polar(1.0, -k * (d_p - d_ref));
    }
    return a;
}

// ---------------------------------------------------------------------------
// ChannelTensor

struct ChannelTensor {
    int n_rx = 0;
    int n_tx = 0;
    SpectralGrid grid;
    std::vector<Eigen::MatrixXcd> h;  // index n_idx * n_symbols + k

    ChannelTensor() = default;
    ChannelTensor(int rx, int tx, const SpectralGrid &g)
        : n_rx(rx), n_tx(tx), grid(g),
          h(static_cast<size_t>(g.n_subcarriers) * g.n_symbols,
            Eigen::MatrixXcd::Zero(rx, tx)) {}

    Eigen::MatrixXcd &at(int n_idx, int k) {
        return h[static_cast<size_t>(n_idx) * grid.n_symbols + k];
    }
    const Eigen::MatrixXcd &at(int n_idx, int k) const {
        return h[static_cast<size_t>(n_idx) * grid.n_symbols + k];
    }

    double frobenius_norm() const {
        double s = 0.0;
        for (const auto &m : h) s += m.squaredNorm();
        return std::sqrt(s);
    }

    ChannelTensor &operator+=(const ChannelTensor &other) {
        if (other.h.size() != h.size() || other.n_rx != n_rx || other.n_tx != n_tx)
            throw ValidationError("ChannelTensor: dimension mismatch in sum");
        for (size_t i = 0; i < h.size(); ++i) h[i] += other.h[i];
        return *this;
    }
};

inline double relative_error(const ChannelTensor &a, const ChannelTensor &b) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < a.h.size(); ++i) {
        num += (a.h[i] - b.h[i]).squaredNorm();
        den += b.h[i].squaredNorm();
    }
    return std::sqrt(num / den);
}

// ---------------------------------------------------------------------------
// Synthesis

namespace detail {

// Rx/Tx array response for one path at wavelength `lambda`, honoring the
// near-field flag. `target` is the global point the array sees (source or IP).
inline Eigen::VectorXcd path_response(const ArrayGeometry &arr, const Angles &dir,
                                      const Eigen::Vector3d &target, double lambda,
                                      bool near_field) {
    return near_field ? near_field_response(arr, target, lambda)
                      : steering_vector(arr, dir, lambda);
}

// Per-element-pair gain magnitudes (XL-MIMO non-stationarity): exact Friis
// distance and per-element gain pattern for each (p, q) pair.
inline Eigen::MatrixXd nonstationary_magnitude(const Scenario &s,
                                               const PathGeometry &path) {
    const int np = s.rx.array.size(), nq = s.tx.array.size();
    const double lambda = s.grid.wavelength();
    Eigen::MatrixXd mag(np, nq);
    for (int p = 0; p < np; ++p) {
        const Eigen::Vector3d xp = s.rx.array.element_position(p);
        for (int q = 0; q < nq; ++q) {
            const Eigen::Vector3d xq = s.tx.array.element_position(q);
            double d, loss = 1.0;
            Eigen::Vector3d rx_tgt, tx_tgt;
            if (path.kind == PathKind::los) {
                d = (xq - xp).norm();
                rx_tgt = xq;
                tx_tgt = xp;
            } else {
                d = (xq - path.incidence_point).norm() +
                    (xp - path.incidence_point).norm();
                rx_tgt = path.incidence_point;
                tx_tgt = path.incidence_point;
                loss = path.reflection_loss;
            }
            const Angles aoa = angles_from_unit(
                s.rx.array.orientation.transpose() * (rx_tgt - xp));
            const Angles aod = angles_from_unit(
                s.tx.array.orientation.transpose() * (tx_tgt - xq));
            const double g = s.rx.array.gain(aoa) * s.tx.array.gain(aod);
            mag(p, q) = lambda / (4.0 * kPi * d) * std::sqrt(g) * loss;
        }
    }
    return mag;
}

}  // namespace detail

// H_{n,k} = sum_l alpha_l a_rx(theta_l) a_tx'(phi_l)
//           exp(-j 2 pi n df tau_l) exp(j 2 pi k Ts nu_l)
// Flags: beam_squint uses lambda_n per subcarrier in the array responses;
// near_field swaps steering vectors for wavefront-curvature responses;
// non_stationary replaces the rank-1 gain by per-(p,q) Friis magnitudes.
inline ChannelTensor synthesize(const Scenario &s) {
    s.validate();
    ChannelTensor t(s.rx.array.size(), s.tx.array.size(), s.grid);
    const int N = s.grid.n_subcarriers, K = s.grid.n_symbols;

    for (int l = 0; l < static_cast<int>(s.paths.size()); ++l) {
        const PathParams pp = geometric_path_params(s, l);
        const PathGeometry &path = s.paths[l];
        const Eigen::Vector3d rx_tgt =
            path.kind == PathKind::los ? s.tx.position : path.incidence_point;
        const Eigen::Vector3d tx_tgt =
            path.kind == PathKind::los ? s.rx.position : path.incidence_point;

        Eigen::MatrixXd ns_mag;
        if (s.flags.non_stationary) ns_mag = detail::nonstationary_magnitude(s, path);

        for (int n_idx = 0; n_idx < N; ++n_idx) {
            const int n = s.grid.subcarrier(n_idx);
            const double lambda =
                s.flags.beam_squint ? s.grid.wavelength_at(n) : s.grid.wavelength();
            const Eigen::VectorXcd a_rx = detail::path_response(
                s.rx.array, pp.aoa, rx_tgt, lambda, s.flags.near_field);
            const Eigen::VectorXcd a_tx = detail::path_response(
                s.tx.array, pp.aod, tx_tgt, lambda, s.flags.near_field);
            Eigen::MatrixXcd outer = a_rx * a_tx.transpose();
            if (s.flags.non_stationary) {
                // per-pair magnitude, phase from the array responses + alpha
                const Complex phase = pp.gain / std::abs(pp.gain);
                outer = phase * (outer.array() * ns_mag.cast<Complex>().array()).matrix();
            } else {
                outer *= pp.gain;
            }
            const Complex delay_ph =
                std::polar(1.0, -2.0 * kPi * n * s.grid.delta_f * pp.delay);
            for (int k = 0; k < K; ++k) {
                const Complex dop_ph =
                    std::polar(1.0, 2.0 * kPi * k * s.grid.T_s * pp.doppler);
                t.at(n_idx, k) += outer * (delay_ph * dop_ph);
            }
        }
    }
    return t;
}

// ---------------------------------------------------------------------------
// RIS term

struct RisPathParams {
    Complex leg_gain;        // alpha_tx_ris * alpha_ris_rx (carrier phase included)
    Angles aoa_rx;           // RIS seen from the Rx, local Rx frame
    Angles aod_tx;           // RIS seen from the Tx, local Tx frame
    Angles aoa_ris;          // Tx seen from the RIS, local RIS frame
    Angles aod_ris;          // Rx seen from the RIS, local RIS frame
    double delay = 0;        // end-to-end Tx->RIS->Rx delay + B
    double doppler = 0;
    double path_length = 0;
};

inline RisPathParams ris_path_params(const Scenario &s) {
    if (!s.ris) throw ConfigError("ris_term: scenario has no RIS");
    const RisPanel &ris = *s.ris;
    const Eigen::Vector3d xr = ris.geometry.center;
    detail::check_separated(s.tx.position, xr, "RIS coincides with Tx");
    detail::check_separated(s.rx.position, xr, "RIS coincides with Rx");

    RisPathParams out;
    const double d1 = (s.tx.position - xr).norm();
    const double d2 = (s.rx.position - xr).norm();
    out.path_length = d1 + d2;
    out.delay = out.path_length / kSpeedOfLight + s.clock.bias;
    out.aoa_rx = s.rx.array.local_direction_to(xr);
    out.aod_tx = s.tx.array.local_direction_to(xr);
    out.aoa_ris = ris.geometry.local_direction_to(s.tx.position);
    out.aod_ris = ris.geometry.local_direction_to(s.rx.position);

    const double lambda = s.grid.wavelength();
    const double g = s.rx.array.gain(out.aoa_rx) * s.tx.array.gain(out.aod_tx);
    const double amp = lambda / (4.0 * kPi * d1) * lambda / (4.0 * kPi * d2) *
                       std::sqrt(g);
    const double psi = -2.0 * kPi * out.path_length / lambda +
                       s.clock.tx_chain_phase + s.clock.rx_chain_phase;
    out.leg_gain = std::polar(amp, psi);

    const Eigen::Vector3d u = (xr - s.rx.position).normalized();
    out.doppler = s.grid.f_c / kSpeedOfLight * u.dot(s.rx_velocity);
    return out;
}

// Symbol-dependent RIS gain alpha^ris_k = leg_gain * a'(aod) Omega_k a(aoa).
inline Complex ris_symbol_gain(const Scenario &s, const RisPathParams &rp, int k) {
    const RisPanel &ris = *s.ris;
    const double lambda = s.grid.wavelength();
    const Eigen::VectorXcd a_in = steering_vector(ris.geometry, rp.aoa_ris, lambda);
    const Eigen::VectorXcd a_out = steering_vector(ris.geometry, rp.aod_ris, lambda);
    Complex acc = 0.0;
    const Eigen::VectorXcd &w = ris.profiles[k];
    for (int m = 0; m < ris.elements(); ++m) acc += a_out[m] * w[m] * a_in[m];
    return rp.leg_gain * acc;
}

inline ChannelTensor ris_term(const Scenario &s) {
    const RisPathParams rp = ris_path_params(s);
    ChannelTensor t(s.rx.array.size(), s.tx.array.size(), s.grid);
    const int N = s.grid.n_subcarriers, K = s.grid.n_symbols;
    for (int n_idx = 0; n_idx < N; ++n_idx) {
        const int n = s.grid.subcarrier(n_idx);
        const double lambda =
            s.flags.beam_squint ? s.grid.wavelength_at(n) : s.grid.wavelength();
        const Eigen::VectorXcd a_rx = detail::path_response(
            s.rx.array, rp.aoa_rx, s.ris->geometry.center, lambda, s.flags.near_field);
        const Eigen::VectorXcd a_tx = detail::path_response(
            s.tx.array, rp.aod_tx, s.ris->geometry.center, lambda, s.flags.near_field);
        const Eigen::MatrixXcd outer = a_rx * a_tx.transpose();
        const Complex delay_ph =
            std::polar(1.0, -2.0 * kPi * n * s.grid.delta_f * rp.delay);
        for (int k = 0; k < K; ++k) {
            const Complex dop_ph =
                std::polar(1.0, 2.0 * kPi * k * s.grid.T_s * rp.doppler);
            t.at(n_idx, k) += ris_symbol_gain(s, rp, k) * outer * (delay_ph * dop_ph);
        }
    }
    return t;
}

// Full tensor: multipath sum plus the RIS term when a RIS is present.
inline ChannelTensor synthesize_total(const Scenario &s) {
    ChannelTensor t = synthesize(s);
    if (s.ris) t += ris_term(s);
    return t;
}

// ---------------------------------------------------------------------------
// Hardware impairments

struct ImpairmentSpec {
    double element_displacement_sigma = 0.0;  // [m], i.i.d. per axis
    double phase_noise = 0.0;                 // Wiener increment variance [rad^2]
    double cfo = 0.0;                         // [Hz]
    double timing_offset = 0.0;               // [s]
    uint64_t seed = 0;

    void validate() const {
        if (element_displacement_sigma < 0 || phase_noise < 0)
            throw ValidationError("impairments: variances must be >= 0");
    }
};

// Symbol-k phase rotation (CFO ramp + Wiener phase noise walk) and a common
// delay shift. Element displacements need geometry and are applied by
// synthesize_impaired().
inline ChannelTensor apply_impairments(const ChannelTensor &h,
                                       const ImpairmentSpec &spec) {
    spec.validate();
    ChannelTensor out = h;
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int N = h.grid.n_subcarriers, K = h.grid.n_symbols;
    std::vector<double> walk(K, 0.0);
    double w = 0.0;
    const double step = std::sqrt(spec.phase_noise);
    for (int k = 0; k < K; ++k) {
        w += step * gauss(rng);
        walk[k] = w;
    }
    for (int n_idx = 0; n_idx < N; ++n_idx) {
        const int n = h.grid.subcarrier(n_idx);
        const Complex delay_ph =
            std::polar(1.0, -2.0 * kPi * n * h.grid.delta_f * spec.timing_offset);
        for (int k = 0; k < K; ++k) {
            const Complex rot =
                std::polar(1.0, 2.0 * kPi * k * h.grid.T_s * spec.cfo + walk[k]);
            out.at(n_idx, k) *= rot * delay_ph;
        }
    }
    return out;
}

// Frozen per-seed element displacements applied to both arrays, then
// re-synthesized (array errors are static calibration offsets).
inline Scenario displace_elements(const Scenario &s, double sigma, uint64_t seed) {
    Scenario out = s;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, sigma);
    for (auto &o : out.rx.array.element_offsets)
        o += Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    for (auto &o : out.tx.array.element_offsets)
        o += Eigen::Vector3d(gauss(rng), gauss(rng), gauss(rng));
    return out;
}

inline ChannelTensor synthesize_impaired(const Scenario &s,
                                         const ImpairmentSpec &spec) {
    spec.validate();
    const Scenario sd =
        spec.element_displacement_sigma > 0
            ? displace_elements(s, spec.element_displacement_sigma, spec.seed)
            : s;
    ChannelTensor t = synthesize_total(sd);
    ImpairmentSpec rest = spec;
    rest.element_displacement_sigma = 0.0;
    rest.seed = spec.seed + 0x9e3779b97f4a7c15ull;  // decouple the two draws
    return apply_impairments(t, rest);
}

// ---------------------------------------------------------------------------
// Observation model

// Transmit/receive processing for one OFDM frame. Precoders and combiners are
// given per symbol (cycled when fewer than n_symbols); powers are per
// subcarrier.
struct SignalSpec {
    std::vector<Eigen::VectorXcd> precoders;  // each n_tx x 1
    std::vector<Eigen::VectorXcd> combiners;  // each n_rx x 1
    Eigen::VectorXd powers;                   // n_subcarriers, [W]

    const Eigen::VectorXcd &precoder(int k) const {
        return precoders[k % precoders.size()];
    }
    const Eigen::VectorXcd &combiner(int k) const {
        return combiners[k % combiners.size()];
    }

    static SignalSpec uniform(int n_tx, int n_rx, int n_subcarriers,
                              double total_power = 1.0) {
        SignalSpec s;
        s.precoders = {Eigen::VectorXcd::Constant(n_tx, 1.0 / std::sqrt(double(n_tx)))};
        s.combiners = {Eigen::VectorXcd::Constant(n_rx, 1.0 / std::sqrt(double(n_rx)))};
        s.powers = Eigen::VectorXd::Constant(n_subcarriers, total_power / n_subcarriers);
        return s;
    }

    // Cycles through the n_rx canonical basis combiners so the full array is
    // observed over the symbol dimension.
    static SignalSpec element_sampling(int n_tx, int n_rx, int n_subcarriers,
                                      double total_power = 1.0) {
        SignalSpec s = uniform(n_tx, n_rx, n_subcarriers, total_power);
        s.combiners.clear();
        for (int p = 0; p < n_rx; ++p) {
            Eigen::VectorXcd w = Eigen::VectorXcd::Zero(n_rx);
            w[p] = 1.0;
            s.combiners.push_back(w);
        }
        return s;
    }

    // Independent random unit-norm precoders and combiners per symbol.
    // Needed for full parameter observability: a fixed precoder makes the
    // departure angles indistinguishable from complex-gain perturbations.
    static SignalSpec random_probing(int n_tx, int n_rx, int n_subcarriers,
                                     int n_symbols, uint64_t seed,
                                     double total_power = 1.0) {
        SignalSpec s = uniform(n_tx, n_rx, n_subcarriers, total_power);
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, 1.0);
        auto draw = [&](int n) {
            Eigen::VectorXcd v(n);
            for (int i = 0; i < n; ++i) v[i] = Complex(gauss(rng), gauss(rng));
            v.normalize();
            return v;
        };
        s.precoders.clear();
        s.combiners.clear();
        for (int k = 0; k < n_symbols; ++k) {
            s.precoders.push_back(draw(n_tx));
            s.combiners.push_back(draw(n_rx));
        }
        return s;
    }
};

// y_{n,k} = sqrt(p_n) w_k^H H_{n,k} f_k + noise, noise CN(0, noise_psd * df).
inline Eigen::MatrixXcd observe(const ChannelTensor &h, const SignalSpec &sig,
                                double noise_psd, uint64_t seed) {
    const int N = h.grid.n_subcarriers, K = h.grid.n_symbols;
    if (sig.powers.size() != N)
        throw ValidationError("observe: powers length must equal n_subcarriers");
    for (const auto &f : sig.precoders)
        if (f.size() != h.n_tx) throw ValidationError("observe: precoder dim mismatch");
    for (const auto &w : sig.combiners)
        if (w.size() != h.n_rx) throw ValidationError("observe: combiner dim mismatch");

    Eigen::MatrixXcd y(N, K);
    std::mt19937_64 rng(seed);
    const double sigma = std::sqrt(noise_psd * h.grid.delta_f / 2.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int n_idx = 0; n_idx < N; ++n_idx) {
        for (int k = 0; k < K; ++k) {
            const Complex clean = std::sqrt(sig.powers[n_idx]) *
                                  (sig.combiner(k).adjoint() * h.at(n_idx, k) *
                                   sig.precoder(k))(0, 0);
            const Complex noise =
                sigma > 0 ? Complex(sigma * gauss(rng), sigma * gauss(rng)) : Complex(0);
            y(n_idx, k) = clean + noise;
        }
    }
    return y;
}

}  // namespace radioloc
