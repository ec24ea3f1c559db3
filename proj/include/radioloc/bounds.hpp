// SPDX-License-Identifier: Apache-2.0
//
// Fisher information in channel-parameter and state domains, PEB/OEB,
// identifiability verdicts (minimal-configuration sweep), and the
// model-mismatch bias probe.
//
// Unit conventions inside FIMs: delays are expressed in meters (c*tau) and the
// clock bias as c*B, so delay and position entries share a scale and rank
// tests stay well conditioned.

#pragma once

#include <random>

#include "radioloc/channel.hpp"

namespace radioloc {

// Channel-parameter ordering, per path:
// [delay_m, aoa_az, aoa_el, aod_az, aod_el, doppler, gain_re, gain_im]
inline constexpr int kParamsPerPath = 8;

// ---------------------------------------------------------------------------
// Noiseless observation model as an explicit function of channel parameters.
// This is the function the analytic FIM differentiates; tests cross-check the
// derivatives against central finite differences of the same function.

struct ChannelParamPath {
    double delay_m = 0.0;  // c * tau
    Angles aoa;
    Angles aod;
    double doppler = 0.0;
    Complex gain;
};

inline std::vector<ChannelParamPath> channel_params_of(const Scenario &s) {
    std::vector<ChannelParamPath> out;
    for (int l = 0; l < static_cast<int>(s.paths.size()); ++l) {
        const PathParams p = geometric_path_params(s, l);
        out.push_back({p.delay * kSpeedOfLight, p.aoa, p.aod, p.doppler, p.gain});
    }
    return out;
}

inline Eigen::MatrixXcd model_observation(const std::vector<ChannelParamPath> &paths,
                                          const SignalSpec &sig,
                                          const SpectralGrid &grid,
                                          const ArrayGeometry &rx_arr,
                                          const ArrayGeometry &tx_arr) {
    const int N = grid.n_subcarriers, K = grid.n_symbols;
    Eigen::MatrixXcd mu = Eigen::MatrixXcd::Zero(N, K);
    const double lambda = grid.wavelength();
    for (const auto &p : paths) {
        const Eigen::VectorXcd a_rx = steering_vector(rx_arr, p.aoa, lambda);
        const Eigen::VectorXcd a_tx = steering_vector(tx_arr, p.aod, lambda);
        for (int k = 0; k < K; ++k) {
            const Complex wHa = sig.combiner(k).dot(a_rx);
            const Complex aTf = a_tx.transpose() * sig.precoder(k);
            const Complex dop =
                std::polar(1.0, 2.0 * kPi * k * grid.T_s * p.doppler);
            for (int n_idx = 0; n_idx < N; ++n_idx) {
                const int n = grid.subcarrier(n_idx);
                const Complex del = std::polar(
                    1.0, -2.0 * kPi * n * grid.delta_f * p.delay_m / kSpeedOfLight);
                mu(n_idx, k) += std::sqrt(sig.powers[n_idx]) * p.gain * wHa * aTf *
                                del * dop;
            }
        }
    }
    return mu;
}

// Stacked derivative of the observation with respect to all channel
// parameters; column j is d mu / d eta_j flattened over (n, k).
inline Eigen::MatrixXcd observation_jacobian(const std::vector<ChannelParamPath> &paths,
                                             const SignalSpec &sig,
                                             const SpectralGrid &grid,
                                             const ArrayGeometry &rx_arr,
                                             const ArrayGeometry &tx_arr) {
    const int N = grid.n_subcarriers, K = grid.n_symbols;
    const int L = static_cast<int>(paths.size());
    const double lambda = grid.wavelength();
    Eigen::MatrixXcd J =
        Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(N) * K, L * kParamsPerPath);

    for (int l = 0; l < L; ++l) {
        const auto &p = paths[l];
        const Eigen::VectorXcd a_rx = steering_vector(rx_arr, p.aoa, lambda);
        const Eigen::VectorXcd a_tx = steering_vector(tx_arr, p.aod, lambda);
        const Eigen::VectorXcd da_rx_az =
            steering_vector_deriv(rx_arr, p.aoa, lambda, false);
        const Eigen::VectorXcd da_rx_el =
            steering_vector_deriv(rx_arr, p.aoa, lambda, true);
        const Eigen::VectorXcd da_tx_az =
            steering_vector_deriv(tx_arr, p.aod, lambda, false);
        const Eigen::VectorXcd da_tx_el =
            steering_vector_deriv(tx_arr, p.aod, lambda, true);

        for (int k = 0; k < K; ++k) {
            const Complex wHa = sig.combiner(k).dot(a_rx);
            const Complex aTf = a_tx.transpose() * sig.precoder(k);
            const Complex dwHa_az = sig.combiner(k).dot(da_rx_az);
            const Complex dwHa_el = sig.combiner(k).dot(da_rx_el);
            const Complex daTf_az = da_tx_az.transpose() * sig.precoder(k);
            const Complex daTf_el = da_tx_el.transpose() * sig.precoder(k);
            const Complex dop =
                std::polar(1.0, 2.0 * kPi * k * grid.T_s * p.doppler);
            for (int n_idx = 0; n_idx < N; ++n_idx) {
                const int n = grid.subcarrier(n_idx);
                const Complex del = std::polar(
                    1.0, -2.0 * kPi * n * grid.delta_f * p.delay_m / kSpeedOfLight);
                const Complex base = std::sqrt(sig.powers[n_idx]) * wHa * aTf * del * dop;
                const Complex mu_l = p.gain * base;
                const Eigen::Index row = static_cast<Eigen::Index>(n_idx) * K + k;
                const int c0 = l * kParamsPerPath;
                J(row, c0 + 0) = mu_l * Complex(0.0, -2.0 * kPi * n * grid.delta_f /
                                                          kSpeedOfLight);
                J(row, c0 + 1) = p.gain * std::sqrt(sig.powers[n_idx]) * dwHa_az *
                                 aTf * del * dop;
                J(row, c0 + 2) = p.gain * std::sqrt(sig.powers[n_idx]) * dwHa_el *
                                 aTf * del * dop;
                J(row, c0 + 3) = p.gain * std::sqrt(sig.powers[n_idx]) * wHa *
                                 daTf_az * del * dop;
                J(row, c0 + 4) = p.gain * std::sqrt(sig.powers[n_idx]) * wHa *
                                 daTf_el * del * dop;
                J(row, c0 + 5) = mu_l * Complex(0.0, 2.0 * kPi * k * grid.T_s);
                J(row, c0 + 6) = base;
                J(row, c0 + 7) = Complex(0.0, 1.0) * base;
            }
        }
    }
    return J;
}

// FIM = (2/sigma^2) Re{ J^H J } over the noiseless observation model.
inline Eigen::MatrixXd channel_fim(const Scenario &s, const SignalSpec &sig) {
    if (sig.powers.sum() <= 0.0)
        throw NumericalError("channel_fim: zero signal power (singular input)");
    const double sigma2 = s.noise_psd * s.grid.delta_f;
    if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
        throw NumericalError("channel_fim: SNR must be finite and positive");
    const auto paths = channel_params_of(s);
    const Eigen::MatrixXcd J =
        observation_jacobian(paths, sig, s.grid, s.rx.array, s.tx.array);
    return (2.0 / sigma2) * (J.adjoint() * J).real();
}

// ---------------------------------------------------------------------------
// State-domain FIM

struct StateVector {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Vector3d orientation_increment = Eigen::Vector3d::Zero();
    double clock_bias_m = 0.0;
    std::vector<Eigen::Vector3d> ip_positions;
    bool has_orientation = false;
    bool has_bias = true;

    int dim() const {
        return 3 + (has_orientation ? 3 : 0) + (has_bias ? 1 : 0) +
               3 * static_cast<int>(ip_positions.size());
    }
    int orientation_offset() const { return 3; }
    int bias_offset() const { return 3 + (has_orientation ? 3 : 0); }
    int ip_offset(int i) const { return bias_offset() + (has_bias ? 1 : 0) + 3 * i; }
};

struct FimReport {
    Eigen::MatrixXd fim_channel;  // geometric channel params after profiling gains
    Eigen::MatrixXd jacobian;     // channel-params x state
    Eigen::MatrixXd fim_state;
    double peb = std::numeric_limits<double>::infinity();
    double oeb = std::numeric_limits<double>::infinity();
    bool identifiable = false;
    int null_space_dim = 0;
};

inline constexpr double kRankEigThreshold = 1e-9;  // relative to lambda_max

namespace detail {

// Schur complement that profiles out the listed nuisance indices.
inline Eigen::MatrixXd profile_out(const Eigen::MatrixXd &fim,
                                   const std::vector<int> &nuisance) {
    std::vector<char> is_nuis(fim.rows(), 0);
    for (int i : nuisance) is_nuis[i] = 1;
    std::vector<int> keep;
    for (int i = 0; i < fim.rows(); ++i)
        if (!is_nuis[i]) keep.push_back(i);
    const int nk = static_cast<int>(keep.size());
    const int nn = static_cast<int>(nuisance.size());
    Eigen::MatrixXd A(nk, nk), B(nk, nn), D(nn, nn);
    for (int i = 0; i < nk; ++i)
        for (int j = 0; j < nk; ++j) A(i, j) = fim(keep[i], keep[j]);
    for (int i = 0; i < nk; ++i)
        for (int j = 0; j < nn; ++j) B(i, j) = fim(keep[i], nuisance[j]);
    for (int i = 0; i < nn; ++i)
        for (int j = 0; j < nn; ++j) D(i, j) = fim(nuisance[i], nuisance[j]);
    if (nn == 0) return A;
    return A - B * D.completeOrthogonalDecomposition().pseudoInverse() * B.transpose();
}

// Pseudo-inverse via symmetric eigendecomposition.
inline Eigen::MatrixXd sym_pinv(const Eigen::MatrixXd &m, double rel_tol = 1e-12) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double tol = rel_tol * std::max(ev.cwiseAbs().maxCoeff(), 1e-300);
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
    for (int i = 0; i < ev.size(); ++i)
        if (ev[i] > tol) inv[i] = 1.0 / ev[i];
    return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

inline int null_space_dim(const Eigen::MatrixXd &m,
                          double rel_tol = kRankEigThreshold) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double lmax = ev.cwiseAbs().maxCoeff();
    if (lmax <= 0.0) return static_cast<int>(ev.size());
    int n = 0;
    for (int i = 0; i < ev.size(); ++i)
        if (ev[i] < rel_tol * lmax) ++n;
    return n;
}

}  // namespace detail

// Row Jacobians of the geometric measurement functions. All delay-type
// measurements are in meters. `R0` is the linearization point of the UE
// orientation (identity increment).

struct GeomJacobianRow {
    Eigen::RowVectorXd d;  // length = state dim
};

namespace detail {

// d(path length + c B)/d state for a path UE<->anchor, optionally via an IP.
inline Eigen::RowVectorXd toa_row(const StateVector &st,
                                  const Eigen::Vector3d &anchor,
                                  const Eigen::Vector3d *ip, int ip_index) {
    Eigen::RowVectorXd r = Eigen::RowVectorXd::Zero(st.dim());
    if (!ip) {
        const Eigen::Vector3d u = (st.position - anchor).normalized();
        r.segment<3>(0) = u.transpose();
    } else {
        const Eigen::Vector3d u_ue = (st.position - *ip).normalized();
        r.segment<3>(0) = u_ue.transpose();
        const Eigen::Vector3d u1 = (*ip - anchor).normalized();
        const Eigen::Vector3d u2 = (*ip - st.position).normalized();
        r.segment<3>(st.ip_offset(ip_index)) = (u1 + u2).transpose();
    }
    if (st.has_bias) r(st.bias_offset()) = 1.0;
    return r;
}

// Angle rows (az, el) of a direction observed at the UE toward `target`
// (anchor or IP), measured in the UE frame R = R0 Exp(eps).
inline Eigen::Matrix<double, 2, Eigen::Dynamic> aoa_rows(
    const StateVector &st, const Eigen::Matrix3d &R0,
    const Eigen::Vector3d &target, int ip_index /* -1 if anchor */) {
    const Eigen::Vector3d g = target - st.position;
    const Eigen::Vector3d w = R0.transpose() * g;
    const Eigen::Matrix<double, 2, 3> A = angle_jacobian(w);
    Eigen::Matrix<double, 2, Eigen::Dynamic> rows =
        Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, st.dim());
    rows.block<2, 3>(0, 0) = A * (-R0.transpose());
    if (st.has_orientation)
        rows.block<2, 3>(0, st.orientation_offset()) = A * skew(w);
    if (ip_index >= 0) rows.block<2, 3>(0, st.ip_offset(ip_index)) = A * R0.transpose();
    return rows;
}

// Angle rows of the direction from a known anchor (BS or RIS) toward the UE
// or an IP, measured in the anchor frame.
inline Eigen::Matrix<double, 2, Eigen::Dynamic> anchor_angle_rows(
    const StateVector &st, const Eigen::Vector3d &anchor,
    const Eigen::Matrix3d &anchor_R, int ip_index /* -1 => toward UE */) {
    const Eigen::Vector3d target =
        ip_index >= 0 ? st.ip_positions[ip_index] : st.position;
    const Eigen::Vector3d w = anchor_R.transpose() * (target - anchor);
    const Eigen::Matrix<double, 2, 3> A = angle_jacobian(w);
    Eigen::Matrix<double, 2, Eigen::Dynamic> rows =
        Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, st.dim());
    if (ip_index >= 0)
        rows.block<2, 3>(0, st.ip_offset(ip_index)) = A * anchor_R.transpose();
    else
        rows.block<2, 3>(0, 0) = A * anchor_R.transpose();
    return rows;
}

}  // namespace detail

// Jacobian of the per-path geometric channel parameters
// (delay_m, aoa_az, aoa_el, aod_az, aod_el) with respect to the state, for a
// single-BS scenario (Tx = BS with known pose, Rx = UE).
inline Eigen::MatrixXd scenario_state_jacobian(const Scenario &s,
                                               const StateVector &st) {
    const int L = static_cast<int>(s.paths.size());
    Eigen::MatrixXd J = Eigen::MatrixXd::Zero(5 * L, st.dim());
    const Eigen::Matrix3d R0 = s.rx.array.orientation;
    int ip_count = 0;
    for (int l = 0; l < L; ++l) {
        const PathGeometry &pg = s.paths[l];
        const bool nlos = pg.kind == PathKind::single_bounce;
        const int ip_index = nlos ? ip_count++ : -1;
        const Eigen::Vector3d *ip = nlos ? &st.ip_positions[ip_index] : nullptr;
        J.row(5 * l + 0) = detail::toa_row(st, s.tx.position, ip, ip_index);
        const Eigen::Vector3d rx_target = nlos ? *ip : s.tx.position;
        J.middleRows<2>(5 * l + 1) = detail::aoa_rows(st, R0, rx_target, ip_index);
        J.middleRows<2>(5 * l + 3) = detail::anchor_angle_rows(
            st, s.tx.position, s.tx.array.orientation, ip_index);
    }
    return J;
}

inline StateVector state_vector_of(const Scenario &s) {
    StateVector st;
    st.position = s.rx.position;
    st.has_orientation = s.rx.array.size() > 1;
    st.has_bias = true;
    st.clock_bias_m = s.clock.bias * kSpeedOfLight;
    for (const auto &p : s.paths)
        if (p.kind == PathKind::single_bounce) st.ip_positions.push_back(p.incidence_point);
    return st;
}

// Transforms a channel-domain FIM into the state domain. Gains are profiled
// out via a Schur complement and Doppler rows are dropped (static problem)
// before the geometric transform.
inline FimReport state_fim(const Scenario &s, const Eigen::MatrixXd &fim_channel) {
    const int L = static_cast<int>(s.paths.size());
    if (fim_channel.rows() != L * kParamsPerPath)
        throw ValidationError("state_fim: channel FIM dimension mismatch");

    // profile out Re/Im gain per path
    std::vector<int> nuisance;
    for (int l = 0; l < L; ++l) {
        nuisance.push_back(l * kParamsPerPath + 6);
        nuisance.push_back(l * kParamsPerPath + 7);
    }
    const Eigen::MatrixXd f1 = detail::profile_out(fim_channel, nuisance);

    // drop Doppler (index 5 of each remaining 6-block)
    std::vector<int> doppler;
    for (int l = 0; l < L; ++l) doppler.push_back(l * 6 + 5);
    std::vector<char> drop(f1.rows(), 0);
    for (int i : doppler) drop[i] = 1;
    std::vector<int> keep;
    for (int i = 0; i < f1.rows(); ++i)
        if (!drop[i]) keep.push_back(i);
    Eigen::MatrixXd f_geo(keep.size(), keep.size());
    for (size_t i = 0; i < keep.size(); ++i)
        for (size_t j = 0; j < keep.size(); ++j) f_geo(i, j) = f1(keep[i], keep[j]);

    FimReport rep;
    rep.fim_channel = f_geo;
    const StateVector st = state_vector_of(s);
    rep.jacobian = scenario_state_jacobian(s, st);
    rep.fim_state = rep.jacobian.transpose() * f_geo * rep.jacobian;

    rep.null_space_dim = detail::null_space_dim(rep.fim_state);
    rep.identifiable = rep.null_space_dim == 0;
    const Eigen::MatrixXd cov = detail::sym_pinv(rep.fim_state);
    if (rep.identifiable) {
        rep.peb = std::sqrt(cov.block<3, 3>(0, 0).trace());
        if (st.has_orientation)
            rep.oeb = std::sqrt(
                cov.block<3, 3>(st.orientation_offset(), st.orientation_offset())
                    .trace());
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Minimal-configuration identifiability sweep

struct SweepSetup {
    bool use_delays = true;
    bool mimo = true;  // arrays at both ends: AoA/AoD measurable, orientation unknown
};

struct SweepGeometry {
    Eigen::Vector3d ue = Eigen::Vector3d::Zero();
    Eigen::Matrix3d ue_R = Eigen::Matrix3d::Identity();
    std::vector<Eigen::Vector3d> bs;
    std::vector<Eigen::Matrix3d> bs_R;
    std::vector<std::pair<int, Eigen::Vector3d>> ips;  // (serving BS, position)
    std::vector<Eigen::Vector3d> ris;
    std::vector<Eigen::Matrix3d> ris_R;
    bool los = true;
};

// Measurement-domain Jacobian for the sweep. Rows are, per BS with LoS:
// [ToA] [AoD az,el] [AoA az,el]; per IP: [ToA] [AoD az,el] [AoA az,el]; per
// RIS: [ToA] [RIS departure az,el] [AoA az,el]. Delay and angle availability
// follow the setup; the RIS departure angle is measurable even for a
// single-antenna UE (temporal encoding). Angle rows are scaled by a nominal
// 10 m range so eigenvalue magnitudes are comparable to delay rows.
inline Eigen::MatrixXd sweep_jacobian(const SweepGeometry &g, const SweepSetup &set) {
    StateVector st;
    st.position = g.ue;
    st.has_orientation = set.mimo;
    st.has_bias = set.use_delays;
    for (const auto &ip : g.ips) st.ip_positions.push_back(ip.second);

    constexpr double kAngleScale = 10.0;
    std::vector<Eigen::RowVectorXd> rows;
    auto push2 = [&](const Eigen::Matrix<double, 2, Eigen::Dynamic> &m) {
        rows.emplace_back(kAngleScale * m.row(0));
        rows.emplace_back(kAngleScale * m.row(1));
    };

    for (size_t b = 0; b < g.bs.size(); ++b) {
        if (g.los) {
            if (set.use_delays)
                rows.push_back(detail::toa_row(st, g.bs[b], nullptr, -1));
            if (set.mimo) {
                push2(detail::anchor_angle_rows(st, g.bs[b], g.bs_R[b], -1));
                push2(detail::aoa_rows(st, g.ue_R, g.bs[b], -1));
            }
        }
    }
    for (size_t i = 0; i < g.ips.size(); ++i) {
        const int b = g.ips[i].first;
        if (set.use_delays)
            rows.push_back(
                detail::toa_row(st, g.bs[b], &st.ip_positions[i], static_cast<int>(i)));
        if (set.mimo) {
            push2(detail::anchor_angle_rows(st, g.bs[b], g.bs_R[b],
                                            static_cast<int>(i)));
            push2(detail::aoa_rows(st, g.ue_R, st.ip_positions[i],
                                   static_cast<int>(i)));
        }
    }
    for (size_t r = 0; r < g.ris.size(); ++r) {
        if (set.use_delays)
            rows.push_back(detail::toa_row(st, g.ris[r], nullptr, -1));
        push2(detail::anchor_angle_rows(st, g.ris[r], g.ris_R[r], -1));
        if (set.mimo) push2(detail::aoa_rows(st, g.ue_R, g.ris[r], -1));
    }

    Eigen::MatrixXd J(rows.size(), st.dim());
    for (size_t i = 0; i < rows.size(); ++i) J.row(i) = rows[i];
    return J;
}

inline bool sweep_identifiable(const SweepGeometry &g, const SweepSetup &set) {
    const Eigen::MatrixXd J = sweep_jacobian(g, set);
    if (J.rows() == 0) return false;
    return detail::null_space_dim(J.transpose() * J) == 0;
}

namespace detail {

inline Eigen::Matrix3d random_rotation(std::mt19937_64 &rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::Quaterniond q(gauss(rng), gauss(rng), gauss(rng), gauss(rng));
    q.normalize();
    return q.toRotationMatrix();
}

inline bool nearly_collinear(const std::vector<Eigen::Vector3d> &pts) {
    for (size_t i = 0; i < pts.size(); ++i)
        for (size_t j = i + 1; j < pts.size(); ++j)
            for (size_t k = j + 1; k < pts.size(); ++k) {
                const Eigen::Vector3d a = (pts[j] - pts[i]).normalized();
                const Eigen::Vector3d b = (pts[k] - pts[i]).normalized();
                if (a.cross(b).norm() < 0.05) return true;
            }
    return false;
}

// Generic random geometry; degenerate (close or collinear) draws are redrawn.
inline SweepGeometry random_geometry(int n_bs, int n_ip, int n_ris,
                                     std::mt19937_64 &rng, bool los) {
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int attempt = 0; attempt < 200; ++attempt) {
        SweepGeometry g;
        g.los = los;
        g.ue = {10.0 * uni(rng), 10.0 * uni(rng), 1.5 + 2.0 * uni(rng)};
        g.ue_R = random_rotation(rng);
        for (int b = 0; b < n_bs; ++b) {
            g.bs.push_back({20.0 * uni(rng), 20.0 * uni(rng), 10.0 + 4.0 * uni(rng)});
            g.bs_R.push_back(random_rotation(rng));
        }
        for (int i = 0; i < n_ip; ++i)
            g.ips.emplace_back(n_bs > 0 ? i % n_bs : 0,
                               Eigen::Vector3d{12.0 * uni(rng), 12.0 * uni(rng),
                                               3.0 + 3.0 * uni(rng)});
        for (int r = 0; r < n_ris; ++r) {
            g.ris.push_back({15.0 * uni(rng), 15.0 * uni(rng), 6.0 + 3.0 * uni(rng)});
            g.ris_R.push_back(random_rotation(rng));
        }
        std::vector<Eigen::Vector3d> pts = {g.ue};
        for (const auto &p : g.bs) pts.push_back(p);
        for (const auto &p : g.ips) pts.push_back(p.second);
        for (const auto &p : g.ris) pts.push_back(p);
        bool ok = true;
        for (size_t i = 0; ok && i < pts.size(); ++i)
            for (size_t j = i + 1; ok && j < pts.size(); ++j)
                if ((pts[i] - pts[j]).norm() < 1.0) ok = false;
        if (ok && !nearly_collinear(pts)) return g;
    }
    throw NumericalError("random_geometry: could not draw a generic geometry");
}

}  // namespace detail

struct CellResult {
    std::string row_label;
    std::string col_label;
    std::string verdict;   // e.g. "2 BS", "1 BS, 4 IP", "not identifiable", ...
    std::string expected;  // reference verdict
    bool agrees = false;
    std::string disagreement_note;  // offending geometry summary when !agrees
};

// Verdict for a fixed (n_bs, n_ip, n_ris, los) configuration: identifiable
// only if every random generic draw is identifiable.
inline bool config_identifiable(int n_bs, int n_ip, int n_ris, bool los,
                                const SweepSetup &set, int draws, uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (int d = 0; d < draws; ++d) {
        const SweepGeometry g = detail::random_geometry(n_bs, n_ip, n_ris, rng, los);
        if (!sweep_identifiable(g, set)) return false;
    }
    return true;
}

// Reproduces the minimal-configuration table: four deployment rows by four
// measurement columns, each verdict established on `draws` random generic
// geometries.
inline std::vector<CellResult> table1_sweep(uint64_t seed = 1234, int draws = 10) {
    const std::vector<std::pair<std::string, SweepSetup>> cols = {
        {"angle-only SISO", {false, false}},
        {"angle-only MIMO", {false, true}},
        {"angle&delay SISO", {true, false}},
        {"angle&delay MIMO", {true, true}},
    };
    // reference verdicts, row-major
    const std::vector<std::vector<std::string>> expected = {
        {"not applicable", "2 BS", "4 BS", "2 BS"},
        {"not applicable", "2 BS", "4 BS", "1 BS, 1 IP"},
        {"not applicable", "not identifiable", "not identifiable", "1 BS, 4 IP"},
        {"1 BS, 2 RIS", "1 BS, 1 RIS", "1 BS, 1 RIS", "1 BS, 1 RIS"},
    };
    const std::vector<std::string> row_labels = {"BS only", "BS + multipath",
                                                 "BS + multipath, no LOS", "BS + RIS"};

    std::vector<CellResult> out;
    for (int r = 0; r < 4; ++r) {
        for (int c = 0; c < 4; ++c) {
            const SweepSetup &set = cols[c].second;
            CellResult cell;
            cell.row_label = row_labels[r];
            cell.col_label = cols[c].first;
            cell.expected = expected[r][c];
            const uint64_t cell_seed = seed + 97 * r + c;

            // single-antenna links measure no angles; without a RIS the
            // angle-only column has no observable at all
            const bool no_measurement = !set.use_delays && !set.mimo && r != 3;
            if (no_measurement) {
                cell.verdict = "not applicable";
            } else if (r == 0) {  // BS only
                cell.verdict = "not identifiable";
                for (int nbs = 1; nbs <= 6; ++nbs)
                    if (config_identifiable(nbs, 0, 0, true, set, draws, cell_seed)) {
                        cell.verdict = std::to_string(nbs) + " BS";
                        break;
                    }
            } else if (r == 1) {  // BS + multipath
                cell.verdict = "not identifiable";
                bool found = false;
                for (int nbs = 1; nbs <= 6 && !found; ++nbs)
                    for (int nip = 0; nip <= 4 && !found; ++nip)
                        if (config_identifiable(nbs, nip, 0, true, set, draws,
                                                cell_seed)) {
                            cell.verdict = std::to_string(nbs) + " BS" +
                                           (nip > 0 ? ", " + std::to_string(nip) + " IP"
                                                    : "");
                            found = true;
                        }
            } else if (r == 2) {  // single BS, no LoS
                cell.verdict = "not identifiable";
                for (int nip = 1; nip <= 6; ++nip)
                    if (config_identifiable(1, nip, 0, false, set, draws, cell_seed)) {
                        cell.verdict = "1 BS, " + std::to_string(nip) + " IP";
                        break;
                    }
            } else {  // single BS + RIS
                cell.verdict = "not identifiable";
                for (int nris = 1; nris <= 3; ++nris)
                    if (config_identifiable(1, 0, nris, true, set, draws, cell_seed)) {
                        cell.verdict = "1 BS, " + std::to_string(nris) + " RIS";
                        break;
                    }
            }
            cell.agrees = cell.verdict == cell.expected;
            if (!cell.agrees)
                cell.disagreement_note = "seed " + std::to_string(cell_seed);
            out.push_back(cell);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model-mismatch bias probe: fit a far-field single-path model to a
// near-field truth and report the pseudo-true parameter offsets.

struct MismatchProbeResult {
    double az_true = 0, az_pseudo = 0, az_bias = 0;
    double delay_true = 0, delay_pseudo = 0, delay_bias = 0;  // [s]
    Complex gain_pseudo;
};

namespace detail {

// Matched-projection score |b(az,tau)^H x|^2 of the far-field basis against
// the stacked truth observation x (elements x subcarriers).
inline double ff_fit_score(const Eigen::MatrixXcd &x, const ArrayGeometry &arr,
                           const SpectralGrid &grid, const Eigen::VectorXd &amps,
                           double az, double el, double tau, Complex *gain = nullptr) {
    const Eigen::VectorXcd a = steering_vector(arr, Angles{az, el}, grid.wavelength());
    Complex acc = 0.0;
    double norm2 = 0.0;
    for (int n_idx = 0; n_idx < grid.n_subcarriers; ++n_idx) {
        const int n = grid.subcarrier(n_idx);
        const Complex ph =
            amps[n_idx] * std::polar(1.0, -2.0 * kPi * n * grid.delta_f * tau);
        for (int p = 0; p < arr.size(); ++p) {
            acc += std::conj(a[p] * ph) * x(p, n_idx);
            norm2 += std::norm(a[p] * ph);
        }
    }
    if (gain) *gain = acc / norm2;
    return std::norm(acc) / norm2;
}

inline double parabolic_refine([[maybe_unused]] double xm1, double x0, double xp1, double fm1,
                               double f0, double fp1) {
    const double denom = fm1 - 2.0 * f0 + fp1;
    if (std::abs(denom) < 1e-300) return x0;
    double delta = 0.5 * (fm1 - fp1) / denom;
    delta = std::clamp(delta, -1.0, 1.0);
    return x0 + delta * (xp1 - x0);
}

}  // namespace detail

// Pseudo-true far-field parameters for a near-field truth scenario (single
// path, single-antenna Tx). Grid search over (azimuth, delay) with the gain
// profiled in closed form, then parabolic refinement on each axis.
inline MismatchProbeResult mismatch_bias_probe(const Scenario &truth,
                                               const Eigen::VectorXd &powers,
                                               int az_points = 721,
                                               int tau_oversample = 16) {
    if (truth.paths.size() != 1 || truth.tx.array.size() != 1)
        throw ValidationError("mismatch_bias_probe: needs one path, single-antenna Tx");
    Scenario t = truth;
    t.flags.near_field = true;
    const ChannelTensor h = synthesize(t);
    const int N = t.grid.n_subcarriers;
    const int P = t.rx.array.size();
    Eigen::VectorXd amps(N);
    for (int n = 0; n < N; ++n) amps[n] = std::sqrt(powers[n]);
    Eigen::MatrixXcd x(P, N);
    for (int n = 0; n < N; ++n) x.col(n) = amps[n] * h.at(n, 0).col(0);

    const PathParams pp = geometric_path_params(t, 0);
    MismatchProbeResult res;
    res.az_true = pp.aoa.az;
    res.delay_true = pp.delay;
    const double el = pp.aoa.el;

    // coarse grid; the azimuth window is centered on the true direction so a
    // linear array's mirror peak (same axis projection) is not picked up
    const double tau_span = 2.0 / t.grid.bandwidth();
    const int tau_points = 4 * tau_oversample + 1;
    double best = -1.0;
    int bi = -1, bj = -1;
    Eigen::MatrixXd score(az_points, tau_points);
    std::vector<double> azs(az_points), taus(tau_points);
    const double az_half = kPi / 4;
    for (int i = 0; i < az_points; ++i)
        azs[i] = res.az_true - az_half + (i + 0.5) * 2.0 * az_half / az_points;
    for (int j = 0; j < tau_points; ++j)
        taus[j] = pp.delay - tau_span + 2.0 * tau_span * j / (tau_points - 1);
    for (int i = 0; i < az_points; ++i)
        for (int j = 0; j < tau_points; ++j) {
            score(i, j) =
                detail::ff_fit_score(x, t.rx.array, t.grid, amps, azs[i], el, taus[j]);
            if (score(i, j) > best) {
                best = score(i, j);
                bi = i;
                bj = j;
            }
        }
    if (bi == 0 || bi == az_points - 1 || bj == 0 || bj == tau_points - 1)
        throw NumericalError("mismatch_bias_probe: grid too coarse to bracket minimum");

    // alternate parabolic refinement
    double az = azs[bi], tau = taus[bj];
    double daz = azs[1] - azs[0], dtau = taus[1] - taus[0];
    auto val = [&](double a, double tt) {
        return detail::ff_fit_score(x, t.rx.array, t.grid, amps, a, el, tt);
    };
    for (int it = 0; it < 30; ++it) {
        az = detail::parabolic_refine(az - daz, az, az + daz, val(az - daz, tau),
                                      val(az, tau), val(az + daz, tau));
        tau = detail::parabolic_refine(tau - dtau, tau, tau + dtau,
                                       val(az, tau - dtau), val(az, tau),
                                       val(az, tau + dtau));
        daz *= 0.5;
        dtau *= 0.5;
    }
    detail::ff_fit_score(x, t.rx.array, t.grid, amps, az, el, tau, &res.gain_pseudo);
    res.az_pseudo = az;
    res.delay_pseudo = tau;
    res.az_bias = az - res.az_true;
    res.delay_bias = tau - res.delay_true;
    return res;
}

}  // namespace radioloc
