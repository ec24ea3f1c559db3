// SPDX-License-Identifier: Apache-2.0
//
// Constant-velocity EKF over [position, velocity, clock bias] with
// position-fix and (delay, anchor-angle) measurement updates, plus NIS/NEES
// consistency statistics.

#pragma once

#include <boost/math/distributions/chi_squared.hpp>

#include "radioloc/estimation.hpp"

namespace radioloc {

inline constexpr int kTrackDim = 7;  // pos(3), vel(3), clock bias [m]

struct TrackState {
    Eigen::Matrix<double, kTrackDim, 1> x = Eigen::Matrix<double, kTrackDim, 1>::Zero();
    Eigen::Matrix<double, kTrackDim, kTrackDim> P =
        Eigen::Matrix<double, kTrackDim, kTrackDim>::Identity();
    double time = 0.0;

    Eigen::Vector3d position() const { return x.segment<3>(0); }
    Eigen::Vector3d velocity() const { return x.segment<3>(3); }
    double clock_bias_m() const { return x(6); }
};

struct MotionModel {
    double accel_psd = 1.0;       // white-acceleration spectral density [m^2/s^3]
    double clock_drift_psd = 0.1; // bias random walk [m^2/s]
};

// Propagate by dt under the constant-velocity model. Process noise uses the
// discretized white-acceleration blocks
//   [dt^3/3 dt^2/2; dt^2/2 dt] * accel_psd
// per axis and a random walk on the bias.
inline void predict(TrackState &st, const MotionModel &model, double dt) {
    if (!(dt > 0)) throw ValidationError("predict: dt must be > 0");
    Eigen::Matrix<double, kTrackDim, kTrackDim> F =
        Eigen::Matrix<double, kTrackDim, kTrackDim>::Identity();
    F.block<3, 3>(0, 3) = dt * Eigen::Matrix3d::Identity();
    Eigen::Matrix<double, kTrackDim, kTrackDim> Q =
        Eigen::Matrix<double, kTrackDim, kTrackDim>::Zero();
    const double q = model.accel_psd;
    for (int a = 0; a < 3; ++a) {
        Q(a, a) = q * dt * dt * dt / 3.0;
        Q(a, a + 3) = Q(a + 3, a) = q * dt * dt / 2.0;
        Q(a + 3, a + 3) = q * dt;
    }
    Q(6, 6) = model.clock_drift_psd * dt;
    st.x = F * st.x;
    st.P = F * st.P * F.transpose() + Q;
    st.time += dt;
}

struct UpdateReport {
    double nis = 0.0;  // innovation^T S^-1 innovation
    Eigen::VectorXd innovation;
};

namespace detail {

// Joseph-form measurement update; returns the NIS.
inline UpdateReport kalman_update(TrackState &st, const Eigen::VectorXd &innovation,
                                  const Eigen::MatrixXd &H, const Eigen::MatrixXd &R) {
    const Eigen::MatrixXd S = H * st.P * H.transpose() + R;
    const Eigen::LDLT<Eigen::MatrixXd> Sldlt(S);
    if (Sldlt.info() != Eigen::Success)
        throw NumericalError("kalman_update: singular innovation covariance");
    const Eigen::MatrixXd K = Sldlt.solve(H * st.P).transpose();
    st.x += K * innovation;
    const Eigen::MatrixXd IKH =
        Eigen::MatrixXd::Identity(kTrackDim, kTrackDim) - K * H;
    st.P = IKH * st.P * IKH.transpose() + K * R * K.transpose();
    st.P = 0.5 * (st.P + st.P.transpose());
    UpdateReport rep;
    rep.innovation = innovation;
    rep.nis = innovation.dot(Sldlt.solve(innovation));
    return rep;
}

}  // namespace detail

// Direct position-fix update (linear measurement of the position block).
inline UpdateReport update_position_fix(TrackState &st, const Eigen::Vector3d &fix,
                                        const Eigen::Matrix3d &R) {
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(3, kTrackDim);
    H.block<3, 3>(0, 0) = Eigen::Matrix3d::Identity();
    return detail::kalman_update(st, fix - st.position(), H, R);
}

struct RangeAngleMeasurement {
    double toa = 0.0;  // [s], includes the clock bias
    Angles angles;     // direction of the user seen from the anchor
    double var_toa = 1e-18;
    double var_az = 1e-6;
    double var_el = 1e-6;
};

// Measurement-domain update: biased delay plus the azimuth/elevation of the
// user in the anchor frame. Delay handled in meters.
inline UpdateReport update_range_angle(TrackState &st, const BsPose &anchor,
                                       const RangeAngleMeasurement &m) {
    const Eigen::Vector3d d = st.position() - anchor.position;
    const double rng = d.norm();
    if (rng < 1e-9) throw NumericalError("update_range_angle: state at the anchor");
    const Eigen::Vector3d w = anchor.orientation.transpose() * d;
    const Angles pred = angles_from_unit(w);

    Eigen::VectorXd innov(3);
    innov(0) = kSpeedOfLight * m.toa - (rng + st.clock_bias_m());
    innov(1) = detail::wrap_angle(m.angles.az - pred.az);
    innov(2) = m.angles.el - pred.el;

    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(3, kTrackDim);
    H.block<1, 3>(0, 0) = (d / rng).transpose();
    H(0, 6) = 1.0;
    const Eigen::Matrix<double, 2, 3> dang =
        angle_jacobian(w) * anchor.orientation.transpose();
    H.block<2, 3>(1, 0) = dang;

    Eigen::Matrix3d R = Eigen::Matrix3d::Zero();
    R(0, 0) = kSpeedOfLight * kSpeedOfLight * m.var_toa;
    R(1, 1) = m.var_az;
    R(2, 2) = m.var_el;
    // innovation sign: z - h(x), Jacobian rows are dh/dx
    return detail::kalman_update(st, innov, H, R);
}

// Normalized estimation error squared against a known truth (for consistency
// evaluation in simulation).
inline double nees(const TrackState &st, const Eigen::Vector3d &true_pos,
                   const Eigen::Vector3d &true_vel, double true_bias_m) {
    Eigen::Matrix<double, kTrackDim, 1> e;
    e << st.position() - true_pos, st.velocity() - true_vel,
        st.clock_bias_m() - true_bias_m;
    const Eigen::LDLT<Eigen::Matrix<double, kTrackDim, kTrackDim>> ldlt(st.P);
    if (ldlt.info() != Eigen::Success)
        throw NumericalError("nees: singular covariance");
    return e.dot(ldlt.solve(e));
}

// Two-sided chi-square acceptance interval for an average of `n_samples`
// statistics with `dof` degrees of freedom each.
inline std::pair<double, double> chi_square_band(int dof, int n_samples,
                                                 double tail_prob = 0.025) {
    boost::math::chi_squared dist(double(dof) * n_samples);
    return {boost::math::quantile(dist, tail_prob) / n_samples,
            boost::math::quantile(dist, 1.0 - tail_prob) / n_samples};
}

}  // namespace radioloc
