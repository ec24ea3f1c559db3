// SPDX-License-Identifier: Apache-2.0

#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "radioloc/tracking.hpp"

using namespace radioloc;

namespace {

TrackState state_at(const Eigen::Vector3d &p, const Eigen::Vector3d &v,
                    double bias_m, double p_var = 1.0) {
    TrackState st;
    st.x << p, v, bias_m;
    st.P = p_var * Eigen::Matrix<double, kTrackDim, kTrackDim>::Identity();
    return st;
}

}  // namespace

TEST_CASE("prediction with zero noise and zero velocity is the identity") {
    TrackState st = state_at({1.0, 2.0, 3.0}, Eigen::Vector3d::Zero(), 4.0);
    // certain velocity: otherwise the position covariance legitimately grows
    // through the position-velocity coupling
    st.P.block<3, 3>(3, 3).setZero();
    const TrackState before = st;
    predict(st, {0.0, 0.0}, 0.5);
    REQUIRE((st.x - before.x).norm() == 0.0);
    REQUIRE((st.P - before.P).cwiseAbs().maxCoeff() < 1e-15);
    REQUIRE(st.time == Catch::Approx(0.5));
}

TEST_CASE("prediction advances the position by velocity times dt") {
    const Eigen::Vector3d v(1.5, -2.0, 0.25);
    TrackState st = state_at({1.0, 2.0, 3.0}, v, 0.0);
    predict(st, {0.3, 0.01}, 2.0);
    REQUIRE((st.position() - (Eigen::Vector3d(1.0, 2.0, 3.0) + 2.0 * v)).norm() <
            1e-12);
    REQUIRE((st.velocity() - v).norm() < 1e-12);
}

TEST_CASE("covariance trace grows under positive process noise") {
    TrackState st = state_at({0, 0, 0}, {1, 0, 0}, 0.0);
    double prev = st.P.trace();
    for (int i = 0; i < 10; ++i) {
        predict(st, {0.5, 0.05}, 0.2);
        REQUIRE(st.P.trace() > prev);
        prev = st.P.trace();
    }
}

TEST_CASE("non-positive dt is rejected") {
    TrackState st;
    REQUIRE_THROWS_AS(predict(st, {1.0, 0.1}, 0.0), ValidationError);
    REQUIRE_THROWS_AS(predict(st, {1.0, 0.1}, -1.0), ValidationError);
}

TEST_CASE("a near-exact position fix snaps the mean onto the measurement") {
    TrackState st = state_at({0, 0, 0}, {0, 0, 0}, 0.0, 100.0);
    const Eigen::Vector3d fix(3.0, -1.0, 2.0);
    update_position_fix(st, fix, 1e-12 * Eigen::Matrix3d::Identity());
    REQUIRE((st.position() - fix).norm() < 1e-5);
    REQUIRE(st.P.topLeftCorner<3, 3>().trace() < 1e-9);
}

TEST_CASE("repeated fixes on a static target contract the covariance") {
    TrackState st = state_at({5, 5, 1}, {0, 0, 0}, 0.0, 10.0);
    const Eigen::Matrix3d R = 0.01 * Eigen::Matrix3d::Identity();
    double prev = st.P.topLeftCorner<3, 3>().trace();
    for (int i = 0; i < 20; ++i) {
        update_position_fix(st, {5.0, 5.0, 1.0}, R);
        const double cur = st.P.topLeftCorner<3, 3>().trace();
        REQUIRE(cur <= prev + 1e-15);
        prev = cur;
    }
}

TEST_CASE("covariance stays symmetric positive semidefinite through updates") {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> gauss(0.0, 1.0);
    TrackState st = state_at({10, 0, 2}, {1, 1, 0}, 3.0, 25.0);
    BsPose anchor;
    for (int i = 0; i < 50; ++i) {
        predict(st, {0.4, 0.02}, 0.1);
        RangeAngleMeasurement m;
        const Eigen::Vector3d d = st.position() - anchor.position;
        m.toa = (d.norm() + st.clock_bias_m() + 0.02 * gauss(rng)) / kSpeedOfLight;
        const Angles ang = angles_from_unit(d);
        m.angles = {ang.az + 1e-3 * gauss(rng), ang.el + 1e-3 * gauss(rng)};
        m.var_toa = std::pow(0.02 / kSpeedOfLight, 2);
        m.var_az = m.var_el = 1e-6;
        update_range_angle(st, anchor, m);
        REQUIRE((st.P - st.P.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        const Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, kTrackDim, kTrackDim>>
            es(st.P);
        REQUIRE(es.eigenvalues().minCoeff() > -1e-12);
    }
}

TEST_CASE("filtered trajectory beats raw fixes and stays consistent") {
    const int runs = 50, steps = 40;
    const double dt = 0.1;
    const double q = 0.5, qb = 0.01;
    const double sigma_fix = 0.5;
    const Eigen::Matrix3d R = sigma_fix * sigma_fix * Eigen::Matrix3d::Identity();

    std::mt19937_64 rng(123);
    std::normal_distribution<double> gauss(0.0, 1.0);

    double se_filter = 0.0, se_raw = 0.0, nees_sum = 0.0;
    int nees_n = 0;
    for (int run = 0; run < runs; ++run) {
        // simulate a constant-velocity truth with white-acceleration noise
        Eigen::Vector3d p(0, 0, 0), v(1.0, 0.5, 0.0);
        double bias_m = 2.0;
        // draw the initial estimate from the stated prior so the NEES has
        // the right distribution from the first step
        TrackState st = state_at(p, v, bias_m, 4.0);
        for (int i = 0; i < kTrackDim; ++i) st.x[i] += 2.0 * gauss(rng);
        for (int k = 0; k < steps; ++k) {
            // discretized white-acceleration increment (exact two-block form)
            for (int a = 0; a < 3; ++a) {
                const double w1 = gauss(rng), w2 = gauss(rng);
                // covariance [dt^3/3 dt^2/2; dt^2/2 dt] * q via its Cholesky
                const double l11 = std::sqrt(q * dt * dt * dt / 3.0);
                const double l21 = q * dt * dt / 2.0 / l11;
                const double l22 = std::sqrt(q * dt - l21 * l21);
                p[a] += v[a] * dt + l11 * w1;
                v[a] += l21 * w1 + l22 * w2;
            }
            bias_m += std::sqrt(qb * dt) * gauss(rng);

            predict(st, {q, qb}, dt);
            Eigen::Vector3d fix = p;
            for (int a = 0; a < 3; ++a) fix[a] += sigma_fix * gauss(rng);
            update_position_fix(st, fix, R);

            se_filter += (st.position() - p).squaredNorm();
            se_raw += (fix - p).squaredNorm();
            // one NEES sample per run: consecutive steps are correlated and
            // would overstate the effective sample count of the band
            if (k == steps - 1) {
                nees_sum += nees(st, p, v, bias_m);
                ++nees_n;
            }
        }
    }
    const double rmse_filter = std::sqrt(se_filter / (runs * steps));
    const double rmse_raw = std::sqrt(se_raw / (runs * steps));
    REQUIRE(rmse_filter < rmse_raw);

    const auto band = chi_square_band(kTrackDim, nees_n);
    const double mean_nees = nees_sum / nees_n;
    REQUIRE(mean_nees > band.first);
    REQUIRE(mean_nees < band.second);
}

TEST_CASE("chi-square band brackets the mean of simulated chi-square draws") {
    const auto band = chi_square_band(3, 1000);
    REQUIRE(band.first < 3.0);
    REQUIRE(band.second > 3.0);
    // the band shrinks toward the mean as samples accumulate
    const auto wide = chi_square_band(3, 10);
    REQUIRE(wide.first < band.first);
    REQUIRE(wide.second > band.second);
}
