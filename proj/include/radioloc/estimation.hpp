// SPDX-License-Identifier: Apache-2.0
//
// Channel-parameter estimators (delay / angle correlators with local
// refinement), the geometric multipath position solver, RIS-aided
// localization, and carrier-phase ranging.

#pragma once

#include <random>

#include "radioloc/bounds.hpp"

namespace radioloc {

struct NotIdentifiableError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Delay estimation

struct DelayEstimate {
    double tau_hat = 0.0;
    double quality = 0.0;  // normalized correlation in [0, 1]
    bool low_confidence = false;
};

namespace detail {

inline double wrap_angle(double a) {
    while (a > kPi) a -= 2.0 * kPi;
    while (a <= -kPi) a += 2.0 * kPi;
    return a;
}

}  // namespace detail

// Matched-filter delay search: C(tau) = sum_n sqrt(p_n) y_n exp(j2pi n df tau)
// maximized over the unambiguous range with quadratic interpolation around
// the grid peak.
inline DelayEstimate estimate_delay(const Eigen::VectorXcd &y,
                                    const Eigen::VectorXd &powers,
                                    const SpectralGrid &grid, int oversample) {
    const int N = grid.n_subcarriers;
    if (y.size() != N || powers.size() != N)
        throw ValidationError("estimate_delay: dimension mismatch");
    const int points = std::max(8, N * oversample);
    const double span = 1.0 / grid.delta_f;

    auto corr = [&](double tau) {
        Complex acc = 0.0;
        for (int n_idx = 0; n_idx < N; ++n_idx) {
            const int n = grid.subcarrier(n_idx);
            acc += std::sqrt(powers[n_idx]) * y[n_idx] *
                   std::polar(1.0, 2.0 * kPi * n * grid.delta_f * tau);
        }
        return std::norm(acc);
    };

    int bi = 0;
    double best = -1.0;
    std::vector<double> val(points);
    for (int i = 0; i < points; ++i) {
        val[i] = corr(span * i / points);
        if (val[i] > best) {
            best = val[i];
            bi = i;
        }
    }
    const double step = span / points;
    // neighbors wrap (the correlator is periodic in the unambiguous range)
    const double fm1 = val[(bi - 1 + points) % points];
    const double fp1 = val[(bi + 1) % points];
    const double tau0 = step * bi;
    double tau = detail::parabolic_refine(tau0 - step, tau0, tau0 + step, fm1, best, fp1);
    // a few shrinking parabolic refinements
    double h = step / 2;
    for (int it = 0; it < 25; ++it) {
        tau = detail::parabolic_refine(tau - h, tau, tau + h, corr(tau - h), corr(tau),
                                       corr(tau + h));
        h *= 0.5;
    }
    if (tau < 0) tau += span;

    DelayEstimate out;
    out.tau_hat = tau;
    const double e_ref = powers.sum();
    const double e_sig = y.squaredNorm();
    out.quality = e_ref > 0 && e_sig > 0 ? corr(tau) / (e_ref * e_sig) : 0.0;
    out.low_confidence = out.quality < 0.2;
    return out;
}

// ---------------------------------------------------------------------------
// Angle estimation

struct AngleEstimate {
    Angles angles;
    double range_hat = std::numeric_limits<double>::infinity();  // near-field only
    double quality = 0.0;
    bool ambiguous = false;  // grating-lobe tie
};

namespace detail {

inline bool is_linear_array(const ArrayGeometry &arr) {
    if (arr.size() < 3) return true;
    Eigen::Vector3d d = Eigen::Vector3d::Zero();
    for (const auto &o : arr.element_offsets)
        if (o.norm() > 1e-12) {
            d = o.normalized();
            break;
        }
    for (const auto &o : arr.element_offsets)
        if (o.cross(d).norm() > 1e-9 * std::max(1.0, o.norm())) return false;
    return true;
}

}  // namespace detail

// Beamformer scan: argmax |a(theta)^H y|^2 over an azimuth (and, for planar
// arrays, elevation) grid with parabolic refinement. Linear arrays scan
// azimuth over (0, pi) only -- the observable is the projection on the array
// axis, which that branch covers bijectively (elevation is unobservable).
// Planar arrays scan the full azimuth circle with elevation in [0, pi/2)
// (the sign of the broadside component is unobservable). A tied secondary
// peak away from the main lobe flags a grating-lobe ambiguity, broken toward
// `prior_az` when given.
inline AngleEstimate estimate_angles(const Eigen::VectorXcd &y,
                                     const ArrayGeometry &arr, double lambda,
                                     int az_points = 2048,
                                     std::optional<double> prior_az = std::nullopt) {
    if (y.size() != arr.size())
        throw ValidationError("estimate_angles: dimension mismatch");
    const bool linear = detail::is_linear_array(arr);
    const int el_points = linear ? 1 : 64;

    auto score = [&](double az, double el) {
        const Eigen::VectorXcd a = steering_vector(arr, Angles{az, el}, lambda);
        return std::norm(a.dot(y)) / arr.size();
    };

    std::vector<double> azs(az_points), els(el_points);
    for (int i = 0; i < az_points; ++i)
        azs[i] = linear ? (i + 0.5) * kPi / az_points
                        : -kPi + (i + 0.5) * 2.0 * kPi / az_points;
    for (int j = 0; j < el_points; ++j)
        els[j] = linear ? 0.0 : (j + 0.5) * 0.5 * kPi / el_points;

    Eigen::MatrixXd s(az_points, el_points);
    int bi = 0, bj = 0;
    double best = -1.0;
    for (int i = 0; i < az_points; ++i)
        for (int j = 0; j < el_points; ++j) {
            s(i, j) = score(azs[i], els[j]);
            if (s(i, j) > best) {
                best = s(i, j);
                bi = i;
                bj = j;
            }
        }

    // secondary-peak scan for grating lobes, away from the main beam
    double second = -1.0;
    int si = -1, sj = -1;
    const int guard = std::max(2, az_points / 64);
    for (int i = 1; i + 1 < az_points; ++i)
        for (int j = 0; j < el_points; ++j) {
            if (std::abs(i - bi) <= guard && std::abs(j - bj) <= 1) continue;
            if (s(i, j) >= s(i - 1, j) && s(i, j) >= s(i + 1, j) && s(i, j) > second) {
                second = s(i, j);
                si = i;
                sj = j;
            }
        }

    // refine both candidates off-grid before comparing: grid discretization
    // alone can separate two exactly tied lobes by much more than the tie
    // tolerance
    auto refine_az = [&](double az, double el) {
        double h = azs[1] - azs[0];
        for (int it = 0; it < 25; ++it) {
            az = detail::parabolic_refine(az - h, az, az + h, score(az - h, el),
                                          score(az, el), score(az + h, el));
            h *= 0.5;
        }
        return az;
    };
    AngleEstimate out;
    if (si >= 0) {
        const double best_ref = score(refine_az(azs[bi], els[bj]), els[bj]);
        const double second_ref = score(refine_az(azs[si], els[sj]), els[sj]);
        out.ambiguous = second_ref > best_ref * (1.0 - 1e-6);
    }
    if (out.ambiguous && prior_az && si >= 0) {
        // pick the tied peak closest to the prior
        if (std::abs(detail::wrap_angle(azs[si] - *prior_az)) <
            std::abs(detail::wrap_angle(azs[bi] - *prior_az))) {
            bi = si;
            bj = sj;
            best = second;
        }
    }

    double az = azs[bi], el = els[bj];
    double haz = azs[1] - azs[0];
    for (int it = 0; it < 25; ++it) {
        az = detail::parabolic_refine(az - haz, az, az + haz, score(az - haz, el),
                                      score(az, el), score(az + haz, el));
        haz *= 0.5;
    }
    if (!linear) {
        double hel = els[1] - els[0];
        for (int it = 0; it < 25; ++it) {
            el = detail::parabolic_refine(el - hel, el, el + hel, score(az, el - hel),
                                          score(az, el), score(az, el + hel));
            hel *= 0.5;
            az = detail::parabolic_refine(az - haz, az, az + haz, score(az - haz, el),
                                          score(az, el), score(az + haz, el));
        }
    }
    out.angles = {az, el};
    out.quality = score(az, el) / std::max(y.squaredNorm(), 1e-300);
    return out;
}

// Joint (azimuth, range) scan against the wavefront-curvature response.
// Azimuth is scanned over (0, pi): for a linear array a source mirrored
// across the array axis keeps every element distance, so only that branch
// is observable even in the near field.
inline AngleEstimate estimate_angles_near_field(const Eigen::VectorXcd &y,
                                                const ArrayGeometry &arr,
                                                double lambda, int az_points = 1024,
                                                int range_points = 96,
                                                double range_lo = 0.5,
                                                double range_hi = 100.0) {
    if (y.size() != arr.size())
        throw ValidationError("estimate_angles_near_field: dimension mismatch");
    auto score = [&](double az, double log_r) {
        const double r = std::exp(log_r);
        const Eigen::Vector3d src =
            arr.center + arr.orientation * unit_from_angles(Angles{az, 0.0}) * r;
        const Eigen::VectorXcd a = near_field_response(arr, src, lambda);
        return std::norm(a.dot(y)) / arr.size();
    };
    double best = -1.0, baz = 0.0, blr = 0.0;
    for (int i = 0; i < az_points; ++i) {
        const double az = (i + 0.5) * kPi / az_points;
        for (int j = 0; j < range_points; ++j) {
            const double lr = std::log(range_lo) +
                              (std::log(range_hi) - std::log(range_lo)) * j /
                                  (range_points - 1);
            const double v = score(az, lr);
            if (v > best) {
                best = v;
                baz = az;
                blr = lr;
            }
        }
    }
    double haz = kPi / az_points;
    double hlr = (std::log(range_hi) - std::log(range_lo)) / (range_points - 1);
    for (int it = 0; it < 30; ++it) {
        baz = detail::parabolic_refine(baz - haz, baz, baz + haz,
                                       score(baz - haz, blr), score(baz, blr),
                                       score(baz + haz, blr));
        blr = detail::parabolic_refine(blr - hlr, blr, blr + hlr,
                                       score(baz, blr - hlr), score(baz, blr),
                                       score(baz, blr + hlr));
        haz *= 0.6;
        hlr *= 0.6;
    }
    AngleEstimate out;
    out.angles = {baz, 0.0};
    out.range_hat = std::exp(blr);
    out.quality = score(baz, blr) / std::max(y.squaredNorm(), 1e-300);
    return out;
}

// ---------------------------------------------------------------------------
// Multipath position solver

struct PathMeasurement {
    bool nlos = false;
    bool use_toa = true, use_aoa = true, use_aod = true;
    double toa = 0.0;  // [s]
    Angles aoa, aod;
    double var_toa = 1e-18;
    double var_aoa_az = 1e-6, var_aoa_el = 1e-6;
    double var_aod_az = 1e-6, var_aod_el = 1e-6;
};

struct BsPose {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Matrix3d orientation = Eigen::Matrix3d::Identity();
};

struct FixOptions {
    int max_iterations = 100;
    double gradient_tol = 1e-10;
    int multistarts = 12;
    uint64_t seed = 7;
};

struct FixResult {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    Eigen::Matrix3d orientation = Eigen::Matrix3d::Identity();
    double clock_bias = 0.0;  // [s]
    std::vector<Eigen::Vector3d> ip_hats;
    Eigen::MatrixXd covariance;  // scaled state: position m, orient rad, bias m
    bool converged = false;
    int iterations = 0;
    double residual_norm = std::numeric_limits<double>::infinity();
};

namespace detail {

struct FixProblem {
    const std::vector<PathMeasurement> *meas;
    BsPose bs;
    bool any_aoa = false, any_toa = false;

    StateVector make_state(const Eigen::Vector3d &p, double bias_m,
                           const std::vector<Eigen::Vector3d> &ips) const {
        StateVector st;
        st.position = p;
        st.has_orientation = any_aoa;
        st.has_bias = any_toa;
        st.clock_bias_m = bias_m;
        st.ip_positions = ips;
        return st;
    }

    // residuals (weighted) and Jacobian at (state, R0)
    void evaluate(const StateVector &st, const Eigen::Matrix3d &R0,
                  Eigen::VectorXd &resid, Eigen::MatrixXd &jac) const {
        std::vector<double> rs;
        std::vector<Eigen::RowVectorXd> js;
        int ip_index = -1;
        for (const auto &m : *meas) {
            const Eigen::Vector3d *ip = nullptr;
            if (m.nlos) {
                ++ip_index;
                ip = &st.ip_positions[ip_index];
            }
            const int ipi = m.nlos ? ip_index : -1;
            if (m.use_toa) {
                double len = m.nlos ? ((bs.position - *ip).norm() +
                                       (st.position - *ip).norm())
                                    : (bs.position - st.position).norm();
                const double sigma = kSpeedOfLight * std::sqrt(m.var_toa);
                rs.push_back((kSpeedOfLight * m.toa -
                              (len + (st.has_bias ? st.clock_bias_m : 0.0))) /
                             sigma);
                js.push_back(-toa_row(st, bs.position, ip, ipi) / sigma);
            }
            if (m.use_aoa) {
                const Eigen::Vector3d target = m.nlos ? *ip : bs.position;
                const Eigen::Vector3d w = R0.transpose() * (target - st.position);
                const Angles model = angles_from_unit(w);
                const auto rows = aoa_rows(st, R0, target, ipi);
                const double saz = std::sqrt(m.var_aoa_az), sel = std::sqrt(m.var_aoa_el);
                rs.push_back(wrap_angle(m.aoa.az - model.az) / saz);
                js.push_back(-rows.row(0) / saz);
                rs.push_back((m.aoa.el - model.el) / sel);
                js.push_back(-rows.row(1) / sel);
            }
            if (m.use_aod) {
                const Eigen::Vector3d target = m.nlos ? *ip : st.position;
                const Angles model = angles_from_unit(
                    bs.orientation.transpose() * (target - bs.position));
                const auto rows = anchor_angle_rows(st, bs.position, bs.orientation,
                                                    m.nlos ? ipi : -1);
                const double saz = std::sqrt(m.var_aod_az), sel = std::sqrt(m.var_aod_el);
                rs.push_back(wrap_angle(m.aod.az - model.az) / saz);
                js.push_back(-rows.row(0) / saz);
                rs.push_back((m.aod.el - model.el) / sel);
                js.push_back(-rows.row(1) / sel);
            }
        }
        resid.resize(rs.size());
        jac.resize(rs.size(), st.dim());
        for (size_t i = 0; i < rs.size(); ++i) {
            resid[i] = rs[i];
            jac.row(i) = js[i];
        }
    }
};

}  // namespace detail

// Weighted Gauss-Newton (Levenberg damping) over [position, orientation,
// clock bias, IP positions]. Initialization from the LoS path closed form
// when available, otherwise coarse random multi-start. Refuses structurally
// non-identifiable inputs.
inline FixResult multipath_fix(const std::vector<PathMeasurement> &meas,
                               const BsPose &bs, const FixOptions &opt = {}) {
    detail::FixProblem prob;
    prob.meas = &meas;
    prob.bs = bs;
    int n_ips = 0;
    for (const auto &m : meas) {
        prob.any_aoa |= m.use_aoa;
        prob.any_toa |= m.use_toa;
        if (m.nlos) ++n_ips;
    }

    std::mt19937_64 rng(opt.seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::uniform_real_distribution<double> uni01(0.0, 1.0);

    // coarse scene scale from the delays
    double scale = 10.0;
    for (const auto &m : meas)
        if (m.use_toa) scale = std::max(scale, kSpeedOfLight * m.toa);

    const PathMeasurement *los = nullptr;
    for (const auto &m : meas)
        if (!m.nlos) {
            los = &m;
            break;
        }

    auto make_start = [&](int attempt) {
        Eigen::Vector3d p0;
        Eigen::Matrix3d R0 = Eigen::Matrix3d::Identity();
        if (los && los->use_aod && los->use_toa && attempt < 4) {
            const Eigen::Vector3d u = bs.orientation * unit_from_angles(los->aod);
            p0 = bs.position + kSpeedOfLight * los->toa * u;
            if (los->use_aoa) {
                const Eigen::Vector3d u_global = (bs.position - p0).normalized();
                const Eigen::Vector3d u_local = unit_from_angles(los->aoa);
                R0 = Eigen::Quaterniond::FromTwoVectors(u_local, u_global)
                         .toRotationMatrix();
                R0 = Eigen::AngleAxisd(attempt * kPi / 2.0, u_global).toRotationMatrix() *
                     R0;
            }
        } else {
            p0 = scale * Eigen::Vector3d(uni(rng), uni(rng), uni01(rng));
            R0 = detail::random_rotation(rng);
        }
        // IP inits on the per-path AoD rays, consistent with the delays
        std::vector<Eigen::Vector3d> ips;
        for (const auto &m : meas) {
            if (!m.nlos) continue;
            Eigen::Vector3d ip;
            if (m.use_aod && m.use_toa) {
                const Eigen::Vector3d d = bs.orientation * unit_from_angles(m.aod);
                const Eigen::Vector3d w = bs.position - p0;
                const double r = kSpeedOfLight * m.toa;
                const double denom = 2.0 * (r + w.dot(d));
                double sdist = std::abs(denom) > 1e-9
                                   ? (r * r - w.squaredNorm()) / denom
                                   : r / 2;
                if (!(sdist > 0) || sdist > r) sdist = r / 2;
                ip = bs.position + sdist * d;
            } else {
                ip = p0 + scale * 0.3 * Eigen::Vector3d(uni(rng), uni(rng), uni(rng));
            }
            ips.push_back(ip);
        }
        return std::make_tuple(p0, R0, ips);
    };

    // structural identifiability pre-check at a generic nearby state
    {
        auto [p0, R0, ips] = make_start(0);
        StateVector st = prob.make_state(p0, 0.0, ips);
        Eigen::VectorXd r;
        Eigen::MatrixXd J;
        prob.evaluate(st, R0, r, J);
        bool deficient = static_cast<int>(J.rows()) < st.dim();
        if (!deficient) {
            const Eigen::JacobiSVD<Eigen::MatrixXd> svd(J);
            const auto &sv = svd.singularValues();
            deficient = sv[sv.size() - 1] < 1e-9 * sv[0];
        }
        if (deficient)
            throw NotIdentifiableError(
                "multipath_fix: configuration not identifiable (rank-deficient "
                "measurement model)");
    }

    FixResult best;
    double best_cost = std::numeric_limits<double>::infinity();
    for (int start = 0; start < opt.multistarts; ++start) {
        auto [p0, R0, ips] = make_start(start);
        StateVector st = prob.make_state(p0, 0.0, ips);
        double lm = 1e-6;
        Eigen::VectorXd r;
        Eigen::MatrixXd J;
        prob.evaluate(st, R0, r, J);
        double cost = r.squaredNorm();
        int it = 0;
        bool converged = false;
        // gradient tolerance is relative to the problem scale set by the
        // initial gradient (residuals are noise-normalized, so magnitudes
        // vary wildly between setups)
        double g_scale = 1.0;
        for (; it < opt.max_iterations; ++it) {
            const Eigen::MatrixXd H = J.transpose() * J;
            const Eigen::VectorXd g = J.transpose() * r;
            if (it == 0) g_scale = std::max(1.0, g.norm());
            if (g.norm() < opt.gradient_tol * g_scale) {
                converged = true;
                break;
            }
            const Eigen::VectorXd step =
                -(H + lm * Eigen::MatrixXd::Identity(H.rows(), H.cols()))
                     .ldlt()
                     .solve(g);
            // apply step
            StateVector st2 = st;
            Eigen::Matrix3d R2 = R0;
            st2.position += step.segment<3>(0);
            if (st.has_orientation)
                R2 = R0 * rotation_exp(step.segment<3>(st.orientation_offset()));
            if (st.has_bias) st2.clock_bias_m += step(st.bias_offset());
            for (size_t i = 0; i < st.ip_positions.size(); ++i)
                st2.ip_positions[i] += step.segment<3>(st.ip_offset(int(i)));
            Eigen::VectorXd r2;
            Eigen::MatrixXd J2;
            prob.evaluate(st2, R2, r2, J2);
            const double cost2 = r2.squaredNorm();
            if (cost2 < cost) {
                st = st2;
                R0 = R2;
                r = r2;
                J = J2;
                cost = cost2;
                lm = std::max(lm * 0.3, 1e-12);
                if (step.norm() < 1e-12) {
                    converged = true;
                    break;
                }
            } else {
                lm *= 10.0;
                if (lm > 1e12) {
                    // stalled at the numerical floor; accept if the gradient
                    // has already collapsed relative to its initial scale
                    converged = g.norm() < 1e-6 * g_scale;
                    break;
                }
            }
        }
        if (cost < best_cost) {
            best_cost = cost;
            best.position = st.position;
            best.orientation = R0;
            best.clock_bias = st.has_bias ? st.clock_bias_m / kSpeedOfLight : 0.0;
            best.ip_hats = st.ip_positions;
            best.converged = converged;
            best.iterations = it;
            best.residual_norm = std::sqrt(cost);
            const Eigen::MatrixXd H = J.transpose() * J;
            best.covariance = detail::sym_pinv(H);
        }
        if (best.converged && best_cost < 1e-16) break;
    }
    return best;
}

// ---------------------------------------------------------------------------
// RIS-aided localization (single-antenna link)

struct RisFixResult {
    Eigen::Vector3d position = Eigen::Vector3d::Zero();
    double clock_bias = 0.0;  // [s]
    double tau_los = 0.0, tau_ris = 0.0;
    Angles ris_departure;
    bool converged = false;
};

// Separates the RIS path from the static channel by least squares against the
// temporal code, estimates (tau_los, tau_ris, RIS departure angle), then
// solves (position, bias) by Gauss-Newton. Requires code diversity over the
// symbol dimension.
inline RisFixResult ris_fix(const Eigen::MatrixXcd &y, const Scenario &s,
                            const Eigen::VectorXd &powers, int oversample = 64) {
    if (!s.ris) throw ConfigError("ris_fix: scenario has no RIS");
    const RisPanel &ris = *s.ris;
    const int N = s.grid.n_subcarriers, K = s.grid.n_symbols;
    const int M = ris.elements();
    if (y.rows() != N || y.cols() != K)
        throw ValidationError("ris_fix: observation dimension mismatch");

    // temporal design matrix [static | per-element code]
    Eigen::MatrixXcd E(K, M + 1);
    for (int k = 0; k < K; ++k) {
        E(k, 0) = 1.0;
        for (int m = 0; m < M; ++m) E(k, m + 1) = ris.profiles[k][m];
    }
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(E, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double cond_tol = 1e-9 * svd.singularValues()[0];
    if (svd.singularValues().minCoeff() < cond_tol || K < M + 1)
        throw ConfigError(
            "ris_fix: RIS profile has no temporal diversity; separation impossible");

    Eigen::MatrixXcd X(M + 1, N);  // row 0: static part, rows 1..M: element parts
    for (int n = 0; n < N; ++n) X.col(n) = svd.solve(y.row(n).transpose());

    RisFixResult out;
    // LoS delay from the static component
    out.tau_los =
        estimate_delay(X.row(0).transpose(), powers, s.grid, oversample).tau_hat;

    // RIS delay from the strongest element signature
    int m_star = 0;
    double e_best = -1.0;
    for (int m = 0; m < M; ++m) {
        const double e = X.row(m + 1).squaredNorm();
        if (e > e_best) {
            e_best = e;
            m_star = m;
        }
    }
    out.tau_ris =
        estimate_delay(X.row(m_star + 1).transpose(), powers, s.grid, oversample)
            .tau_hat;

    // per-element gains at the estimated RIS delay
    Eigen::VectorXcd g(M);
    for (int m = 0; m < M; ++m) {
        Complex acc = 0.0;
        for (int n_idx = 0; n_idx < N; ++n_idx) {
            const int n = s.grid.subcarrier(n_idx);
            acc += std::sqrt(powers[n_idx]) * X(m + 1, n_idx) *
                   std::polar(1.0, 2.0 * kPi * n * s.grid.delta_f * out.tau_ris);
        }
        g[m] = acc;
    }
    // remove the known arrival response (BS -> RIS) and beamform the residual
    const Angles aoa_ris = ris.geometry.local_direction_to(s.tx.position);
    const Eigen::VectorXcd a_in =
        steering_vector(ris.geometry, aoa_ris, s.grid.wavelength());
    const Eigen::VectorXcd c = g.cwiseProduct(a_in.conjugate());
    out.ris_departure =
        estimate_angles(c, ris.geometry, s.grid.wavelength()).angles;

    // Gauss-Newton over (position, bias_m): measurements are the two delays
    // (meters) and the RIS departure angles
    Eigen::Vector3d p = ris.geometry.center +
                        ris.geometry.orientation *
                            unit_from_angles(out.ris_departure) *
                            std::max(1.0, kSpeedOfLight * (out.tau_ris - out.tau_los));
    double bias_m = 0.0;
    const double d_bs_ris = (s.tx.position - ris.geometry.center).norm();
    for (int it = 0; it < 100; ++it) {
        Eigen::VectorXd r(4);
        Eigen::MatrixXd J(4, 4);
        const Eigen::Vector3d u_bs = (p - s.tx.position).normalized();
        const double len_los = (p - s.tx.position).norm();
        r(0) = kSpeedOfLight * out.tau_los - (len_los + bias_m);
        J.row(0) << -u_bs.transpose(), -1.0;
        const Eigen::Vector3d u_ris = (p - ris.geometry.center).normalized();
        const double len_ris = d_bs_ris + (p - ris.geometry.center).norm();
        r(1) = kSpeedOfLight * out.tau_ris - (len_ris + bias_m);
        J.row(1) << -u_ris.transpose(), -1.0;
        const Eigen::Vector3d w =
            ris.geometry.orientation.transpose() * (p - ris.geometry.center);
        const Angles model = angles_from_unit(w);
        const Eigen::Matrix<double, 2, 3> A = angle_jacobian(w);
        const Eigen::Matrix<double, 2, 3> dw =
            A * ris.geometry.orientation.transpose();
        const double angle_scale = 10.0;  // meters per radian, balances units
        r(2) = angle_scale * detail::wrap_angle(out.ris_departure.az - model.az);
        J.row(2) << -angle_scale * dw.row(0), 0.0;
        r(3) = angle_scale * (out.ris_departure.el - model.el);
        J.row(3) << -angle_scale * dw.row(1), 0.0;

        // J is square here, solve the Newton step directly
        const Eigen::Vector4d gn = -J.fullPivLu().solve(r);
        p += gn.segment<3>(0);
        bias_m += gn(3);
        if (gn.norm() < 1e-10) {
            out.converged = true;
            break;
        }
    }
    out.position = p;
    out.clock_bias = bias_m / kSpeedOfLight;
    return out;
}

// ---------------------------------------------------------------------------
// Carrier-phase ranging

struct CarrierPhaseResult {
    double range_hat = 0.0;
    int integer = 0;
    double confidence = 0.0;  // margin between best and runner-up candidates
    bool flagged = false;
};

struct AmbiguityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Resolves ||x_tx - x_rx|| = lambda (-psi_1 + psi_tx + psi_rx) / (2 pi) + z
// lambda by searching the integer z inside coarse_range +- 3 sigma.
inline CarrierPhaseResult carrier_phase_range(double psi_1, double coarse_range,
                                              double coarse_sigma, double lambda,
                                              double psi_tx, double psi_rx) {
    if (!(lambda > 0)) throw ValidationError("carrier_phase_range: lambda must be > 0");
    const double frac = lambda * (-psi_1 + psi_tx + psi_rx) / (2.0 * kPi);
    const double lo = coarse_range - 3.0 * coarse_sigma;
    const double hi = coarse_range + 3.0 * coarse_sigma;
    const long z_lo = static_cast<long>(std::floor((lo - frac) / lambda));
    const long z_hi = static_cast<long>(std::ceil((hi - frac) / lambda));
    if (z_hi - z_lo > 100)
        throw AmbiguityError("carrier_phase_range: ambiguity window spans > 100 integers");

    CarrierPhaseResult out;
    double best = std::numeric_limits<double>::infinity();
    double second = std::numeric_limits<double>::infinity();
    for (long z = z_lo; z <= z_hi; ++z) {
        const double r = frac + z * lambda;
        const double d = std::abs(r - coarse_range);
        if (d < best) {
            second = best;
            best = d;
            out.integer = static_cast<int>(z);
            out.range_hat = r;
        } else if (d < second) {
            second = d;
        }
    }
    out.confidence = std::isfinite(second) ? (second - best) / lambda : 1.0;
    out.flagged = coarse_sigma > lambda / 4.0 || out.confidence < 0.25;
    return out;
}

}  // namespace radioloc
