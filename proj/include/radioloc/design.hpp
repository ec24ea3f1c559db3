// SPDX-License-Identifier: Apache-2.0
//
// OFDM per-subcarrier power allocation for ranging: range profiles, the
// delay error bound, and the min-PEB optimizer under an ambiguity (sidelobe)
// constraint inside the prior delay region.

#pragma once

#include <algorithm>

#include "radioloc/scenario.hpp"

namespace radioloc {

struct PowerAllocation {
    Eigen::VectorXd powers;  // per subcarrier, [W], >= 0
    double budget = 1.0;     // total [W]

    void validate() const {
        if ((powers.array() < -1e-15).any())
            throw ValidationError("allocation: powers must be nonnegative");
        if (powers.sum() > budget * (1.0 + 1e-9))
            throw ValidationError("allocation: sum exceeds budget");
    }

    static PowerAllocation uniform(int n, double budget = 1.0) {
        return {Eigen::VectorXd::Constant(n, budget / n), budget};
    }

    // All mass on the two outermost subcarriers.
    static PowerAllocation edge_pair(int n, double budget = 1.0) {
        Eigen::VectorXd p = Eigen::VectorXd::Zero(n);
        p[0] = budget / 2;
        p[n - 1] = budget / 2;
        return {p, budget};
    }
};

// Delay uncertainty interval (the user-state prior).
struct PriorRegion {
    double delay_lo = 0.0;  // [s]
    double delay_hi = 0.0;

    double width() const { return delay_hi - delay_lo; }
    void validate() const {
        if (!(delay_hi > delay_lo))
            throw ValidationError("prior: region must be non-empty");
    }
};

struct RangeProfile {
    Eigen::VectorXd distance_m;  // axis, relative distances mapped via c
    Eigen::VectorXd value_db;    // normalized, peak = 0 dB
    Eigen::VectorXd value_lin;   // unnormalized |correlation|^2
};

// |sum_n p_n exp(j 2 pi n df (tau - tau0))|^2 on an oversampled delay grid
// spanning the unambiguous range 1/df centered at the true delay.
inline RangeProfile range_profile(const PowerAllocation &p, const SpectralGrid &grid,
                                  double true_delay, int oversample) {
    if (oversample < 1) throw ValidationError("range_profile: oversample must be >= 1");
    p.validate();
    const int N = grid.n_subcarriers;
    const int points = N * oversample + 1;
    const double span = 1.0 / grid.delta_f;
    RangeProfile out;
    out.distance_m.resize(points);
    out.value_db.resize(points);
    out.value_lin.resize(points);
    for (int i = 0; i < points; ++i) {
        const double dtau = -span / 2 + span * i / (points - 1);
        Complex acc = 0.0;
        for (int n_idx = 0; n_idx < N; ++n_idx) {
            const int n = grid.subcarrier(n_idx);
            acc += p.powers[n_idx] *
                   std::polar(1.0, 2.0 * kPi * n * grid.delta_f * dtau);
        }
        out.distance_m[i] = (true_delay + dtau) * kSpeedOfLight;
        out.value_lin[i] = std::norm(acc);
    }
    const double peak = out.value_lin.maxCoeff();
    for (int i = 0; i < points; ++i)
        out.value_db[i] = 10.0 * std::log10(std::max(out.value_lin[i] / peak, 1e-300));
    return out;
}

// Delay CRB mapped to distance: PEB = c / sqrt(8 pi^2 snr Brms^2) with the
// centered RMS bandwidth of the allocation. `snr` is the per-watt
// noise-normalized SNR, so scaling the total power scales the information.
// Returns +inf when the allocation carries no delay information.
inline double delay_peb(const PowerAllocation &p, const SpectralGrid &grid,
                        double snr) {
    if (!(snr > 0.0)) throw ValidationError("delay_peb: snr must be > 0");
    p.validate();
    const int N = grid.n_subcarriers;
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (int n_idx = 0; n_idx < N; ++n_idx) {
        const double f = grid.subcarrier(n_idx) * grid.delta_f;
        s0 += p.powers[n_idx];
        s1 += p.powers[n_idx] * f;
        s2 += p.powers[n_idx] * f * f;
    }
    if (s0 <= 0.0) throw ValidationError("delay_peb: empty allocation");
    const double centered = s2 - s1 * s1 / s0;
    if (centered <= 0.0) return std::numeric_limits<double>::infinity();
    const double fim = 8.0 * kPi * kPi * snr * centered;
    return kSpeedOfLight / std::sqrt(fim);
}

// ---------------------------------------------------------------------------
// Sidelobe (ambiguity) check

struct SidelobeCheck {
    bool feasible = false;
    double worst_level_db = -std::numeric_limits<double>::infinity();
    double worst_offset_m = 0.0;  // binding sidelobe location, relative distance
};

// Scans the profile over delay offsets up to the prior width on both sides
// (a spurious peak is an ambiguity only if the displaced delay is also
// plausible). Local maxima other than the main peak must sit at least
// `margin_db` below it. 32x oversampling within the scan window.
inline SidelobeCheck sidelobe_check(const PowerAllocation &p, const SpectralGrid &grid,
                                    const PriorRegion &prior, double margin_db,
                                    int oversample = 32) {
    prior.validate();
    // the profile is periodic in 1/delta_f; offsets beyond half a period
    // mirror ones already scanned
    const double w = std::min(prior.width(), 0.5 / grid.delta_f);
    const int cells = std::max(
        2, static_cast<int>(std::ceil(w * grid.bandwidth())) * 2);
    const int points = 2 * cells * oversample + 1;
    Eigen::VectorXd val(points);
    std::vector<double> off(points);
    for (int i = 0; i < points; ++i) {
        const double dtau = -w + 2.0 * w * i / (points - 1);
        Complex acc = 0.0;
        for (int n_idx = 0; n_idx < grid.n_subcarriers; ++n_idx) {
            const int n = grid.subcarrier(n_idx);
            acc += p.powers[n_idx] *
                   std::polar(1.0, 2.0 * kPi * n * grid.delta_f * dtau);
        }
        val[i] = std::norm(acc);
        off[i] = dtau;
    }
    const double peak = val.maxCoeff();

    SidelobeCheck out;
    out.feasible = true;
    // interior local maxima away from the main-lobe connected region
    const int center = (points - 1) / 2;
    // walk outward from the center until the profile first rises again; the
    // region before that is the main lobe
    int lo = center, hi = center;
    while (lo > 0 && val[lo - 1] <= val[lo]) --lo;
    while (hi < points - 1 && val[hi + 1] <= val[hi]) ++hi;
    for (int i = 1; i < points - 1; ++i) {
        if (i >= lo && i <= hi) continue;
        if (val[i] >= val[i - 1] && val[i] >= val[i + 1]) {
            const double level_db = 10.0 * std::log10(std::max(val[i] / peak, 1e-300));
            if (level_db > out.worst_level_db) {
                out.worst_level_db = level_db;
                out.worst_offset_m = off[i] * kSpeedOfLight;
            }
            if (level_db > -margin_db + 1e-9) out.feasible = false;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Allocation optimizer

struct DesignResult {
    PowerAllocation allocation;
    bool feasible = false;
    double achieved_peb = std::numeric_limits<double>::infinity();
    double binding_sidelobe_db = -std::numeric_limits<double>::infinity();
    double binding_sidelobe_m = 0.0;
};

namespace detail {

// Symmetric candidate family: fraction beta of the budget on the outer band
// of half-width `band` subcarrier pairs, remainder uniform over the core.
inline PowerAllocation banded_allocation(int n, double budget, double beta, int band) {
    Eigen::VectorXd p = Eigen::VectorXd::Constant(n, budget * (1.0 - beta) / n);
    const double per_edge = budget * beta / (2.0 * band);
    for (int b = 0; b < band; ++b) {
        p[b] += per_edge;
        p[n - 1 - b] += per_edge;
    }
    return {p, budget};
}

}  // namespace detail

// Minimizes the delay PEB over the banded candidate family subject to the
// sidelobe margin inside the prior region. Projected coordinate descent:
// for each band width, a grid-then-bisection line search over the edge mass.
inline DesignResult optimize_allocation(const SpectralGrid &grid, double snr,
                                        const PriorRegion &prior, double margin_db,
                                        double budget = 1.0) {
    prior.validate();
    const int n = grid.n_subcarriers;
    DesignResult best;
    SidelobeCheck worst_seen;

    for (int band = 1; band <= std::max(1, n / 8); ++band) {
        // PEB is monotone decreasing in beta, so the constrained optimum is
        // the largest feasible beta: coarse grid, then bisection on the
        // feasibility boundary.
        double beta_feasible = -1.0;
        const int coarse = 40;
        for (int i = coarse; i >= 0; --i) {
            const double beta = double(i) / coarse;
            const PowerAllocation cand = detail::banded_allocation(n, budget, beta, band);
            const SidelobeCheck chk = sidelobe_check(cand, grid, prior, margin_db);
            if (chk.worst_level_db > worst_seen.worst_level_db) worst_seen = chk;
            if (chk.feasible) {
                beta_feasible = beta;
                break;
            }
        }
        if (beta_feasible < 0.0) continue;
        double lo = beta_feasible, hi = std::min(1.0, beta_feasible + 1.0 / coarse);
        for (int it = 0; it < 30; ++it) {
            const double mid = 0.5 * (lo + hi);
            const PowerAllocation cand = detail::banded_allocation(n, budget, mid, band);
            if (sidelobe_check(cand, grid, prior, margin_db).feasible)
                lo = mid;
            else
                hi = mid;
        }
        const PowerAllocation cand = detail::banded_allocation(n, budget, lo, band);
        const double peb = delay_peb(cand, grid, snr);
        if (peb < best.achieved_peb) {
            best.allocation = cand;
            best.achieved_peb = peb;
            best.feasible = true;
            const SidelobeCheck chk = sidelobe_check(cand, grid, prior, margin_db);
            best.binding_sidelobe_db = chk.worst_level_db;
            best.binding_sidelobe_m = chk.worst_offset_m;
        }
    }
    if (!best.feasible) {
        best.binding_sidelobe_db = worst_seen.worst_level_db;
        best.binding_sidelobe_m = worst_seen.worst_offset_m;
        return best;
    }
    return best;
}

}  // namespace radioloc
