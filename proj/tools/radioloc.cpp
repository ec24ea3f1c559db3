// SPDX-License-Identifier: Apache-2.0
//
// Batch front-end: every analysis as a subcommand with JSON config input and
// CSV/JSON/binary output. Outputs are deterministic in (config, seed) and
// every output directory receives a manifest sufficient to re-run the job.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "radioloc/config.hpp"
#include "radioloc/design.hpp"
#include "radioloc/estimation.hpp"
#include "radioloc/io.hpp"
#include "radioloc/precoding.hpp"
#include "radioloc/tracking.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace radioloc;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitInfeasible = 3;

struct Common {
    std::string config;
    uint64_t seed = 0;
    std::string out = "out";
    int threads = 1;
};

void add_common(CLI::App *sub, Common &c, bool needs_config) {
    auto *opt = sub->add_option("--config", c.config, "JSON config file");
    if (needs_config) opt->required();
    sub->add_option("--seed", c.seed, "random seed");
    sub->add_option("--out", c.out, "output directory");
    sub->add_option("--threads", c.threads, "worker threads");
}

int effective_threads(const Common &c) {
    if (const char *env = std::getenv("RADIOLOC_THREADS")) {
        const int n = std::atoi(env);
        if (n > 0) return n;
    }
    return std::max(1, c.threads);
}

fs::path prepare_out(const Common &c, const std::string &subcommand) {
    fs::create_directories(c.out);
    RunManifest man;
    man.subcommand = subcommand;
    man.config_path = c.config;
    man.seed = c.seed;
    man.out_dir = c.out;
    man.config_hash = c.config.empty() ? 0 : fnv1a(read_file(c.config));
    man.write(c.out);
    return c.out;
}

json load_json(const std::string &path) {
    try {
        return json::parse(read_file(path));
    } catch (const json::parse_error &e) {
        throw ConfigError(std::string("config: JSON parse error: ") + e.what());
    }
}

SpectralGrid parse_grid(const json &g) {
    detail::require_keys(g, "grid", {"f_c", "delta_f", "n_subcarriers", "T_s", "n_symbols"},
                         {"f_c", "delta_f", "n_subcarriers"});
    SpectralGrid out;
    out.f_c = detail::num(g["f_c"], "grid.f_c");
    out.delta_f = detail::num(g["delta_f"], "grid.delta_f");
    out.n_subcarriers = g["n_subcarriers"].get<int>();
    out.T_s = g.contains("T_s") ? detail::num(g["T_s"], "grid.T_s") : 1.0 / out.delta_f;
    out.n_symbols = g.contains("n_symbols") ? g["n_symbols"].get<int>() : 1;
    out.validate();
    return out;
}

Eigen::Matrix3d parse_rpy(const json &j, const std::string &where) {
    const Eigen::Vector3d rpy = detail::vec3(j, where);
    return (Eigen::AngleAxisd(rpy.z(), Eigen::Vector3d::UnitZ()) *
            Eigen::AngleAxisd(rpy.y(), Eigen::Vector3d::UnitY()) *
            Eigen::AngleAxisd(rpy.x(), Eigen::Vector3d::UnitX()))
        .toRotationMatrix();
}

void write_json(const fs::path &path, const json &j) {
    auto f = detail::open_out(path);
    f << j.dump(2) << "\n";
}

json vec_to_json(const Eigen::Vector3d &v) { return json{v.x(), v.y(), v.z()}; }

json mat_to_json(const Eigen::MatrixXd &m) {
    json rows = json::array();
    for (int r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

// Null-to-null width of the central peak of a range profile, in meters.
double main_lobe_width(const RangeProfile &prof) {
    const int n = static_cast<int>(prof.value_lin.size());
    int center = 0;
    prof.value_lin.maxCoeff(&center);
    int lo = center, hi = center;
    while (lo > 0 && prof.value_lin[lo - 1] < prof.value_lin[lo]) --lo;
    while (hi < n - 1 && prof.value_lin[hi + 1] < prof.value_lin[hi]) ++hi;
    return prof.distance_m[hi] - prof.distance_m[lo];
}

double first_sidelobe_db(const RangeProfile &prof) {
    const int n = static_cast<int>(prof.value_lin.size());
    int center = 0;
    prof.value_lin.maxCoeff(&center);
    int lo = center, hi = center;
    while (lo > 0 && prof.value_lin[lo - 1] < prof.value_lin[lo]) --lo;
    while (hi < n - 1 && prof.value_lin[hi + 1] < prof.value_lin[hi]) ++hi;
    double worst = -std::numeric_limits<double>::infinity();
    for (int i = 1; i < n - 1; ++i) {
        if (i >= lo && i <= hi) continue;
        if (prof.value_lin[i] >= prof.value_lin[i - 1] &&
            prof.value_lin[i] >= prof.value_lin[i + 1])
            worst = std::max(worst, prof.value_db[i]);
    }
    return worst;
}

void write_profile_csv(const fs::path &path, const RangeProfile &prof) {
    Eigen::MatrixXd rows(prof.distance_m.size(), 3);
    rows.col(0) = prof.distance_m;
    rows.col(1) = prof.value_db;
    rows.col(2) = prof.value_lin;
    write_csv(path, {"distance_m", "value_db", "value_lin"}, rows);
}

void write_allocation_csv(const fs::path &path, const SpectralGrid &g,
                          const PowerAllocation &p) {
    Eigen::MatrixXd rows(g.n_subcarriers, 3);
    for (int i = 0; i < g.n_subcarriers; ++i) {
        rows(i, 0) = g.subcarrier(i);
        rows(i, 1) = g.subcarrier(i) * g.delta_f;
        rows(i, 2) = p.powers[i];
    }
    write_csv(path, {"subcarrier", "freq_offset_hz", "power_w"}, rows);
}

// ---------------------------------------------------------------------------
// Subcommand bodies

int run_synth(const Common &c) {
    const Scenario s = load_scenario_file(c.config);
    const fs::path out = prepare_out(c, "synth");
    write_tensor(out / "tensor.bin", synthesize_total(s));
    return 0;
}

int run_response_map(const Common &c) {
    const json j = load_json(c.config);
    detail::require_keys(j, "<root>", {"scenario", "precoder", "map"},
                         {"scenario", "precoder"});
    const Scenario s = parse_scenario(j.at("scenario"));

    const json &pj = j.at("precoder");
    detail::require_keys(pj, "precoder", {"kind", "azimuth", "elevation", "distance"},
                         {"kind", "azimuth"});
    const std::string kind_s = pj.at("kind").get<std::string>();
    PrecoderKind kind;
    if (kind_s == "phase")
        kind = PrecoderKind::phase;
    else if (kind_s == "time_delay")
        kind = PrecoderKind::time_delay;
    else if (kind_s == "near_field_focus")
        kind = PrecoderKind::near_field_focus;
    else
        throw ConfigError("config: precoder.kind must be phase|time_delay|near_field_focus");
    const Angles target{detail::num(pj.at("azimuth"), "precoder.azimuth"),
                        pj.contains("elevation")
                            ? detail::num(pj["elevation"], "precoder.elevation")
                            : 0.0};
    const double focus = pj.contains("distance")
                             ? detail::num(pj["distance"], "precoder.distance")
                             : std::numeric_limits<double>::infinity();
    const Precoder f = make_precoder(s.tx.array, s.grid, kind, target, focus);

    ResponseGrid probe;
    probe.subcarrier_indices = {s.grid.n_subcarriers / 2};
    if (j.contains("map")) {
        const json &mj = j.at("map");
        detail::require_keys(mj, "map", {"azimuth_points", "distances", "subcarriers"}, {});
        probe.azimuths = default_azimuth_grid(
            mj.contains("azimuth_points") ? mj["azimuth_points"].get<int>() : 721);
        if (mj.contains("distances")) {
            probe.distances.clear();
            for (const auto &d : mj["distances"])
                probe.distances.push_back(detail::num(d, "map.distances"));
        }
        if (mj.contains("subcarriers")) {
            probe.subcarrier_indices.clear();
            for (const auto &n : mj["subcarriers"])
                probe.subcarrier_indices.push_back(n.get<int>());
        }
    } else {
        probe.azimuths = default_azimuth_grid();
    }

    const Eigen::MatrixXd map = response_map(s.tx.array, s.grid, f, probe, s.flags);
    std::vector<std::string> header = {"azimuth_rad"};
    for (double d : probe.distances)
        for (int n_idx : probe.subcarrier_indices)
            header.push_back("db_d" + detail::fmt_g(d) + "_n" + std::to_string(n_idx));
    Eigen::MatrixXd rows(map.rows(), map.cols() + 1);
    for (int i = 0; i < map.rows(); ++i) rows(i, 0) = probe.azimuths[i];
    rows.rightCols(map.cols()) = map;
    const fs::path out = prepare_out(c, "response-map");
    write_csv(out / "response_map.csv", header, rows);
    return 0;
}

int run_fim(const Common &c, const std::string &sampling) {
    const Scenario s = load_scenario_file(c.config);
    const int n_tx = s.tx.array.size(), n_rx = s.rx.array.size();
    SignalSpec sig;
    if (sampling == "element")
        sig = SignalSpec::element_sampling(n_tx, n_rx, s.grid.n_subcarriers);
    else if (sampling == "uniform")
        sig = SignalSpec::uniform(n_tx, n_rx, s.grid.n_subcarriers);
    else
        sig = SignalSpec::random_probing(n_tx, n_rx, s.grid.n_subcarriers,
                                         s.grid.n_symbols, c.seed);
    const FimReport rep = state_fim(s, channel_fim(s, sig));

    const fs::path out = prepare_out(c, "fim");
    std::vector<std::string> header;
    for (int i = 0; i < rep.fim_state.cols(); ++i)
        header.push_back("s" + std::to_string(i));
    write_csv(out / "fim_state.csv", header, rep.fim_state);
    write_json(out / "report.json",
               json{{"peb_m", rep.peb},
                    {"oeb_rad", rep.oeb},
                    {"identifiable", rep.identifiable},
                    {"null_space_dim", rep.null_space_dim}});
    return 0;
}

int run_table1(uint64_t seed, int draws, const Common &c) {
    const auto cells = table1_sweep(seed, draws);
    auto f = detail::open_out(fs::path(c.out) / "table1.csv");
    f << "deployment,measurements,expected,verdict,agrees\n";
    int disagreements = 0;
    auto quoted = [](const std::string &s) {
        return s.find(',') == std::string::npos ? s : "\"" + s + "\"";
    };
    for (const auto &cell : cells) {
        f << quoted(cell.row_label) << "," << quoted(cell.col_label) << ","
          << quoted(cell.expected) << "," << quoted(cell.verdict) << ","
          << (cell.agrees ? 1 : 0) << "\n";
        if (!cell.agrees) {
            ++disagreements;
            std::cerr << "table1 disagreement: " << cell.row_label << " / "
                      << cell.col_label << ": " << cell.disagreement_note << "\n";
        }
    }
    f.close();
    write_json(fs::path(c.out) / "table1_summary.json",
               json{{"cells", cells.size()}, {"disagreements", disagreements}});
    return 0;
}

struct DesignConfig {
    SpectralGrid grid;
    double snr = 100.0;
    PriorRegion prior;
    double margin_db = 13.0;
    double budget = 1.0;
};

DesignConfig parse_design(const json &j) {
    detail::require_keys(j, "<root>", {"grid", "snr", "prior", "margin_db", "budget"},
                         {"grid", "prior", "margin_db"});
    DesignConfig d;
    d.grid = parse_grid(j.at("grid"));
    if (j.contains("snr")) d.snr = detail::num(j["snr"], "snr");
    const json &pj = j.at("prior");
    detail::require_keys(pj, "prior", {"delay_lo", "delay_hi"}, {"delay_lo", "delay_hi"});
    d.prior.delay_lo = detail::num(pj["delay_lo"], "prior.delay_lo");
    d.prior.delay_hi = detail::num(pj["delay_hi"], "prior.delay_hi");
    d.prior.validate();
    d.margin_db = detail::num(j.at("margin_db"), "margin_db");
    if (j.contains("budget")) d.budget = detail::num(j["budget"], "budget");
    return d;
}

int run_design(const Common &c) {
    const DesignConfig d = parse_design(load_json(c.config));
    const DesignResult res =
        optimize_allocation(d.grid, d.snr, d.prior, d.margin_db, d.budget);
    const fs::path out = prepare_out(c, "design");
    write_json(out / "design.json",
               json{{"feasible", res.feasible},
                    {"achieved_peb_m", res.achieved_peb},
                    {"binding_sidelobe_db", res.binding_sidelobe_db},
                    {"binding_sidelobe_m", res.binding_sidelobe_m}});
    if (!res.feasible) {
        std::cerr << "design: infeasible sidelobe margin; binding sidelobe "
                  << res.binding_sidelobe_db << " dB at offset "
                  << res.binding_sidelobe_m << " m\n";
        return kExitInfeasible;
    }
    write_allocation_csv(out / "allocation.csv", d.grid, res.allocation);
    return 0;
}

int run_profile(const Common &c) {
    const json j = load_json(c.config);
    detail::require_keys(j, "<root>",
                         {"grid", "allocation", "true_delay", "oversample", "budget"},
                         {"grid", "true_delay"});
    const SpectralGrid grid = parse_grid(j.at("grid"));
    const double budget =
        j.contains("budget") ? detail::num(j["budget"], "budget") : 1.0;
    PowerAllocation p = PowerAllocation::uniform(grid.n_subcarriers, budget);
    if (j.contains("allocation")) {
        const json &aj = j["allocation"];
        if (aj.is_string()) {
            const std::string kind = aj.get<std::string>();
            if (kind == "uniform")
                p = PowerAllocation::uniform(grid.n_subcarriers, budget);
            else if (kind == "edge_pair")
                p = PowerAllocation::edge_pair(grid.n_subcarriers, budget);
            else
                throw ConfigError("config: allocation must be uniform|edge_pair|array");
        } else if (aj.is_array()) {
            if (static_cast<int>(aj.size()) != grid.n_subcarriers)
                throw ConfigError("config: allocation array length != n_subcarriers");
            p.powers.resize(grid.n_subcarriers);
            for (int i = 0; i < grid.n_subcarriers; ++i)
                p.powers[i] = detail::num(aj[i], "allocation[]");
            p.budget = std::max(budget, p.powers.sum());
        } else {
            throw ConfigError("config: allocation must be uniform|edge_pair|array");
        }
    }
    const double tau = detail::num(j.at("true_delay"), "true_delay");
    const int oversample =
        j.contains("oversample") ? j["oversample"].get<int>() : 32;
    const fs::path out = prepare_out(c, "profile");
    write_profile_csv(out / "profile.csv", range_profile(p, grid, tau, oversample));
    return 0;
}

int run_estimate(const Common &c, int oversample) {
    const Scenario s = load_scenario_file(c.config);
    const int n_tx = s.tx.array.size(), n_rx = s.rx.array.size();
    const SignalSpec sig =
        n_rx > 1 ? SignalSpec::element_sampling(n_tx, n_rx, s.grid.n_subcarriers)
                 : SignalSpec::uniform(n_tx, n_rx, s.grid.n_subcarriers);
    const ChannelTensor t = synthesize_total(s);
    const Eigen::MatrixXcd y = observe(t, sig, s.noise_psd, c.seed);

    const DelayEstimate de = estimate_delay(y.col(0), sig.powers, s.grid, oversample);
    const PathParams truth = geometric_path_params(s, 0);
    json rep{{"tau_hat_s", de.tau_hat},
             {"quality", de.quality},
             {"low_confidence", de.low_confidence},
             {"true_delay_s", truth.delay}};

    // angle snapshot: with element-sampled combining, symbol k observes
    // element k of the receive array
    if (n_rx > 1 && s.grid.n_symbols >= n_rx) {
        Eigen::VectorXcd snap(n_rx);
        const int n_c = s.grid.n_subcarriers / 2;
        for (int p = 0; p < n_rx; ++p) snap[p] = y(n_c, p);
        const AngleEstimate ae =
            estimate_angles(snap, s.rx.array, s.grid.wavelength());
        rep["aoa_az_rad"] = ae.angles.az;
        rep["aoa_el_rad"] = ae.angles.el;
        rep["aoa_ambiguous"] = ae.ambiguous;
        rep["true_aoa_az_rad"] = truth.aoa.az;
        rep["true_aoa_el_rad"] = truth.aoa.el;
    }
    const fs::path out = prepare_out(c, "estimate");
    write_json(out / "estimate.json", rep);
    return 0;
}

std::vector<PathMeasurement> parse_measurement_csv(const std::string &path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("measurements: empty file");
    const std::string expect =
        "type,toa,aoa_az,aoa_el,aod_az,aod_el,var_toa,var_aoa,var_aod";
    if (line != expect)
        throw ConfigError("measurements: header must be '" + expect + "'");
    std::vector<PathMeasurement> out;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(row, field, ',')) fields.push_back(field);
        if (fields.size() != 9)
            throw ConfigError("measurements: expected 9 fields per row");
        PathMeasurement m;
        if (fields[0] == "nlos")
            m.nlos = true;
        else if (fields[0] != "los")
            throw ConfigError("measurements: type must be los|nlos");
        m.toa = std::stod(fields[1]);
        m.aoa = {std::stod(fields[2]), std::stod(fields[3])};
        m.aod = {std::stod(fields[4]), std::stod(fields[5])};
        m.var_toa = std::stod(fields[6]);
        m.var_aoa_az = m.var_aoa_el = std::stod(fields[7]);
        m.var_aod_az = m.var_aod_el = std::stod(fields[8]);
        out.push_back(m);
    }
    if (out.empty()) throw ConfigError("measurements: no rows");
    return out;
}

int run_fix(const Common &c) {
    const json j = load_json(c.config);
    detail::require_keys(j, "<root>", {"bs", "measurements", "measurements_csv"},
                         {"bs"});
    const json &bj = j.at("bs");
    detail::require_keys(bj, "bs", {"position", "orientation_rpy"}, {"position"});
    BsPose bs;
    bs.position = detail::vec3(bj.at("position"), "bs.position");
    if (bj.contains("orientation_rpy"))
        bs.orientation = parse_rpy(bj["orientation_rpy"], "bs.orientation_rpy");

    std::vector<PathMeasurement> meas;
    if (j.contains("measurements_csv")) {
        meas = parse_measurement_csv(j["measurements_csv"].get<std::string>());
    } else if (j.contains("measurements")) {
        for (const auto &mj : j["measurements"]) {
            detail::require_keys(mj, "measurements[]",
                                 {"type", "toa", "aoa_az", "aoa_el", "aod_az",
                                  "aod_el", "var_toa", "var_aoa", "var_aod"},
                                 {"type", "toa"});
            PathMeasurement m;
            const std::string type = mj.at("type").get<std::string>();
            if (type == "nlos")
                m.nlos = true;
            else if (type != "los")
                throw ConfigError("config: measurement type must be los|nlos");
            m.toa = detail::num(mj.at("toa"), "measurements[].toa");
            auto opt = [&](const char *k, double dflt) {
                return mj.contains(k) ? detail::num(mj[k], k) : dflt;
            };
            m.aoa = {opt("aoa_az", 0.0), opt("aoa_el", 0.0)};
            m.aod = {opt("aod_az", 0.0), opt("aod_el", 0.0)};
            m.var_toa = opt("var_toa", 1e-18);
            m.var_aoa_az = m.var_aoa_el = opt("var_aoa", 1e-6);
            m.var_aod_az = m.var_aod_el = opt("var_aod", 1e-6);
            meas.push_back(m);
        }
    } else {
        throw ConfigError("config: need 'measurements' or 'measurements_csv'");
    }

    FixOptions opt;
    opt.seed = c.seed == 0 ? opt.seed : c.seed;
    const FixResult fix = multipath_fix(meas, bs, opt);
    json ips = json::array();
    for (const auto &ip : fix.ip_hats) ips.push_back(vec_to_json(ip));
    const fs::path out = prepare_out(c, "fix");
    write_json(out / "fix.json",
               json{{"position_m", vec_to_json(fix.position)},
                    {"orientation", mat_to_json(fix.orientation)},
                    {"clock_bias_s", fix.clock_bias},
                    {"ip_positions_m", ips},
                    {"converged", fix.converged},
                    {"iterations", fix.iterations},
                    {"residual_norm", fix.residual_norm},
                    {"covariance", mat_to_json(fix.covariance)}});
    return fix.converged ? 0 : kExitNumerical;
}

int run_track(const Common &c) {
    const json j = load_json(c.config);
    detail::require_keys(j, "<root>",
                         {"motion", "dt", "steps", "initial", "anchor", "noise"},
                         {"dt", "steps", "initial", "anchor"});
    MotionModel model;
    if (j.contains("motion")) {
        const json &mj = j["motion"];
        detail::require_keys(mj, "motion", {"accel_psd", "clock_drift_psd"}, {});
        if (mj.contains("accel_psd"))
            model.accel_psd = detail::num(mj["accel_psd"], "motion.accel_psd");
        if (mj.contains("clock_drift_psd"))
            model.clock_drift_psd =
                detail::num(mj["clock_drift_psd"], "motion.clock_drift_psd");
    }
    const double dt = detail::num(j.at("dt"), "dt");
    const int steps = j.at("steps").get<int>();
    if (steps < 1) throw ConfigError("config: steps must be >= 1");

    const json &ij = j.at("initial");
    detail::require_keys(ij, "initial",
                         {"position", "velocity", "bias_m", "prior_var"},
                         {"position"});
    Eigen::Vector3d p = detail::vec3(ij.at("position"), "initial.position");
    Eigen::Vector3d v = ij.contains("velocity")
                            ? detail::vec3(ij["velocity"], "initial.velocity")
                            : Eigen::Vector3d::Zero();
    double bias_m =
        ij.contains("bias_m") ? detail::num(ij["bias_m"], "initial.bias_m") : 0.0;
    const double prior_var =
        ij.contains("prior_var") ? detail::num(ij["prior_var"], "initial.prior_var")
                                 : 1.0;

    const json &aj = j.at("anchor");
    detail::require_keys(aj, "anchor", {"position", "orientation_rpy"}, {"position"});
    BsPose anchor;
    anchor.position = detail::vec3(aj.at("position"), "anchor.position");
    if (aj.contains("orientation_rpy"))
        anchor.orientation = parse_rpy(aj["orientation_rpy"], "anchor.orientation_rpy");

    double sigma_toa_m = 0.02, sigma_ang = 1e-3;
    if (j.contains("noise")) {
        const json &nj = j["noise"];
        detail::require_keys(nj, "noise", {"sigma_range_m", "sigma_angle_rad"}, {});
        if (nj.contains("sigma_range_m"))
            sigma_toa_m = detail::num(nj["sigma_range_m"], "noise.sigma_range_m");
        if (nj.contains("sigma_angle_rad"))
            sigma_ang = detail::num(nj["sigma_angle_rad"], "noise.sigma_angle_rad");
    }

    std::mt19937_64 rng(c.seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    TrackState st;
    st.x << p, v, bias_m;
    st.P = prior_var * Eigen::Matrix<double, kTrackDim, kTrackDim>::Identity();
    for (int i = 0; i < kTrackDim; ++i) st.x[i] += std::sqrt(prior_var) * gauss(rng);

    // columns: t, truth(7), estimate(7), covariance diagonal(7), nis
    Eigen::MatrixXd rows(steps, 1 + 7 + 7 + 7 + 1);
    const double q = model.accel_psd;
    for (int k = 0; k < steps; ++k) {
        for (int a = 0; a < 3; ++a) {
            const double w1 = gauss(rng), w2 = gauss(rng);
            const double l11 = std::sqrt(q * dt * dt * dt / 3.0);
            const double l21 = l11 > 0 ? q * dt * dt / 2.0 / l11 : 0.0;
            const double l22 = std::sqrt(std::max(0.0, q * dt - l21 * l21));
            p[a] += v[a] * dt + l11 * w1;
            v[a] += l21 * w1 + l22 * w2;
        }
        bias_m += std::sqrt(model.clock_drift_psd * dt) * gauss(rng);

        predict(st, model, dt);
        RangeAngleMeasurement m;
        const Eigen::Vector3d d = p - anchor.position;
        m.toa = (d.norm() + bias_m + sigma_toa_m * gauss(rng)) / kSpeedOfLight;
        const Angles ang = angles_from_unit(anchor.orientation.transpose() * d);
        m.angles = {ang.az + sigma_ang * gauss(rng), ang.el + sigma_ang * gauss(rng)};
        m.var_toa = sigma_toa_m * sigma_toa_m / (kSpeedOfLight * kSpeedOfLight);
        m.var_az = m.var_el = sigma_ang * sigma_ang;
        const UpdateReport rep = update_range_angle(st, anchor, m);

        rows(k, 0) = st.time;
        rows.block(k, 1, 1, 3) = p.transpose();
        rows.block(k, 4, 1, 3) = v.transpose();
        rows(k, 7) = bias_m;
        rows.block(k, 8, 1, 7) = st.x.transpose();
        rows.block(k, 15, 1, 7) = st.P.diagonal().transpose();
        rows(k, 22) = rep.nis;
    }
    const fs::path out = prepare_out(c, "track");
    write_csv(out / "trajectory.csv",
              {"t_s",      "true_px",  "true_py",  "true_pz",  "true_vx",
               "true_vy",  "true_vz",  "true_bias_m", "est_px", "est_py",
               "est_pz",   "est_vx",   "est_vy",   "est_vz",   "est_bias_m",
               "cov_px",   "cov_py",   "cov_pz",   "cov_vx",   "cov_vy",
               "cov_vz",   "cov_bias", "nis"},
              rows);
    return 0;
}

// ---------------------------------------------------------------------------
// Pinned reproduction presets

int run_repro_fig3(const Common &c) {
    const SpectralGrid g{28e9, 6.25e6, 64, 1.0 / 6.25e6, 1};
    const ArrayGeometry arr = ArrayGeometry::ula(64, g.wavelength() / 2);
    const fs::path out = prepare_out(c, "repro fig3");
    ModelFlags squint;
    squint.beam_squint = true;

    // (a) beam squint of the phase precoder vs the time-delay precoder
    const double target = kPi / 4;
    const Precoder phase = make_precoder(arr, g, PrecoderKind::phase, {target, 0.0});
    const Precoder ttd = make_precoder(arr, g, PrecoderKind::time_delay, {target, 0.0});
    Eigen::MatrixXd srows(g.n_subcarriers, 5);
    for (int n_idx = 0; n_idx < g.n_subcarriers; ++n_idx) {
        const double f_n = g.subcarrier_freq(g.subcarrier(n_idx));
        const double predicted = std::acos(std::cos(target) * g.f_c / f_n);
        const double peak = peak_response_azimuth(arr, g, phase, n_idx,
                                                  target - 0.1, target + 0.1, squint);
        srows(n_idx, 0) = g.subcarrier(n_idx);
        srows(n_idx, 1) = f_n;
        srows(n_idx, 2) = peak;
        srows(n_idx, 3) = predicted;
        srows(n_idx, 4) = 10.0 * std::log10(
            response_power(arr, g, ttd, n_idx, {target, 0.0}, 1e9, squint) / arr.size());
    }
    write_csv(out / "squint.csv",
              {"subcarrier", "freq_hz", "peak_az_rad", "predicted_az_rad",
               "ttd_on_target_db"},
              srows);

    // (b) far-field vs focused precoder over distance, broadside target
    const Angles broadside{kPi / 2, 0.0};
    const double focus_m = 2.8;
    ModelFlags nf;
    nf.near_field = true;
    const Precoder ff = make_precoder(arr, g, PrecoderKind::phase, broadside);
    const Precoder focus =
        make_precoder(arr, g, PrecoderKind::near_field_focus, broadside, focus_m);
    const std::vector<double> dists = default_distance_grid(200);
    const int n0 = g.n_subcarriers / 2;
    Eigen::MatrixXd nrows(dists.size(), 3);
    for (size_t i = 0; i < dists.size(); ++i) {
        nrows(i, 0) = dists[i];
        nrows(i, 1) = 10.0 * std::log10(
            response_power(arr, g, ff, n0, broadside, dists[i], nf) / arr.size());
        nrows(i, 2) = 10.0 * std::log10(
            response_power(arr, g, focus, n0, broadside, dists[i], nf) / arr.size());
    }
    write_csv(out / "near_field.csv",
              {"distance_m", "far_field_db", "focused_db"}, nrows);
    return 0;
}

int run_repro_fig4(const Common &c) {
    // 132 MHz over 64 subcarriers, user at about 10 m, prior +-1 m
    const double df = 132e6 / 64;
    const SpectralGrid g{3.5e9, df, 64, 1.0 / df, 1};
    const double range = 10.0;
    const double tau = range / kSpeedOfLight;
    const PriorRegion prior{(range - 1.0) / kSpeedOfLight,
                            (range + 1.0) / kSpeedOfLight};
    const double margin_db = 13.0, snr = 100.0;

    const fs::path out = prepare_out(c, "repro fig4");
    const PowerAllocation uniform = PowerAllocation::uniform(g.n_subcarriers);
    const RangeProfile prof_u = range_profile(uniform, g, tau, 64);
    write_profile_csv(out / "profile_uniform.csv", prof_u);

    const DesignResult res = optimize_allocation(g, snr, prior, margin_db);
    if (!res.feasible) {
        std::cerr << "repro fig4: design infeasible; binding sidelobe "
                  << res.binding_sidelobe_db << " dB\n";
        return kExitInfeasible;
    }
    const RangeProfile prof_o = range_profile(res.allocation, g, tau, 64);
    write_profile_csv(out / "profile_optimized.csv", prof_o);
    write_allocation_csv(out / "allocation.csv", g, res.allocation);

    const double peb_u = delay_peb(uniform, g, snr);
    write_json(out / "summary.json",
               json{{"width_uniform_m", main_lobe_width(prof_u)},
                    {"first_sidelobe_uniform_db", first_sidelobe_db(prof_u)},
                    {"width_optimized_m", main_lobe_width(prof_o)},
                    {"peb_uniform_m", peb_u},
                    {"peb_optimized_m", res.achieved_peb},
                    {"peb_reduction", 1.0 - res.achieved_peb / peb_u},
                    {"sidelobe_feasible", res.feasible}});
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    CLI::App app{"radio localization and sensing toolbox"};
    app.require_subcommand(1);

    Common synth_c, map_c, fim_c, table_c, design_c, profile_c, est_c, fix_c,
        track_c, repro_c;
    std::string fim_sampling = "random";
    table_c.seed = 1234;  // pinned sweep default
    int table_draws = 10;
    int est_oversample = 32;
    std::string repro_which;

    auto *synth = app.add_subcommand("synth", "synthesize a channel tensor");
    add_common(synth, synth_c, true);
    auto *rmap = app.add_subcommand("response-map", "precoder response sweep");
    add_common(rmap, map_c, true);
    auto *fim = app.add_subcommand("fim", "error bounds for a scenario");
    add_common(fim, fim_c, true);
    fim->add_option("--sampling", fim_sampling, "probing schedule: random|element|uniform")
        ->check(CLI::IsMember({"random", "element", "uniform"}));
    auto *table = app.add_subcommand("table1", "minimal-configuration sweep");
    add_common(table, table_c, false);
    table->add_option("--draws", table_draws, "random geometries per cell");
    auto *design = app.add_subcommand("design", "optimize a power allocation");
    add_common(design, design_c, true);
    auto *profile = app.add_subcommand("profile", "range profile of an allocation");
    add_common(profile, profile_c, true);
    auto *estimate = app.add_subcommand("estimate", "channel-parameter estimates");
    add_common(estimate, est_c, true);
    estimate->add_option("--oversample", est_oversample, "delay grid oversampling");
    auto *fix = app.add_subcommand("fix", "multipath position fix");
    add_common(fix, fix_c, true);
    auto *track = app.add_subcommand("track", "EKF tracking simulation");
    add_common(track, track_c, true);
    auto *repro = app.add_subcommand("repro", "pinned reproduction presets");
    add_common(repro, repro_c, false);
    repro->add_option("which", repro_which, "fig3|fig4|table1")
        ->required()
        ->check(CLI::IsMember({"fig3", "fig4", "table1"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*synth) return run_synth(synth_c);
        if (*rmap) return run_response_map(map_c);
        if (*fim) {
            (void)effective_threads(fim_c);
            return run_fim(fim_c, fim_sampling);
        }
        if (*table) {
            prepare_out(table_c, "table1");
            return run_table1(table_c.seed, table_draws, table_c);
        }
        if (*design) return run_design(design_c);
        if (*profile) return run_profile(profile_c);
        if (*estimate) return run_estimate(est_c, est_oversample);
        if (*fix) return run_fix(fix_c);
        if (*track) return run_track(track_c);
        if (*repro) {
            if (repro_which == "fig3") return run_repro_fig3(repro_c);
            if (repro_which == "fig4") return run_repro_fig4(repro_c);
            repro_c.seed = 1234;  // pinned preset
            prepare_out(repro_c, "repro table1");
            return run_table1(1234, 10, repro_c);
        }
    } catch (const ConfigError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ValidationError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const GeometryError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const NotIdentifiableError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const NumericalError &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
    return kExitConfig;
}
