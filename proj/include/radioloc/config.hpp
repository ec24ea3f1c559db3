// SPDX-License-Identifier: Apache-2.0
//
// Scenario configuration parsing. The on-disk format is a JSON document with
// sections grid/tx/rx/paths/ris/clock/noise/flags and a schema_version field.
// Unknown keys are errors. Lengths in meters, frequencies in Hz, angles in
// radians.

#pragma once

#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "radioloc/scenario.hpp"

namespace radioloc {

inline constexpr int kConfigSchemaVersion = 1;

namespace detail {

using nlohmann::json;

inline void require_keys(const json &j, const std::string &section,
                         const std::set<std::string> &allowed,
                         const std::set<std::string> &required) {
    if (!j.is_object())
        throw ConfigError("config: section '" + section + "' must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("config: unknown key '" + section + "." + it.key() + "'");
    for (const auto &k : required)
        if (!j.contains(k))
            throw ConfigError("config: missing key '" + section + "." + k + "'");
}

inline double num(const json &j, const std::string &where) {
    if (!j.is_number())
        throw ConfigError("config: '" + where + "' must be a number");
    return j.get<double>();
}

inline Eigen::Vector3d vec3(const json &j, const std::string &where) {
    if (!j.is_array() || j.size() != 3)
        throw ConfigError("config: '" + where + "' must be a 3-vector");
    return {num(j[0], where), num(j[1], where), num(j[2], where)};
}

inline Eigen::Matrix3d rot3(const json &j, const std::string &where) {
    if (!j.is_array() || j.size() != 3)
        throw ConfigError("config: '" + where + "' must be a 3x3 matrix");
    Eigen::Matrix3d R;
    for (int r = 0; r < 3; ++r) {
        const Eigen::Vector3d row = vec3(j[r], where);
        R.row(r) = row.transpose();
    }
    return R;
}

inline ArrayGeometry parse_array(const json &j, const std::string &section) {
    require_keys(j, section,
                 {"type", "elements", "elements_x", "elements_y", "spacing",
                  "orientation_rpy", "orientation", "element_offsets", "gain"},
                 {"type"});
    ArrayGeometry a;
    const std::string type = j.at("type").get<std::string>();
    const double spacing = j.contains("spacing") ? num(j["spacing"], section + ".spacing") : 0.0;
    if (type == "single") {
        a.element_offsets = {Eigen::Vector3d::Zero()};
    } else if (type == "ula") {
        if (!j.contains("elements"))
            throw ConfigError("config: '" + section + "' ULA needs 'elements'");
        a = ArrayGeometry::ula(j["elements"].get<int>(), spacing);
    } else if (type == "upa") {
        if (!j.contains("elements_x") || !j.contains("elements_y"))
            throw ConfigError("config: '" + section + "' UPA needs elements_x/elements_y");
        a = ArrayGeometry::upa(j["elements_x"].get<int>(), j["elements_y"].get<int>(), spacing);
    } else if (type == "custom") {
        if (!j.contains("element_offsets"))
            throw ConfigError("config: '" + section + "' custom array needs element_offsets");
        a.element_offsets.clear();
        for (const auto &e : j["element_offsets"])
            a.element_offsets.push_back(vec3(e, section + ".element_offsets"));
    } else {
        throw ConfigError("config: '" + section + ".type' must be single|ula|upa|custom");
    }
    if (j.contains("orientation")) {
        a.orientation = rot3(j["orientation"], section + ".orientation");
    } else if (j.contains("orientation_rpy")) {
        const Eigen::Vector3d rpy = vec3(j["orientation_rpy"], section + ".orientation_rpy");
        a.orientation = (Eigen::AngleAxisd(rpy.z(), Eigen::Vector3d::UnitZ()) *
                         Eigen::AngleAxisd(rpy.y(), Eigen::Vector3d::UnitY()) *
                         Eigen::AngleAxisd(rpy.x(), Eigen::Vector3d::UnitX()))
                            .toRotationMatrix();
    }
    if (j.contains("gain")) {
        const std::string g = j["gain"].get<std::string>();
        if (g == "isotropic") {
            // default
        } else if (g == "cosine") {
            a.gain_pattern = [](const Angles &d) {
                return std::max(0.0, std::cos(d.az) * std::cos(d.el));
            };
        } else {
            throw ConfigError("config: '" + section + ".gain' must be isotropic|cosine");
        }
    }
    return a;
}

inline Terminal parse_terminal(const json &j, const std::string &section) {
    require_keys(j, section, {"position", "array"}, {"position", "array"});
    Terminal t;
    t.position = vec3(j["position"], section + ".position");
    t.array = parse_array(j["array"], section + ".array");
    t.array.center = t.position;
    return t;
}

}  // namespace detail

inline Scenario parse_scenario(const nlohmann::json &j) {
    using detail::num;
    using detail::require_keys;
    using detail::vec3;

    require_keys(j, "<root>",
                 {"schema_version", "grid", "tx", "rx", "paths", "ris", "clock",
                  "noise", "flags", "rx_velocity"},
                 {"schema_version", "grid", "tx", "rx"});
    if (j.at("schema_version").get<int>() != kConfigSchemaVersion)
        throw ConfigError("config: unsupported schema_version");

    Scenario s;
    {
        const auto &g = j.at("grid");
        require_keys(g, "grid",
                     {"f_c", "delta_f", "n_subcarriers", "T_s", "n_symbols"},
                     {"f_c", "delta_f", "n_subcarriers"});
        s.grid.f_c = num(g["f_c"], "grid.f_c");
        s.grid.delta_f = num(g["delta_f"], "grid.delta_f");
        s.grid.n_subcarriers = g["n_subcarriers"].get<int>();
        s.grid.T_s = g.contains("T_s") ? num(g["T_s"], "grid.T_s") : 1.0 / s.grid.delta_f;
        s.grid.n_symbols = g.contains("n_symbols") ? g["n_symbols"].get<int>() : 1;
    }
    s.tx = detail::parse_terminal(j.at("tx"), "tx");
    s.rx = detail::parse_terminal(j.at("rx"), "rx");
    if (j.contains("paths")) {
        if (!j["paths"].is_array()) throw ConfigError("config: 'paths' must be an array");
        for (const auto &p : j["paths"]) {
            require_keys(p, "paths[]",
                         {"kind", "incidence_point", "reflection_phase", "reflection_loss"},
                         {"kind"});
            PathGeometry pg;
            const std::string kind = p.at("kind").get<std::string>();
            if (kind == "los") {
                pg.kind = PathKind::los;
            } else if (kind == "single_bounce") {
                pg.kind = PathKind::single_bounce;
                if (!p.contains("incidence_point"))
                    throw ConfigError("config: single_bounce path needs incidence_point");
                pg.incidence_point = vec3(p["incidence_point"], "paths[].incidence_point");
                pg.reflection_loss = kDefaultReflectionLoss;
            } else {
                throw ConfigError("config: path kind must be los|single_bounce");
            }
            if (p.contains("reflection_phase"))
                pg.reflection_phase = num(p["reflection_phase"], "paths[].reflection_phase");
            if (p.contains("reflection_loss"))
                pg.reflection_loss = num(p["reflection_loss"], "paths[].reflection_loss");
            s.paths.push_back(pg);
        }
    }
    if (j.contains("ris")) {
        const auto &r = j.at("ris");
        require_keys(r, "ris", {"position", "array", "profile_set", "profiles", "code"},
                     {"position", "array"});
        RisPanel ris;
        ris.geometry = detail::parse_array(r["array"], "ris.array");
        ris.geometry.center = vec3(r["position"], "ris.position");
        if (r.contains("profile_set")) {
            const std::string ps = r["profile_set"].get<std::string>();
            if (ps == "continuous")
                ris.profile_set = RisProfileSet::continuous_unit_modulus;
            else if (ps == "quantized")
                ris.profile_set = RisProfileSet::quantized_phase;
            else
                throw ConfigError("config: ris.profile_set must be continuous|quantized");
        }
        const int m = ris.geometry.size();
        if (r.contains("profiles")) {
            for (const auto &prof : r["profiles"]) {
                if (!prof.is_array() || static_cast<int>(prof.size()) != m)
                    throw ConfigError("config: ris.profiles rows must have M [re,im] pairs");
                Eigen::VectorXcd w(m);
                for (int i = 0; i < m; ++i) {
                    const auto &c = prof[i];
                    if (!c.is_array() || c.size() != 2)
                        throw ConfigError("config: ris profile entries are [re, im]");
                    w[i] = Complex(num(c[0], "ris.profiles"), num(c[1], "ris.profiles"));
                }
                ris.profiles.push_back(w);
            }
        } else if (r.contains("code") && r["code"].get<std::string>() == "hadamard") {
            // filled in by ris_code_profiles() once n_symbols is known (below)
        } else {
            throw ConfigError("config: ris needs 'profiles' or code='hadamard'");
        }
        if (ris.profiles.empty())
            ris.profiles = ris_hadamard_profiles(m, s.grid.n_symbols);
        s.ris = ris;
    }
    if (j.contains("clock")) {
        const auto &c = j.at("clock");
        require_keys(c, "clock",
                     {"bias", "cfo", "phase_noise_variance_per_symbol",
                      "tx_chain_phase", "rx_chain_phase"},
                     {});
        if (c.contains("bias")) s.clock.bias = num(c["bias"], "clock.bias");
        if (c.contains("cfo")) s.clock.cfo = num(c["cfo"], "clock.cfo");
        if (c.contains("phase_noise_variance_per_symbol"))
            s.clock.phase_noise_variance_per_symbol =
                num(c["phase_noise_variance_per_symbol"], "clock.pn");
        if (c.contains("tx_chain_phase"))
            s.clock.tx_chain_phase = num(c["tx_chain_phase"], "clock.tx_chain_phase");
        if (c.contains("rx_chain_phase"))
            s.clock.rx_chain_phase = num(c["rx_chain_phase"], "clock.rx_chain_phase");
    }
    if (j.contains("noise")) {
        const auto &n = j.at("noise");
        require_keys(n, "noise", {"psd"}, {"psd"});
        s.noise_psd = num(n["psd"], "noise.psd");
    }
    if (j.contains("rx_velocity")) s.rx_velocity = vec3(j["rx_velocity"], "rx_velocity");
    if (j.contains("flags")) {
        const auto &f = j.at("flags");
        require_keys(f, "flags", {"near_field", "non_stationary", "beam_squint"}, {});
        if (f.contains("near_field")) s.flags.near_field = f["near_field"].get<bool>();
        if (f.contains("non_stationary"))
            s.flags.non_stationary = f["non_stationary"].get<bool>();
        if (f.contains("beam_squint")) s.flags.beam_squint = f["beam_squint"].get<bool>();
    }
    s.validate();
    return s;
}

inline Scenario load_scenario(const std::string &config_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(config_text);
    } catch (const nlohmann::json::parse_error &e) {
        throw ConfigError(std::string("config: JSON parse error: ") + e.what());
    }
    return parse_scenario(j);
}

inline Scenario load_scenario_file(const std::string &path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << f.rdbuf();
    return load_scenario(ss.str());
}

}  // namespace radioloc
