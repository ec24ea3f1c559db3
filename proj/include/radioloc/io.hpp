// SPDX-License-Identifier: Apache-2.0
//
// Output plumbing: CSV writers (comma, '.' decimal, header row, LF), a raw
// binary tensor dump, and the per-run manifest.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "radioloc/channel.hpp"

namespace radioloc {

inline constexpr const char *kToolVersion = "0.1.0";

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

inline std::ofstream open_out(const std::filesystem::path &path) {
    std::ofstream f(path, std::ios::binary);  // binary: LF line endings everywhere
    if (!f) throw IoError("cannot open for writing: " + path.string());
    return f;
}

}  // namespace detail

inline void write_csv(const std::filesystem::path &path,
                      const std::vector<std::string> &header,
                      const Eigen::MatrixXd &rows) {
    if (static_cast<int>(header.size()) != rows.cols())
        throw IoError("write_csv: header/column mismatch");
    auto f = detail::open_out(path);
    for (size_t i = 0; i < header.size(); ++i)
        f << (i ? "," : "") << header[i];
    f << "\n";
    for (int r = 0; r < rows.rows(); ++r) {
        for (int c = 0; c < rows.cols(); ++c)
            f << (c ? "," : "") << detail::fmt_g(rows(r, c));
        f << "\n";
    }
}

// Labeled-row variant (first column is a string label).
inline void write_csv(const std::filesystem::path &path,
                      const std::vector<std::string> &header,
                      const std::vector<std::string> &labels,
                      const Eigen::MatrixXd &rows) {
    if (static_cast<int>(header.size()) != rows.cols() + 1 ||
        static_cast<int>(labels.size()) != rows.rows())
        throw IoError("write_csv: header/label mismatch");
    auto f = detail::open_out(path);
    for (size_t i = 0; i < header.size(); ++i)
        f << (i ? "," : "") << header[i];
    f << "\n";
    for (int r = 0; r < rows.rows(); ++r) {
        f << labels[r];
        for (int c = 0; c < rows.cols(); ++c) f << "," << detail::fmt_g(rows(r, c));
        f << "\n";
    }
}

// Binary channel-tensor layout:
//   magic "RLCT"            4 bytes
//   version                 u32
//   n_rx, n_tx, n_sc, n_sym u32 x 4
//   f_c, delta_f, T_s       f64 x 3
//   body: for each (n, k) slab, row-major (rx, tx), interleaved re/im f64.
inline void write_tensor(const std::filesystem::path &path, const ChannelTensor &h) {
    auto f = detail::open_out(path);
    const char magic[4] = {'R', 'L', 'C', 'T'};
    f.write(magic, 4);
    auto put_u32 = [&](uint32_t v) { f.write(reinterpret_cast<const char *>(&v), 4); };
    auto put_f64 = [&](double v) { f.write(reinterpret_cast<const char *>(&v), 8); };
    put_u32(1);
    put_u32(uint32_t(h.n_rx));
    put_u32(uint32_t(h.n_tx));
    put_u32(uint32_t(h.grid.n_subcarriers));
    put_u32(uint32_t(h.grid.n_symbols));
    put_f64(h.grid.f_c);
    put_f64(h.grid.delta_f);
    put_f64(h.grid.T_s);
    for (const auto &slab : h.h)
        for (int r = 0; r < slab.rows(); ++r)
            for (int c = 0; c < slab.cols(); ++c) {
                put_f64(slab(r, c).real());
                put_f64(slab(r, c).imag());
            }
    if (!f) throw IoError("write_tensor: short write: " + path.string());
}

inline ChannelTensor read_tensor(const std::filesystem::path &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path.string());
    char magic[4];
    f.read(magic, 4);
    if (std::string(magic, 4) != "RLCT") throw IoError("read_tensor: bad magic");
    auto get_u32 = [&] {
        uint32_t v = 0;
        f.read(reinterpret_cast<char *>(&v), 4);
        return v;
    };
    auto get_f64 = [&] {
        double v = 0;
        f.read(reinterpret_cast<char *>(&v), 8);
        return v;
    };
    if (get_u32() != 1) throw IoError("read_tensor: unsupported version");
    const int n_rx = int(get_u32()), n_tx = int(get_u32());
    SpectralGrid grid;
    grid.n_subcarriers = int(get_u32());
    grid.n_symbols = int(get_u32());
    grid.f_c = get_f64();
    grid.delta_f = get_f64();
    grid.T_s = get_f64();
    ChannelTensor h(n_rx, n_tx, grid);
    for (auto &slab : h.h)
        for (int r = 0; r < slab.rows(); ++r)
            for (int c = 0; c < slab.cols(); ++c) {
                const double re = get_f64(), im = get_f64();
                slab(r, c) = Complex(re, im);
            }
    if (!f) throw IoError("read_tensor: truncated file");
    return h;
}

// FNV-1a, used to fingerprint the input config bytes in the manifest.
inline uint64_t fnv1a(const std::string &bytes) {
    uint64_t h = 14695981039346656037ull;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ull;
    }
    return h;
}

struct RunManifest {
    std::string subcommand;
    std::string config_path;  // empty if no config used
    uint64_t seed = 0;
    std::string out_dir;
    std::string version = kToolVersion;
    uint64_t config_hash = 0;

    void write(const std::filesystem::path &dir) const {
        nlohmann::json j{{"subcommand", subcommand}, {"config", config_path},
                         {"seed", seed},            {"out", out_dir},
                         {"version", version},      {"config_hash", config_hash}};
        auto f = detail::open_out(dir / "manifest.json");
        f << j.dump(2) << "\n";
    }
};

inline std::string read_file(const std::filesystem::path &path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

}  // namespace radioloc
