#include "mkv/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mkv {

namespace {

void put_u32(std::ofstream& os, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::ifstream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw std::runtime_error("mkv1: truncated header");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

void put_f64(std::ofstream& os, double x) {
    std::uint64_t v;
    std::memcpy(&v, &x, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
    os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::ifstream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    if (!is) throw std::runtime_error("mkv1: truncated payload");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double x;
    std::memcpy(&x, &v, 8);
    return x;
}

}  // namespace

void write_mkv1(const std::string& path, const GridMeasure& mu) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os.write("MKV1", 4);
    put_u32(os, static_cast<std::uint32_t>(mu.grid.n));
    put_f64(os, mu.grid.L);
    for (double m : mu.p) put_f64(os, m);
    os.flush();
    if (!os) throw std::runtime_error("write failed: " + path);
}

GridMeasure read_mkv1(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for reading: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "MKV1", 4) != 0)
        throw std::runtime_error("mkv1: bad magic in " + path);
    std::uint32_t n = get_u32(is);
    double L = get_f64(is);
    Grid grid(n, L);
    std::vector<double> p(n);
    for (std::uint32_t i = 0; i < n; ++i) p[i] = get_f64(is);
    char extra;
    if (is.read(&extra, 1)) throw std::runtime_error("mkv1: trailing bytes in " + path);
    return from_masses(grid, std::move(p));
}

void write_measure_csv(const std::string& path, const GridMeasure& mu) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "z,p\n";
    for (std::size_t i = 0; i < mu.grid.n; ++i)
        os << fmt17(mu.grid.center(i)) << ',' << fmt17(mu.p[i]) << '\n';
    os.flush();
    if (!os) throw std::runtime_error("write failed: " + path);
}

void write_trajectory_csv(const std::string& path, const FlowTrajectory& traj,
                          const GridMeasure& mu_minus, const GridMeasure& mu_zero,
                          const GridMeasure& mu_plus) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open for writing: " + path);
    os << "t,F,slope2,mean,W2_to_minus,W2_to_zero,W2_to_plus\n";
    for (const FlowState& s : traj.records) {
        os << fmt17(s.t) << ',' << fmt17(s.energy) << ',' << fmt17(s.slope_sq) << ','
           << fmt17(s.mean) << ',' << fmt17(wasserstein2(s.measure, mu_minus)) << ','
           << fmt17(wasserstein2(s.measure, mu_zero)) << ','
           << fmt17(wasserstein2(s.measure, mu_plus)) << '\n';
    }
    os.flush();
    if (!os) throw std::runtime_error("write failed: " + path);
}

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string file_hash_hex(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open for hashing: " + path);
    std::uint64_t h = 14695981039346656037ull;
    char buf[65536];
    while (is.read(buf, sizeof(buf)) || is.gcount() > 0) {
        std::streamsize got = is.gcount();
        for (std::streamsize i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!is) break;
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

}  // namespace mkv
