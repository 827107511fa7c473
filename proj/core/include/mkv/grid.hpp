#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace mkv {

/// Uniform grid of n cell centers on [-L, L]. Cell i is centered at
/// z_i = (2i + 1 - n) * (L / n) and has width dz = 2L / n, so the centers
/// are symmetric about 0 and z_{n-1-i} == -z_i exactly in floating point.
struct Grid {
    std::size_t n = 0;
    double L = 0.0;
    double dz = 0.0;

    Grid() = default;
    Grid(std::size_t n_, double L_) : n(n_), L(L_), dz(2.0 * L_ / double(n_)) {
        if (n_ < 16 || n_ % 2 != 0 || !(L_ > 0.0))
            throw std::invalid_argument("Grid: need even n >= 16 and L > 0");
    }

    double center(std::size_t i) const {
        return double(std::ptrdiff_t(2 * i + 1) - std::ptrdiff_t(n)) * (0.5 * dz);
    }
    double left_edge(std::size_t i) const { return center(i) - 0.5 * dz; }

    std::vector<double> centers() const {
        std::vector<double> z(n);
        for (std::size_t i = 0; i < n; ++i) z[i] = center(i);
        return z;
    }

    bool operator==(const Grid& o) const { return n == o.n && L == o.L; }
};

}
