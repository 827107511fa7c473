#include "mkv/tilt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace mkv {

namespace {

// Trapezoid nodes z_k = (k - mid) h on [-L, L]; symmetric so sigma -> -sigma
// mirrors every intermediate bitwise.
struct Quad {
    std::vector<double> z, arg;
    double h = 0.0, shift = 0.0;

    Quad(const PotentialSpec& spec, double sigma, std::size_t nq) {
        if (nq < 33) throw std::invalid_argument("quadrature too coarse");
        z.resize(nq);
        arg.resize(nq);
        h = 2.0 * spec.L / double(nq - 1);
        double mid = 0.5 * double(nq - 1);
        shift = -std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < nq; ++k) {
            z[k] = (double(k) - mid) * h;
            arg[k] = sigma * z[k] - spec.psi(z[k]);
            shift = std::max(shift, arg[k]);
        }
    }

    // Trapezoid weight times the shifted integrand.
    double f(std::size_t k) const {
        double w = (k == 0 || k == z.size() - 1) ? 0.5 : 1.0;
        return std::exp(arg[k] - shift) * w;
    }

    template <class G>
    double pair_sum(G&& term) const {
        double acc = 0.0;
        std::size_t n = z.size();
        for (std::size_t k = 0; k < n / 2; ++k) acc += term(k) + term(n - 1 - k);
        if (n % 2) acc += term(n / 2);
        return acc;
    }
};

}  // namespace

double log_partition(const PotentialSpec& spec, double sigma, std::size_t n_quad) {
    Quad q(spec, sigma, n_quad);
    double s = q.pair_sum([&](std::size_t k) { return q.f(k); });
    double out = q.shift + std::log(s * q.h);
    if (!std::isfinite(out)) throw std::runtime_error("log_partition: non-finite result");
    return out;
}

double tilted_mean(const PotentialSpec& spec, double sigma, std::size_t n_quad) {
    Quad q(spec, sigma, n_quad);
    double den = q.pair_sum([&](std::size_t k) { return q.f(k); });
    double num = q.pair_sum([&](std::size_t k) { return q.z[k] * q.f(k); });
    return num / den;
}

double tilted_variance(const PotentialSpec& spec, double sigma, std::size_t n_quad) {
    Quad q(spec, sigma, n_quad);
    double den = q.pair_sum([&](std::size_t k) { return q.f(k); });
    double num = q.pair_sum([&](std::size_t k) { return q.z[k] * q.f(k); });
    double num2 = q.pair_sum([&](std::size_t k) { return q.z[k] * (q.z[k] * q.f(k)); });
    double m = num / den;
    return num2 / den - m * m;
}

LegendrePoint legendre(const PotentialSpec& spec, double m, std::size_t n_quad) {
    // tilted_mean is strictly increasing in sigma; bracket by doubling.
    double lo = -1.0, hi = 1.0;
    while (tilted_mean(spec, lo, n_quad) >= m) {
        lo *= 2.0;
        if (lo < -512.0) throw std::runtime_error("legendre: mean below attainable range");
    }
    while (tilted_mean(spec, hi, n_quad) <= m) {
        hi *= 2.0;
        if (hi > 512.0) throw std::runtime_error("legendre: mean above attainable range");
    }
    while (hi - lo > 1e-12) {
        double mid = 0.5 * (lo + hi);
        if (tilted_mean(spec, mid, n_quad) > m)
            hi = mid;
        else
            lo = mid;
    }
    double sigma = 0.5 * (lo + hi);
    for (int it = 0; it < 2; ++it) {
        double g = tilted_mean(spec, sigma, n_quad) - m;
        double v = tilted_variance(spec, sigma, n_quad);
        if (v > 0.0) sigma -= g / v;
    }
    return LegendrePoint{sigma * m - log_partition(spec, sigma, n_quad), sigma};
}

double hbar(const PotentialSpec& spec, double m, std::size_t n_quad) {
    return legendre(spec, m, n_quad).phi - 0.5 * spec.j * m * m;
}

CriticalPoints critical_points(const PotentialSpec& spec, std::size_t n_quad) {
    const double m_lo = 1e-6;
    const double m_hi = 0.95 * spec.L;
    const int cells = 64;
    auto g = [&](double m) { return tilted_mean(spec, spec.j * m, n_quad) - m; };
    double prev_m = m_lo, prev_g = g(m_lo);
    double root_a = 0.0, root_b = 0.0;
    int changes = 0;
    for (int k = 1; k <= cells; ++k) {
        double mk = m_lo + (m_hi - m_lo) * double(k) / double(cells);
        double gk = g(mk);
        if ((prev_g > 0.0) != (gk > 0.0)) {
            ++changes;
            root_a = prev_m;
            root_b = mk;
        }
        prev_m = mk;
        prev_g = gk;
    }
    if (changes > 1)
        throw std::runtime_error("critical_points: multiple sign changes, critical structure violated");
    if (changes == 0) return CriticalPoints{0.0, 1};
    while (root_b - root_a > 1e-12) {
        double mid = 0.5 * (root_a + root_b);
        if (g(mid) > 0.0)
            root_a = mid;
        else
            root_b = mid;
    }
    return CriticalPoints{0.5 * (root_a + root_b), 3};
}

GridMeasure tilted_measure(const PotentialSpec& spec, double sigma, const Grid& grid) {
    const std::size_t n = grid.n;
    std::vector<double> arg(n);
    double shift = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        double z = grid.center(i);
        arg[i] = sigma * z - spec.psi(z);
        shift = std::max(shift, arg[i]);
    }
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = std::exp(arg[i] - shift);
    return normalized(grid, std::move(w));
}

StationaryTriple stationary_triple(const PotentialSpec& spec, const Grid& grid) {
    CriticalPoints cp = critical_points(spec);
    if (cp.count != 3)
        throw std::runtime_error("stationary_triple: subcritical spec, only the symmetric state exists");
    StationaryTriple t;
    t.m_star = cp.m_star;
    // At the critical point the maximizing tilt is exactly j m*.
    t.sigma_star = spec.j * cp.m_star;
    t.mu_plus = tilted_measure(spec, t.sigma_star, grid);
    t.mu_minus = tilted_measure(spec, -t.sigma_star, grid);
    t.mu_zero = tilted_measure(spec, 0.0, grid);
    t.f_plus = free_energy(spec, t.mu_plus);
    t.f_minus = free_energy(spec, t.mu_minus);
    t.f_zero = free_energy(spec, t.mu_zero);
    return t;
}

}
