#include "mkv/measure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace mkv {

namespace {

// Accumulate term(i) + term(n-1-i) pair by pair. Reversing the masses
// permutes the two addends inside each pair only, so reductions built this
// way are bitwise reflection-invariant (or exactly negated for odd terms).
template <class F>
double pair_sum(std::size_t n, F&& term) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n / 2; ++i) acc += term(i) + term(n - 1 - i);
    return acc;
}

void check_same_grid(const GridMeasure& a, const GridMeasure& b) {
    if (!(a.grid == b.grid))
        throw std::invalid_argument("measures live on different grids");
}

}  // namespace

GridMeasure from_masses(const Grid& grid, std::vector<double> masses) {
    if (masses.size() != grid.n)
        throw std::invalid_argument("from_masses: size mismatch");
    for (double v : masses)
        if (!(v >= 0.0)) throw std::invalid_argument("from_masses: negative mass");
    double total = pair_sum(grid.n, [&](std::size_t i) { return masses[i]; });
    if (std::abs(total - 1.0) > 1e-12)
        throw std::invalid_argument("from_masses: total mass deviates from 1");
    return GridMeasure{grid, std::move(masses)};
}

GridMeasure normalized(const Grid& grid, std::vector<double> weights) {
    if (weights.size() != grid.n)
        throw std::invalid_argument("normalized: size mismatch");
    for (double v : weights)
        if (!(v >= 0.0)) throw std::invalid_argument("normalized: negative weight");
    double total = pair_sum(grid.n, [&](std::size_t i) { return weights[i]; });
    if (!(total > 0.0) || !std::isfinite(total))
        throw std::invalid_argument("normalized: zero or non-finite total");
    for (double& v : weights) v /= total;
    return GridMeasure{grid, std::move(weights)};
}

namespace {

// Raw cell masses of N(mean, var) from CDF differences, clamped at zero.
std::vector<double> gaussian_cells(const Grid& grid, double mean, double var) {
    const double s = std::sqrt(2.0 * var);
    std::vector<double> cdf(grid.n + 1);
    for (std::size_t k = 0; k <= grid.n; ++k) {
        double edge = -grid.L + double(k) * grid.dz;
        cdf[k] = 0.5 * std::erfc(-(edge - mean) / s);
    }
    std::vector<double> w(grid.n);
    for (std::size_t i = 0; i < grid.n; ++i) w[i] = std::max(cdf[i + 1] - cdf[i], 0.0);
    return w;
}

}  // namespace

GridMeasure gaussian_init(const Grid& grid, double mean, double var) {
    if (!(var > 0.0) || std::abs(mean) + 4.0 * std::sqrt(var) >= grid.L)
        throw std::invalid_argument("gaussian_init: need var > 0 and the 4-sigma interval inside [-L, L]");
    // libm's erfc does not honor the reflection identity bitwise, so raw CDF
    // differences at mean zero are not exactly symmetric and the residual seeds
    // the unstable mode of the symmetric stationary state. Averaging each cell
    // with the mirrored cell of the negated mean makes reflect(gaussian_init(m))
    // and gaussian_init(-m) bitwise identical, and mean-zero data exactly even.
    std::vector<double> a = gaussian_cells(grid, mean, var);
    std::vector<double> b = gaussian_cells(grid, -mean, var);
    std::vector<double> w(grid.n);
    for (std::size_t i = 0; i < grid.n; ++i)
        w[i] = 0.5 * (a[i] + b[grid.n - 1 - i]);
    return normalized(grid, std::move(w));
}

GridMeasure from_samples(const Grid& grid, const std::vector<double>& points) {
    if (points.empty()) throw std::invalid_argument("from_samples: empty sample list");
    std::vector<double> counts(grid.n, 0.0);
    for (double x : points) {
        double c = std::clamp(x, -grid.L, grid.L);
        auto idx = std::size_t(std::min(double(grid.n - 1),
                                        std::floor((c + grid.L) / grid.dz)));
        counts[idx] += 1.0;
    }
    return normalized(grid, std::move(counts));
}

double mean(const GridMeasure& mu) {
    return pair_sum(mu.grid.n, [&](std::size_t i) { return mu.p[i] * mu.grid.center(i); });
}

double second_moment(const GridMeasure& mu) {
    return pair_sum(mu.grid.n, [&](std::size_t i) {
        double z = mu.grid.center(i);
        return mu.p[i] * (z * z);
    });
}

double variance(const GridMeasure& mu) {
    double m = mean(mu);
    return second_moment(mu) - m * m;
}

GridMeasure reflect(const GridMeasure& mu) {
    std::vector<double> q(mu.p.rbegin(), mu.p.rend());
    return GridMeasure{mu.grid, std::move(q)};
}

double free_energy(const PotentialSpec& spec, const GridMeasure& mu) {
    const std::size_t n = mu.grid.n;
    const double dz = mu.grid.dz;
    double entropy = pair_sum(n, [&](std::size_t i) {
        return mu.p[i] > 0.0 ? mu.p[i] * std::log(mu.p[i] / dz) : 0.0;
    });
    double potential = pair_sum(n, [&](std::size_t i) {
        return mu.p[i] * spec.psi(mu.grid.center(i));
    });
    double m = mean(mu);
    return entropy + potential - 0.5 * spec.j * m * m;
}

double relative_entropy(const GridMeasure& mu, const GridMeasure& nu) {
    check_same_grid(mu, nu);
    double acc = 0.0;
    for (std::size_t i = 0; i < mu.grid.n; ++i) {
        if (mu.p[i] > 0.0) {
            if (!(nu.p[i] > 0.0)) return std::numeric_limits<double>::infinity();
            acc += mu.p[i] * std::log(mu.p[i] / nu.p[i]);
        }
    }
    // Gibbs: nonnegative in exact arithmetic; absorb summation roundoff only.
    return (acc < 0.0 && acc > -1e-12) ? 0.0 : acc;
}

double metric_slope_sq(const PotentialSpec& spec, const GridMeasure& mu) {
    const std::size_t n = mu.grid.n;
    const double dz = mu.grid.dz;
    const double mass_floor = 1e-14;  // rho_floor = 1e-14/dz in mass units
    std::vector<double> lr(n, 0.0);
    std::vector<char> ok(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (mu.p[i] > mass_floor) {
            ok[i] = 1;
            lr[i] = std::log(mu.p[i] / dz);
        }
    }
    const double jm = spec.j * mean(mu);
    return pair_sum(n, [&](std::size_t i) -> double {
        if (!ok[i]) return 0.0;
        bool okm = i > 0 && ok[i - 1];
        bool okp = i + 1 < n && ok[i + 1];
        double d;
        if (okm && okp)
            d = (lr[i + 1] - lr[i - 1]) / (2.0 * dz);
        else if (okp)
            d = (lr[i + 1] - lr[i]) / dz;
        else if (okm)
            d = (lr[i] - lr[i - 1]) / dz;
        else
            return 0.0;
        double v = d + spec.dpsi(mu.grid.center(i)) - jm;
        return mu.p[i] * (v * v);
    });
}

namespace {

// Shared breakpoint merge of two piecewise-constant quantile functions given
// as sorted atom positions with cumulative masses.
double quantile_merge(const std::vector<double>& za, const std::vector<double>& ca,
                      const std::vector<double>& zb, const std::vector<double>& cb) {
    double acc = 0.0, cur = 0.0;
    std::size_t i = 0, j = 0;
    while (i < za.size() && j < zb.size()) {
        double na = ca[i], nb = cb[j];
        double nxt = std::min(na, nb);
        double w = nxt - cur;
        if (w > 0.0) {
            double d = za[i] - zb[j];
            acc += d * d * w;
            cur = nxt;
        }
        if (na <= nxt) ++i;
        if (nb <= nxt) ++j;
    }
    return std::sqrt(std::max(acc, 0.0));
}

}  // namespace

double wasserstein2(const GridMeasure& mu, const GridMeasure& nu) {
    check_same_grid(mu, nu);
    const std::size_t n = mu.grid.n;
    std::vector<double> za(n), ca(n), cb(n);
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        za[i] = mu.grid.center(i);
        sa += mu.p[i];
        sb += nu.p[i];
        ca[i] = sa;
        cb[i] = sb;
    }
    return quantile_merge(za, ca, za, cb);
}

double wasserstein2_atoms(const std::vector<double>& za, const std::vector<double>& wa,
                          const std::vector<double>& zb, const std::vector<double>& wb) {
    if (za.size() != wa.size() || zb.size() != wb.size())
        throw std::invalid_argument("wasserstein2_atoms: size mismatch");
    auto prep = [](const std::vector<double>& z, const std::vector<double>& w,
                   std::vector<double>& zs, std::vector<double>& cs) {
        std::vector<std::size_t> idx(z.size());
        std::iota(idx.begin(), idx.end(), std::size_t(0));
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return z[a] < z[b]; });
        double c = 0.0;
        for (std::size_t k : idx) {
            if (!(w[k] >= 0.0))
                throw std::invalid_argument("wasserstein2_atoms: negative weight");
            if (w[k] == 0.0) continue;
            c += w[k];
            zs.push_back(z[k]);
            cs.push_back(c);
        }
        if (cs.empty()) throw std::invalid_argument("wasserstein2_atoms: zero total mass");
    };
    std::vector<double> zas, cas, zbs, cbs;
    prep(za, wa, zas, cas);
    prep(zb, wb, zbs, cbs);
    // The lists may be unnormalized; scale each CDF to unit total so the
    // merge consumes both sides completely.
    for (std::vector<double>* cs : {&cas, &cbs}) {
        double total = cs->back();
        for (double& v : *cs) v /= total;
        cs->back() = 1.0;
    }
    return quantile_merge(zas, cas, zbs, cbs);
}

}
