#include "mkv/particles.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mkv/flow.hpp"
#include "mkv/threads.hpp"

namespace mkv {

namespace {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t particle, std::uint64_t step) {
    return mix64(seed ^ mix64(particle ^ mix64(step)));
}

// Uniform in (0, 1]: zero never appears, so log stays finite.
double to_unit_pos(std::uint64_t h) {
    return double((h >> 11) + 1) * 0x1p-53;
}

double to_unit(std::uint64_t h) { return double(h >> 11) * 0x1p-53; }

constexpr std::uint64_t kInitTag = ~std::uint64_t(0);

}  // namespace

double gauss_noise(std::uint64_t seed, std::uint64_t particle, std::uint64_t step) {
    std::uint64_t h1 = counter_hash(seed, particle, step);
    std::uint64_t h2 = mix64(h1 ^ 0x9e3779b97f4a7c15ULL);
    double r = std::sqrt(-2.0 * std::log(to_unit_pos(h1)));
    double theta = 6.283185307179586476925286766559 * to_unit(h2);
    return r * std::cos(theta);
}

ParticleEnsemble em_step(const PotentialSpec& spec, const ParticleEnsemble& ens,
                         double dt, int threads, double noise_sign) {
    if (!(dt > 0.0)) throw std::invalid_argument("em_step: dt must be positive");
    const std::size_t n = ens.x.size();
    if (n < 2) throw std::invalid_argument("em_step: need at least 2 particles");
    double sum = 0.0;
    for (double v : ens.x) sum += v;
    const double jm = spec.j * (sum / double(n));
    const double amp = std::sqrt(2.0 * dt);
    ParticleEnsemble out;
    out.x.resize(n);
    out.t = ens.t + dt;
    out.seed = ens.seed;
    out.step = ens.step + 1;
    parallel_for(n, threads, [&](std::size_t i) {
        double xi = noise_sign * gauss_noise(ens.seed, i, ens.step);
        double drift = jm - spec.dpsi(ens.x[i]);
        out.x[i] = ens.x[i] + dt * drift + amp * xi;
    });
    for (double v : out.x)
        if (!std::isfinite(v)) throw std::runtime_error("em_step: non-finite particle position");
    return out;
}

ParticleEnsemble init_ensemble(const GridMeasure& mu0, std::size_t n, std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("init_ensemble: need at least 2 particles");
    const Grid& g = mu0.grid;
    std::vector<double> cum(g.n + 1, 0.0);
    for (std::size_t i = 0; i < g.n; ++i) cum[i + 1] = cum[i] + mu0.p[i];
    ParticleEnsemble ens;
    ens.x.resize(n);
    ens.seed = seed;
    for (std::size_t k = 0; k < n; ++k) {
        double u = to_unit_pos(counter_hash(seed, k, kInitTag)) * cum[g.n];
        auto it = std::lower_bound(cum.begin() + 1, cum.end(), u);
        auto i = std::size_t(it - cum.begin() - 1);
        i = std::min(i, g.n - 1);
        double pi = mu0.p[i];
        double frac = pi > 0.0 ? std::clamp((u - cum[i]) / pi, 0.0, 1.0) : 0.5;
        ens.x[k] = g.left_edge(i) + frac * g.dz;
    }
    return ens;
}

std::vector<ParticleEnsemble> simulate(const PotentialSpec& spec, const GridMeasure& mu0,
                                       std::size_t n, double dt, double t_end,
                                       std::uint64_t seed, std::size_t record_every,
                                       int threads) {
    if (record_every == 0) throw std::invalid_argument("simulate: record_every must be >= 1");
    ParticleEnsemble ens = init_ensemble(mu0, n, seed);
    std::vector<ParticleEnsemble> snaps;
    snaps.push_back(ens);
    const auto steps = std::size_t(std::ceil(t_end / dt - 1e-9));
    for (std::size_t s = 1; s <= steps; ++s) {
        ens = em_step(spec, ens, dt, threads);
        if (s % record_every == 0 || s == steps) snaps.push_back(ens);
    }
    return snaps;
}

std::vector<PropagationRow> propagation_gap(const PotentialSpec& spec, const GridMeasure& mu0,
                                            const std::vector<std::size_t>& n_list,
                                            double t_end, double dt,
                                            const std::vector<std::uint64_t>& seeds,
                                            int threads) {
    for (std::size_t k = 1; k < n_list.size(); ++k)
        if (n_list[k] <= n_list[k - 1])
            throw std::invalid_argument("propagation_gap: n_list must be increasing");
    if (seeds.empty()) throw std::invalid_argument("propagation_gap: need at least one seed");

    GridMeasure pde = mu0;
    if (t_end > 0.0) {
        FlowParams fp;
        fp.dt = dt;
        fp.t_max = t_end;
        fp.stationarity_tol = 1e-300;  // run the full horizon
        fp.record_every = std::size_t(-1) / 2;
        pde = evolve(spec, mu0, fp).records.back().measure;
    }

    std::vector<PropagationRow> rows;
    for (std::size_t n : n_list) {
        PropagationRow row;
        row.n = n;
        row.gaps.resize(seeds.size());
        for (std::size_t s = 0; s < seeds.size(); ++s) {
            auto snaps = t_end > 0.0
                             ? simulate(spec, mu0, n, dt, t_end, seeds[s],
                                        std::size_t(-1) / 2, threads)
                             : std::vector<ParticleEnsemble>{init_ensemble(mu0, n, seeds[s])};
            GridMeasure binned = from_samples(mu0.grid, snaps.back().x);
            row.gaps[s] = wasserstein2(binned, pde);
        }
        std::vector<double> sorted = row.gaps;
        std::sort(sorted.begin(), sorted.end());
        std::size_t m = sorted.size();
        row.median_gap = m % 2 ? sorted[m / 2]
                               : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
        rows.push_back(std::move(row));
    }
    return rows;
}

}
