#pragma once

#include <cstdint>
#include <vector>

#include "mkv/measure.hpp"
#include "mkv/potential.hpp"

namespace mkv {

/// Interacting particle ensemble. step counts completed em_steps; together
/// with seed it fixes the RNG stream position, so simulation is a pure
/// function of (positions, seed, step).
struct ParticleEnsemble {
    std::vector<double> x;
    double t = 0.0;
    std::uint64_t seed = 0;
    std::uint64_t step = 0;
};

/// Standard normal for (seed, particle, step), from a counter-based hash;
/// the same draw regardless of evaluation order or thread count.
double gauss_noise(std::uint64_t seed, std::uint64_t particle, std::uint64_t step);

/// x_i += (-psi'(x_i) + j mean(x)) dt + sqrt(2 dt) xi_i with the ensemble
/// mean computed once before any update. Throws on non-finite positions.
/// noise_sign flips the noise stream; with -1 and a reflected ensemble the
/// trajectory is the exact negation of the original (odd drift).
ParticleEnsemble em_step(const PotentialSpec& spec, const ParticleEnsemble& ens,
                         double dt, int threads = 1, double noise_sign = 1.0);

/// n iid inverse-CDF samples of mu0, uniform levels drawn from the seed.
ParticleEnsemble init_ensemble(const GridMeasure& mu0, std::size_t n, std::uint64_t seed);

/// Integrate to t_end, snapshotting every record_every steps (and at the end).
std::vector<ParticleEnsemble> simulate(const PotentialSpec& spec, const GridMeasure& mu0,
                                       std::size_t n, double dt, double t_end,
                                       std::uint64_t seed, std::size_t record_every,
                                       int threads = 1);

struct PropagationRow {
    std::size_t n = 0;
    double median_gap = 0.0;
    std::vector<double> gaps;   // per seed
};

/// For each ensemble size: median over seeds of W2(binned ensemble at t_end,
/// PDE state at t_end).
std::vector<PropagationRow> propagation_gap(const PotentialSpec& spec, const GridMeasure& mu0,
                                            const std::vector<std::size_t>& n_list,
                                            double t_end, double dt,
                                            const std::vector<std::uint64_t>& seeds,
                                            int threads = 1);

}
