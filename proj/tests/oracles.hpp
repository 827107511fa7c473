#pragma once

// Independent reference implementations the tests compare against. Kept
// deliberately naive: correctness over speed.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include "mkv/measure.hpp"
#include "mkv/potential.hpp"

namespace oracle {

// W2 between two atomic measures by the monotone (north-west corner) coupling
// on position-sorted atoms.
inline double nw_w2(std::vector<double> xa, std::vector<double> wa,
                    std::vector<double> xb, std::vector<double> wb) {
    auto sort_by_pos = [](std::vector<double>& x, std::vector<double>& w) {
        std::vector<std::size_t> idx(x.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
        std::vector<double> xs, ws;
        for (auto i : idx) {
            xs.push_back(x[i]);
            ws.push_back(w[i]);
        }
        x = std::move(xs);
        w = std::move(ws);
    };
    double ta = std::accumulate(wa.begin(), wa.end(), 0.0);
    double tb = std::accumulate(wb.begin(), wb.end(), 0.0);
    for (auto& w : wa) w /= ta;
    for (auto& w : wb) w /= tb;
    sort_by_pos(xa, wa);
    sort_by_pos(xb, wb);
    double cost = 0.0;
    std::size_t i = 0, j = 0;
    double ra = wa.empty() ? 0.0 : wa[0];
    double rb = wb.empty() ? 0.0 : wb[0];
    while (i < xa.size() && j < xb.size()) {
        double m = std::min(ra, rb);
        double d = xa[i] - xb[j];
        cost += m * d * d;
        ra -= m;
        rb -= m;
        if (ra <= 1e-18 && i + 1 <= xa.size()) {
            ++i;
            ra = i < xa.size() ? wa[i] : 0.0;
        }
        if (rb <= 1e-18 && j + 1 <= xb.size()) {
            ++j;
            rb = j < xb.size() ? wb[j] : 0.0;
        }
    }
    return std::sqrt(std::max(cost, 0.0));
}

// Free energy evaluated directly from its definition, plain left-to-right sums.
inline double free_energy_direct(const mkv::PotentialSpec& spec, const mkv::GridMeasure& mu) {
    double ent = 0.0, pot = 0.0, m = 0.0;
    for (std::size_t i = 0; i < mu.grid.n; ++i) {
        double p = mu.p[i];
        if (p > 0.0) ent += p * std::log(p / mu.grid.dz);
        pot += p * spec.psi(mu.grid.center(i));
        m += p * mu.grid.center(i);
    }
    return ent + pot - 0.5 * spec.j * m * m;
}

// A potential with psi identically zero and no interaction.
inline mkv::PotentialSpec flat_spec(double L) {
    mkv::PotentialSpec s;
    s.psi = [](double) { return 0.0; };
    s.dpsi = [](double) { return 0.0; };
    s.ddpsi = [](double) { return 0.0; };
    s.j = 0.0;
    s.L = L;
    s.eps_growth = 2.0;
    s.c_growth = 0.1;
    return s;
}

}  // namespace oracle
