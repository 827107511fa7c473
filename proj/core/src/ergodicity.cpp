#include "mkv/ergodicity.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mkv/threads.hpp"

namespace mkv {

const char* label_name(Label l) {
    switch (l) {
        case Label::minus: return "minus";
        case Label::zero: return "zero";
        case Label::plus: return "plus";
        default: return "undecided";
    }
}

ClassificationResult classify(const PotentialSpec& spec, const StationaryTriple& triple,
                              const GridMeasure& mu0, const FlowParams& params,
                              const ClassifyOptions& opts) {
    if (!(triple.mu_minus.grid == mu0.grid))
        throw std::invalid_argument("classify: triple and initial condition on different grids");
    ClassificationResult res;
    res.trajectory = evolve(spec, mu0, params);
    const FlowState& fin = res.trajectory.records.back();
    res.w2_minus = wasserstein2(fin.measure, triple.mu_minus);
    res.w2_zero = wasserstein2(fin.measure, triple.mu_zero);
    res.w2_plus = wasserstein2(fin.measure, triple.mu_plus);
    res.f_final = fin.energy;
    res.t_final = fin.t;
    if (res.trajectory.status != FlowStatus::stationary) {
        res.label = Label::undecided;
        res.reason = "timeout before stationarity";
        return res;
    }
    struct Cand {
        Label label;
        double d;
    };
    Cand c[3] = {{Label::minus, res.w2_minus},
                 {Label::zero, res.w2_zero},
                 {Label::plus, res.w2_plus}};
    std::sort(std::begin(c), std::end(c), [](const Cand& a, const Cand& b) { return a.d < b.d; });
    if (c[0].d < opts.match_tol && c[0].d < 0.5 * c[1].d) {
        res.label = c[0].label;
    } else {
        res.label = Label::undecided;
        res.reason = "stationary state fails the match margin";
    }
    return res;
}

SmallBasinPrediction small_basin_predict(const PotentialSpec& spec,
                                         const StationaryTriple& triple,
                                         const GridMeasure& mu0,
                                         const ClassifyOptions& opts) {
    SmallBasinPrediction out;
    double f = free_energy(spec, mu0);
    double m = mean(mu0);
    out.applicable = f <= triple.f_zero + opts.energy_tol && std::abs(m) > opts.mean_tol;
    if (out.applicable) out.predicted = m < 0.0 ? Label::minus : Label::plus;
    return out;
}

BasinCertificate basin_certificate(const PotentialSpec& spec, const StationaryTriple& triple,
                                   const GridMeasure& nu, const FlowParams& params) {
    ClassificationResult cls = classify(spec, triple, nu, params);
    if (cls.label != Label::minus)
        throw std::invalid_argument("basin_certificate: anchor does not classify to minus");
    const double lambda = params.lambda;
    BasinCertificate cert;
    cert.anchor = nu;
    cert.big_delta = triple.f_zero - triple.f_minus;
    bool found = false;
    for (std::size_t k = 1; k < cls.trajectory.records.size(); ++k) {
        const FlowState& st = cls.trajectory.records[k];
        double w2 = wasserstein2(st.measure, triple.mu_minus);
        double excess = st.energy - triple.f_minus;
        double contraction = std::exp(lambda * st.t);
        if (w2 <= 0.25 * triple.m_star && excess <= 0.25 * cert.big_delta &&
            contraction <= 0.5) {
            cert.t_prime = st.t;
            cert.w2_at_t = w2;
            cert.energy_excess = excess;
            cert.contraction = contraction;
            found = true;
            break;
        }
    }
    if (!found)
        throw std::runtime_error("basin_certificate: no settle time before t_max");
    double e2 = std::exp(2.0 * lambda * cert.t_prime);
    cert.delta = std::min(e2 * 0.25 * triple.m_star,
                          std::sqrt(e2 * cert.big_delta / (4.0 * std::abs(lambda))));
    return cert;
}

std::vector<SweepRow> basin_sweep(const PotentialSpec& spec, const StationaryTriple& triple,
                                  const std::vector<std::pair<double, double>>& pairs,
                                  const FlowParams& params, int threads) {
    std::vector<SweepRow> rows(pairs.size());
    parallel_for(pairs.size(), threads, [&](std::size_t i) {
        rows[i].mean = pairs[i].first;
        rows[i].var = pairs[i].second;
        try {
            GridMeasure mu0 = gaussian_init(triple.mu_zero.grid, pairs[i].first, pairs[i].second);
            rows[i].result = classify(spec, triple, mu0, params);
        } catch (const std::exception& e) {
            rows[i].result.label = Label::undecided;
            rows[i].result.reason = e.what();
        }
    });
    return rows;
}

std::vector<BoundaryRow> boundary_probe(const PotentialSpec& spec,
                                        const StationaryTriple& triple,
                                        const std::vector<double>& etas,
                                        const FlowParams& params) {
    for (double e : etas)
        if (!(e > 0.0)) throw std::invalid_argument("boundary_probe: etas must be positive");
    std::vector<BoundaryRow> rows;
    rows.reserve(etas.size());
    for (double eta : etas) {
        BoundaryRow row;
        row.eta = eta;
        double sig_minus = legendre(spec, -eta).dphi;
        double sig_plus = legendre(spec, eta).dphi;
        GridMeasure lo = tilted_measure(spec, sig_minus, triple.mu_zero.grid);
        GridMeasure hi = tilted_measure(spec, sig_plus, triple.mu_zero.grid);
        row.label_minus = classify(spec, triple, lo, params).label;
        row.label_plus = classify(spec, triple, hi, params).label;
        row.w2_to_zero = wasserstein2(hi, triple.mu_zero);
        rows.push_back(std::move(row));
    }
    return rows;
}

}
