#include "mkv/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mkv {

namespace {

constexpr std::size_t kFineScan = (std::size_t(1) << 18) + 1;

// Endpoint-inclusive symmetric samples of [-L, L]: z_k = (k - mid) * h so
// that z and -z appear in exactly negated pairs.
double sample_at(std::size_t k, std::size_t count, double L) {
    double h = 2.0 * L / double(count - 1);
    return (double(k) - 0.5 * double(count - 1)) * h;
}

// Largest c with psi - min(psi) + 1 >= c |z|^(2+eps) on the fine scan,
// halved for safety so coarser audit grids keep slack. The +1 offset keeps
// the numerator away from zero, so the ratio never degenerates at the wells.
double calibrate_growth(const std::function<double(double)>& psi, double eps,
                        double psi_min, double L) {
    double c = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < kFineScan; ++k) {
        double z = sample_at(k, kFineScan, L);
        double r = std::pow(std::abs(z), 2.0 + eps);
        if (r > 1e-300) c = std::min(c, (psi(z) - psi_min + 1.0) / r);
    }
    if (!std::isfinite(c)) return 0.0;
    return 0.5 * std::max(c, 0.0);
}

}  // namespace

PotentialSpec make_quartic(double a, double b, double j, double L) {
    if (!(a > 0.0)) throw std::invalid_argument("make_quartic: a must be positive");
    if (!(j > 0.0)) throw std::invalid_argument("make_quartic: j must be positive");
    if (!(L > 0.0)) throw std::invalid_argument("make_quartic: half_width must be positive");
    PotentialSpec spec;
    // Even powers via z*z keep psi bitwise even and dpsi bitwise odd.
    spec.psi = [a, b](double z) {
        double z2 = z * z;
        double z4 = z2 * z2;
        return a * z4 + b * z2;
    };
    spec.dpsi = [a, b](double z) {
        double z2 = z * z;
        return z * (4.0 * a * z2 + 2.0 * b);
    };
    spec.ddpsi = [a, b](double z) {
        double z2 = z * z;
        return 12.0 * a * z2 + 2.0 * b;
    };
    spec.j = j;
    spec.L = L;
    spec.eps_growth = 2.0;
    double s = b < 0.0 ? std::min(-b / (2.0 * a), L * L) : 0.0;
    double psi_min = a * (s * s) + b * s;
    spec.c_growth = calibrate_growth(spec.psi, spec.eps_growth, psi_min, L);
    return spec;
}

PotentialSpec make_quadratic(double q, double j, double L) {
    if (!(q > 0.0)) throw std::invalid_argument("make_quadratic: q must be positive");
    if (!(j > 0.0)) throw std::invalid_argument("make_quadratic: j must be positive");
    if (!(L > 0.0)) throw std::invalid_argument("make_quadratic: half_width must be positive");
    PotentialSpec spec;
    spec.psi = [q](double z) { return q * (z * z); };
    spec.dpsi = [q](double z) { return z * (2.0 * q); };
    spec.ddpsi = [q](double) { return 2.0 * q; };
    spec.j = j;
    spec.L = L;
    // Nominal pair: quadratic growth cannot beat |z|^4 at scale, so the
    // audit's growth clause fails once L is large enough.
    spec.eps_growth = 2.0;
    spec.c_growth = 0.1;
    return spec;
}

AssumptionReport check_assumptions(const PotentialSpec& spec, std::size_t n_samples,
                                   double tol) {
    if (n_samples < 100)
        throw std::invalid_argument("check_assumptions: need n_samples >= 100");
    if (!spec.psi || !spec.dpsi || !spec.ddpsi || !(spec.L > 0.0) || !(spec.j > 0.0))
        throw std::invalid_argument("check_assumptions: incomplete spec");

    AssumptionReport rep;
    rep.n_samples = n_samples;
    const double L = spec.L;
    const std::size_t ns = n_samples;
    std::vector<double> z(ns), psi_v(ns), dpsi_v(ns), ddpsi_v(ns);
    for (std::size_t k = 0; k < ns; ++k) {
        z[k] = sample_at(k, ns, L);
        psi_v[k] = spec.psi(z[k]);
        dpsi_v[k] = spec.dpsi(z[k]);
        ddpsi_v[k] = spec.ddpsi(z[k]);
    }

    // (1) curvature split surrogate: psi'' bounded below, and positive
    // outside the hull of its nonpositive samples.
    {
        ClauseResult c{"curvature", false, 0.0, ""};
        double inf_dd = *std::min_element(ddpsi_v.begin(), ddpsi_v.end());
        rep.inf_ddpsi = inf_dd;
        std::size_t lo = ns, hi = 0;
        for (std::size_t k = 0; k < ns; ++k) {
            if (ddpsi_v[k] <= 0.0) {
                lo = std::min(lo, k);
                hi = std::max(hi, k);
            }
        }
        if (lo == ns) {
            c.pass = true;
            c.margin = inf_dd;
            c.detail = "psi'' positive on the whole sample";
        } else if (lo == 0 || hi == ns - 1) {
            c.pass = false;
            c.margin = inf_dd;
            c.detail = "nonpositive psi'' reaches the domain edge";
        } else {
            double outside = std::numeric_limits<double>::infinity();
            for (std::size_t k = 0; k < lo; ++k) outside = std::min(outside, ddpsi_v[k]);
            for (std::size_t k = hi + 1; k < ns; ++k) outside = std::min(outside, ddpsi_v[k]);
            c.pass = outside > 0.0;
            c.margin = outside;
            c.detail = "nonpositive psi'' confined to [" + std::to_string(z[lo]) + ", " +
                       std::to_string(z[hi]) + "]";
        }
        rep.clauses.push_back(std::move(c));
    }

    // (2) growth: psi - min(psi) + 1 >= c |z|^(2+eps), with the minimum
    // taken on an internal fine scan so the shift does not depend on the
    // audit resolution.
    {
        ClauseResult c{"growth", false, 0.0, ""};
        double shift = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < kFineScan; ++k)
            shift = std::min(shift, spec.psi(sample_at(k, kFineScan, L)));
        double worst = std::numeric_limits<double>::infinity();
        double worst_z = 0.0;
        for (std::size_t k = 0; k < ns; ++k) {
            double r = std::pow(std::abs(z[k]), 2.0 + spec.eps_growth);
            double margin = (psi_v[k] - shift + 1.0) - spec.c_growth * r;
            if (margin < worst) {
                worst = margin;
                worst_z = z[k];
            }
        }
        c.pass = worst >= -tol;
        c.margin = worst;
        c.detail = "eps = " + std::to_string(spec.eps_growth) +
                   ", c = " + std::to_string(spec.c_growth) +
                   ", tightest at z = " + std::to_string(worst_z);
        rep.clauses.push_back(std::move(c));
    }

    // (3) evenness.
    {
        ClauseResult c{"evenness", false, 0.0, ""};
        double worst = 0.0;
        for (std::size_t k = 0; k < ns; ++k)
            worst = std::max(worst, std::abs(psi_v[k] - spec.psi(-z[k])));
        c.pass = worst <= tol;
        c.margin = tol - worst;
        c.detail = "max |psi(z) - psi(-z)| = " + std::to_string(worst);
        rep.clauses.push_back(std::move(c));
    }

    // (4) self-consistency solvability: Var(e^{-psi}/Z) > 1/J by trapezoid.
    {
        ClauseResult c{"variance", false, 0.0, ""};
        double h = 2.0 * L / double(ns - 1);
        double zmass = 0.0, m1 = 0.0, m2 = 0.0, peak = 0.0;
        for (std::size_t k = 0; k < ns; ++k) {
            double w = (k == 0 || k == ns - 1) ? 0.5 : 1.0;
            double f = std::exp(-psi_v[k]) * w;
            peak = std::max(peak, std::exp(-psi_v[k]));
            zmass += f;
            m1 += z[k] * f;
            m2 += z[k] * z[k] * f;
        }
        (void)h;  // cancels in the moment ratios
        double mean_q = m1 / zmass;
        double var_q = m2 / zmass - mean_q * mean_q;
        rep.base_variance = var_q;
        rep.tail_ratio =
            std::max(std::exp(-psi_v[0]), std::exp(-psi_v[ns - 1])) / peak;
        c.pass = var_q > 1.0 / spec.j;
        c.margin = var_q - 1.0 / spec.j;
        c.detail = "variance = " + std::to_string(var_q) +
                   ", 1/J = " + std::to_string(1.0 / spec.j) +
                   (rep.tail_ratio > 1e-12 ? ", warning: non-negligible tails" : "");
        rep.clauses.push_back(std::move(c));
    }

    // (5) convexity of psi' on [0, L] via second differences.
    {
        ClauseResult c{"drift-convexity", false, 0.0, ""};
        double worst = std::numeric_limits<double>::infinity();
        std::size_t first = 0;
        while (first < ns && z[first] < -1e-12) ++first;
        for (std::size_t k = first + 1; k + 1 < ns; ++k) {
            double d2 = dpsi_v[k + 1] - 2.0 * dpsi_v[k] + dpsi_v[k - 1];
            worst = std::min(worst, d2);
        }
        c.pass = worst >= -tol;
        c.margin = worst;
        c.detail = "min second difference of psi' on [0, L]";
        rep.clauses.push_back(std::move(c));
    }

    return rep;
}

}
