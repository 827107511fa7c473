#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace mkv {

/// Confining potential plus mean-field coupling strength. The callables must
/// be defined on [-L, L]; j > 0 scales the attractive interaction -j*m*z.
struct PotentialSpec {
    std::function<double(double)> psi;
    std::function<double(double)> dpsi;
    std::function<double(double)> ddpsi;
    double j = 0.0;
    double L = 0.0;
    /// Growth exponent and constant for the coercivity audit:
    /// psi - min(psi) + 1 >= c_growth * |z|^(2+eps_growth) is the claim
    /// check_assumptions tests on its sample grid.
    double eps_growth = 2.0;
    double c_growth = 0.0;
};

struct ClauseResult {
    std::string name;
    bool pass = false;
    double margin = 0.0;   // worst slack observed; negative means violated
    std::string detail;
};

/// Outcome of auditing one PotentialSpec on an n_samples-point grid:
/// smoothness proxy, growth, evenness, self-consistency solvability
/// (tilted variance at the origin vs 1/j), and convexity outside a compact set.
struct AssumptionReport {
    std::vector<ClauseResult> clauses;
    std::size_t n_samples = 0;
    double base_variance = 0.0;   // variance of exp(-psi)/Z, clause 4 input
    double inf_ddpsi = 0.0;       // sampled infimum of psi'' on [-L, L]
    double tail_ratio = 0.0;      // exp(-psi(L)) relative to the density peak
    bool all_pass() const {
        for (const auto& c : clauses)
            if (!c.pass) return false;
        return true;
    }
};

/// psi(z) = a z^4 + b z^2 with even-power evaluation so psi(-z) == psi(z)
/// bitwise; c_growth is calibrated by a fine scan against the analytic minimum.
PotentialSpec make_quartic(double a, double b, double j, double L);

/// psi(z) = q z^2 with a fixed nominal growth pair (eps = 2, c = 0.1);
/// quadratic growth cannot match |z|^4 at scale, so the growth clause is
/// expected to fail in the audit once L is large enough.
PotentialSpec make_quadratic(double q, double j, double L);

/// Audit the five standing assumptions on an n_samples-point uniform grid
/// over [-L, L]. tol absorbs roundoff in the evenness, growth, and
/// convexity-slack comparisons.
AssumptionReport check_assumptions(const PotentialSpec& spec,
                                   std::size_t n_samples = 4097,
                                   double tol = 1e-9);

}
