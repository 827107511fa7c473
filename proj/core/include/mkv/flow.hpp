#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mkv/measure.hpp"
#include "mkv/potential.hpp"

namespace mkv {

enum class Scheme { fokker_planck, jko };
enum class FlowStatus { stationary, timeout };

struct FlowParams {
    double dt = 1e-3;
    double t_max = 200.0;
    double stationarity_tol = 5e-7;
    std::size_t record_every = 100;
    Scheme scheme = Scheme::fokker_planck;
    double jko_tau = 0.02;
    double lambda = -1.0;   // convexity modulus, < 0; see lambda_bound

    void validate() const;
};

struct FlowState {
    double t = 0.0;
    GridMeasure measure;
    double energy = 0.0;
    double slope_sq = 0.0;
    double mean = 0.0;
};

/// Recorded states plus the metric-derivative estimate
/// W2(mu_k, mu_{k+1}) / (t_{k+1} - t_k) for each recorded interval
/// (speed has size records.size() - 1).
struct FlowTrajectory {
    std::vector<FlowState> records;
    std::vector<double> speed;
    FlowStatus status = FlowStatus::timeout;
};

/// One step of d/dt rho = d/dz (d/dz rho + rho (psi'(z) - j m)), m frozen at
/// the step start. Implicit in the density with Scharfetter-Gummel flux
/// weights, so discrete tilted measures with matching mean are exact fixed
/// points. No-flux boundaries; mass conserved to 1e-14; a step producing
/// negativity beyond -1e-14 is retried once as two half steps, then fails.
GridMeasure fp_step(const PotentialSpec& spec, const GridMeasure& mu, double dt);

/// One minimizing-movement step: approximately minimizes
/// F(nu) + W2(nu, mu)^2 / (2 tau) over monotone quantile vectors, by damped
/// Newton with an Armijo line search (projected gradient as a safeguard),
/// then rebins to the grid. First-order stationarity residual <= 1e-8.
GridMeasure jko_step(const PotentialSpec& spec, const GridMeasure& mu, double tau,
                     std::size_t n_atoms = 0);

/// The same minimizing-movement step purely in quantile coordinates: q_prev
/// holds K sorted equal-weight atom positions, the return value the optimized
/// atoms. Lets callers chain steps without intermediate rebinning.
std::vector<double> jko_quantile_step(const PotentialSpec& spec,
                                      const std::vector<double>& q_prev, double tau);

/// Integrate until slope^2 < stationarity_tol (with the last recorded W2
/// interval below stationarity_tol * dt) or t >= t_max, recording every
/// record_every steps.
FlowTrajectory evolve(const PotentialSpec& spec, const GridMeasure& mu0,
                      const FlowParams& params);

/// | F(T) - F(0) + (1/2) INT (slope^2 + speed^2) | / (|F(0)| + 1), trapezoid
/// over the recorded states. Needs >= 3 records.
double check_energy_identity(const PotentialSpec& spec, const FlowTrajectory& traj);

/// lambda = min(0, inf psi'' on [-L, L]) - j, the convexity modulus used by
/// the contraction and regularization audits. The infimum is taken over a
/// fine symmetric scan; requires a passing curvature clause in the report.
double lambda_bound(const PotentialSpec& spec, const AssumptionReport& report);

/// F(S[mu](t)) - [ F(nu) + lambda / (2 (e^{lambda t} - 1)) W2(mu, nu)^2 ];
/// nonpositive up to scheme error.
double check_regularization(const PotentialSpec& spec, const GridMeasure& mu,
                            const GridMeasure& nu, double t, const FlowParams& params);

/// W2( S[mu](t+h), S[S[mu](h)](t) ); zero when t and h are multiples of dt.
double check_semigroup(const PotentialSpec& spec, const GridMeasure& mu,
                       double h, double t, const FlowParams& params);

/// Quantile values of the grid measure at levels (k + 1/2) / K, by inverting
/// the piecewise-linear CDF of the cell-averaged density.
std::vector<double> quantiles_from_grid(const GridMeasure& mu, std::size_t K);

/// Rebin K equal-weight atoms (sorted) onto the grid by spreading each atom
/// over the cells its Voronoi interval covers.
GridMeasure rebin_quantiles(const Grid& grid, const std::vector<double>& q);

}
