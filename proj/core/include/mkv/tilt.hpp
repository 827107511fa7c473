#pragma once

#include "mkv/grid.hpp"
#include "mkv/measure.hpp"
#include "mkv/potential.hpp"

namespace mkv {

/// Legendre data at one mean value: phi(m) and the maximizing tilt
/// sigma = phi'(m).
struct LegendrePoint {
    double phi = 0.0;
    double dphi = 0.0;
};

struct CriticalPoints {
    double m_star = 0.0;
    int count = 1;
};

/// The three stationary measures and their free energies. mu_minus is the
/// exact reflection of mu_plus; f_minus == f_plus bitwise for even psi.
struct StationaryTriple {
    double m_star = 0.0;
    double sigma_star = 0.0;
    GridMeasure mu_minus, mu_zero, mu_plus;
    double f_minus = 0.0, f_zero = 0.0, f_plus = 0.0;
};

/// phi*(sigma) = log INT exp(sigma z - psi(z)) dz over [-L, L], trapezoid
/// quadrature on n_quad points with log-sum-exp shifting.
double log_partition(const PotentialSpec& spec, double sigma, std::size_t n_quad = 4001);

/// Mean of the tilted measure mu^sigma, i.e. (phi*)'(sigma).
double tilted_mean(const PotentialSpec& spec, double sigma, std::size_t n_quad = 4001);

/// Variance of mu^sigma, i.e. (phi*)''(sigma).
double tilted_variance(const PotentialSpec& spec, double sigma, std::size_t n_quad = 4001);

/// phi(m) = sup_sigma (sigma m - phi*(sigma)) via monotone root-finding of
/// tilted_mean(sigma) = m. Throws when m lies outside the attainable range.
LegendrePoint legendre(const PotentialSpec& spec, double m, std::size_t n_quad = 4001);

/// hbar(m) = phi(m) - (j/2) m^2.
double hbar(const PotentialSpec& spec, double m, std::size_t n_quad = 4001);

/// Positive root of g(m) = tilted_mean(j m) - m, by sign scan and bisection.
/// count = 3 when a positive root exists (roots {-m*, 0, m*}), else count = 1.
/// Throws if g changes sign more than once on the scan (structure violated).
CriticalPoints critical_points(const PotentialSpec& spec, std::size_t n_quad = 4001);

/// Cell masses proportional to exp(sigma z_i - psi(z_i)), normalized.
GridMeasure tilted_measure(const PotentialSpec& spec, double sigma, const Grid& grid);

/// Builds mu^{-sigma*}, mu^0, mu^{+sigma*} at sigma* = j m* together with
/// their free energies. Requires the supercritical regime (count = 3).
StationaryTriple stationary_triple(const PotentialSpec& spec, const Grid& grid);

}
