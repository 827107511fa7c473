#pragma once

#include <vector>

#include "mkv/grid.hpp"
#include "mkv/potential.hpp"

namespace mkv {

/// Probability measure with mass p_i on cell i of a uniform grid. Masses are
/// nonnegative and sum to 1 within 1e-12; the cell-averaged density is
/// p_i / dz. Immutable by convention: operations return new measures.
struct GridMeasure {
    Grid grid;
    std::vector<double> p;

    double rho(std::size_t i) const { return p[i] / grid.dz; }
};

/// Wrap raw masses as a measure, validating nonnegativity and unit total mass.
GridMeasure from_masses(const Grid& grid, std::vector<double> masses);

/// Normalize nonnegative weights to total mass 1 and wrap them.
GridMeasure normalized(const Grid& grid, std::vector<double> weights);

/// Gaussian CDF differences over the cells, renormalized to the window.
/// Rejects var <= 0 and initial conditions whose 4-sigma interval leaves
/// [-L, L], the regime where truncation would distort the moments.
GridMeasure gaussian_init(const Grid& grid, double mean, double var);

/// Histogram of the points (clipped to [-L, L]), normalized to mass 1.
GridMeasure from_samples(const Grid& grid, const std::vector<double>& points);

double mean(const GridMeasure& mu);
double second_moment(const GridMeasure& mu);
double variance(const GridMeasure& mu);

/// Masses reversed. Mean negates exactly; entropy, potential energy and
/// slope are preserved bitwise because all reductions pair cell i with
/// cell n-1-i.
GridMeasure reflect(const GridMeasure& mu);

/// F(mu) = sum p_i log(p_i/dz) + sum p_i psi(z_i) - (j/2) mean(mu)^2,
/// with 0 log 0 = 0. Finite for every grid measure.
double free_energy(const PotentialSpec& spec, const GridMeasure& mu);

/// sum p_i log(p_i/q_i); +inf when mu charges a cell nu does not.
double relative_entropy(const GridMeasure& mu, const GridMeasure& nu);

/// Squared metric slope of F at mu: sum p_i |D_i log rho + psi'(z_i) - j m|^2
/// with centered differences of log rho (one-sided at the ends). Cells whose
/// density sits below the floor 1e-14/dz are excluded from differences and
/// contribute nothing.
double metric_slope_sq(const PotentialSpec& spec, const GridMeasure& mu);

/// Exact W2 between two measures on the same grid, by merging the two CDF
/// breakpoint sequences (piecewise-constant quantile functions).
double wasserstein2(const GridMeasure& mu, const GridMeasure& nu);

/// Exact W2 between two finite atomic measures given as (position, weight)
/// lists; atoms need not be sorted, distinct, or normalized (each list is
/// scaled to unit total mass).
double wasserstein2_atoms(const std::vector<double>& za, const std::vector<double>& wa,
                          const std::vector<double>& zb, const std::vector<double>& wb);

}
