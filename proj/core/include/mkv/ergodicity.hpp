#pragma once

#include <string>
#include <vector>

#include "mkv/flow.hpp"
#include "mkv/measure.hpp"
#include "mkv/tilt.hpp"

namespace mkv {

enum class Label { minus, zero, plus, undecided };

const char* label_name(Label l);

struct ClassificationResult {
    Label label = Label::undecided;
    double w2_minus = 0.0, w2_zero = 0.0, w2_plus = 0.0;
    double f_final = 0.0;
    double t_final = 0.0;
    FlowTrajectory trajectory;
    std::string reason;    // set when undecided
};

struct SmallBasinPrediction {
    bool applicable = false;
    Label predicted = Label::undecided;
};

/// Constructive basin-radius certificate around mu_minus: at the settle time
/// t_prime the flow of the anchor is W2-close to mu_minus, has nearly minimal
/// energy, and the contraction factor has dropped below 1/2; delta is the
/// certified radius min{ e^{2 lambda t'} m*/4, sqrt(e^{2 lambda t'} Delta/(4|lambda|)) }.
struct BasinCertificate {
    GridMeasure anchor;
    double t_prime = 0.0;
    double delta = 0.0;
    double w2_at_t = 0.0;        // W2(S[nu](t'), mu_minus)
    double energy_excess = 0.0;  // F(S[nu](t')) - F(mu_minus)
    double contraction = 0.0;    // e^{lambda t'}
    double big_delta = 0.0;      // F(mu_zero) - F(mu_minus)
};

struct ClassifyOptions {
    double match_tol = 1e-3;
    double energy_tol = 1e-8;
    double mean_tol = 1e-6;
};

/// Evolve mu0 and label by the nearest stationary measure; the winner must be
/// within match_tol and under half the runner-up distance, else undecided.
ClassificationResult classify(const PotentialSpec& spec, const StationaryTriple& triple,
                              const GridMeasure& mu0, const FlowParams& params,
                              const ClassifyOptions& opts = {});

/// Sign rule for low-energy asymmetric states: applicable iff
/// F(mu0) <= f_zero + energy_tol and |mean(mu0)| > mean_tol; then the
/// predicted limit is the stationary measure on the mean's side.
SmallBasinPrediction small_basin_predict(const PotentialSpec& spec,
                                         const StationaryTriple& triple,
                                         const GridMeasure& mu0,
                                         const ClassifyOptions& opts = {});

/// Scan the trajectory of nu for the first recorded time satisfying the three
/// settle conditions and evaluate the radius formula. Throws when nu does not
/// classify to minus or no settle time exists before t_max.
BasinCertificate basin_certificate(const PotentialSpec& spec, const StationaryTriple& triple,
                                   const GridMeasure& nu, const FlowParams& params);

struct SweepRow {
    double mean = 0.0, var = 0.0;
    ClassificationResult result;
};

/// Classify a Gaussian initial condition per (mean, var) pair; rows ordered
/// by input index regardless of thread count.
std::vector<SweepRow> basin_sweep(const PotentialSpec& spec, const StationaryTriple& triple,
                                  const std::vector<std::pair<double, double>>& pairs,
                                  const FlowParams& params, int threads = 1);

struct BoundaryRow {
    double eta = 0.0;
    Label label_minus = Label::undecided;
    Label label_plus = Label::undecided;
    double w2_to_zero = 0.0;   // W2(mu^{phi'(eta)}, mu_zero)
};

/// For each eta: classify the tilted measures at phi'(-eta) and phi'(+eta)
/// and record how close the latter sits to mu_zero.
std::vector<BoundaryRow> boundary_probe(const PotentialSpec& spec,
                                        const StationaryTriple& triple,
                                        const std::vector<double>& etas,
                                        const FlowParams& params);

}
