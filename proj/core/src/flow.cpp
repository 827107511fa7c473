#include "mkv/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mkv {

void FlowParams::validate() const {
    if (!(dt > 0.0) || !(t_max > 0.0) || !(stationarity_tol > 0.0))
        throw std::invalid_argument("FlowParams: dt, t_max, stationarity_tol must be positive");
    if (record_every == 0)
        throw std::invalid_argument("FlowParams: record_every must be >= 1");
    if (scheme == Scheme::jko && !(jko_tau > 0.0))
        throw std::invalid_argument("FlowParams: jko_tau must be positive");
    if (!(lambda < 0.0))
        throw std::invalid_argument("FlowParams: lambda must be negative");
}

namespace {

// x / (e^x - 1), the exponential-fitting flux weight.
double bern(double x) {
    if (std::abs(x) < 1e-5) return 1.0 - 0.5 * x + x * x / 12.0;
    return x / std::expm1(x);
}

template <class F>
double pair_sum(std::size_t n, F&& term) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n / 2; ++i) acc += term(i) + term(n - 1 - i);
    return acc;
}

struct FpWork {
    std::size_t n = 0;
    double dz = 0.0, kappa = 0.0;
    std::vector<double> z, psi_c;
    std::vector<double> u, bp, bm;
    std::vector<double> sub, dia, sup, cp, dp, x1, x2;
    std::vector<double> ra, rd, rs, rr;  // reversed system
    std::vector<double> flux, out;

    FpWork(const PotentialSpec& spec, const Grid& grid) {
        n = grid.n;
        dz = grid.dz;
        kappa = 1.0 / (dz * dz);
        z.resize(n);
        psi_c.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            z[i] = grid.center(i);
            psi_c[i] = spec.psi(z[i]);
        }
        u.resize(n);
        bp.assign(n - 1, 0.0);
        bm.assign(n - 1, 0.0);
        sub.assign(n, 0.0);
        dia.assign(n, 0.0);
        sup.assign(n, 0.0);
        cp.resize(n);
        dp.resize(n);
        x1.resize(n);
        x2.resize(n);
        ra.resize(n);
        rd.resize(n);
        rs.resize(n);
        rr.resize(n);
        flux.assign(n - 1, 0.0);
        out.resize(n);
    }
};

void thomas(const std::vector<double>& sub, const std::vector<double>& dia,
            const std::vector<double>& sup, const std::vector<double>& rhs,
            std::vector<double>& cp, std::vector<double>& dp, std::vector<double>& x) {
    std::size_t n = dia.size();
    cp[0] = sup[0] / dia[0];
    dp[0] = rhs[0] / dia[0];
    for (std::size_t i = 1; i < n; ++i) {
        double m = dia[i] - sub[i] * cp[i - 1];
        cp[i] = sup[i] / m;
        dp[i] = (rhs[i] - sub[i] * dp[i - 1]) / m;
    }
    x[n - 1] = dp[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) x[i] = dp[i] - cp[i] * x[i + 1];
}

// One implicit exponential-fitting step in place. The tridiagonal solve is
// averaged with the solve of the index-reversed system, which makes the step
// exactly equivariant under reflection (and exactly symmetry-preserving).
// Mass moves only through interface fluxes re-applied in conservation form.
void fp_step_into(FpWork& w, const PotentialSpec& spec, std::vector<double>& p,
                  double dt, bool allow_retry) {
    const std::size_t n = w.n;
    const double m = pair_sum(n, [&](std::size_t i) { return p[i] * w.z[i]; });
    const double c = spec.j * m;
    for (std::size_t i = 0; i < n; ++i) w.u[i] = w.psi_c[i] - c * w.z[i];
    for (std::size_t i = 0; i + 1 < n; ++i) {
        double du = w.u[i + 1] - w.u[i];
        w.bp[i] = bern(du);
        w.bm[i] = bern(-du);
    }
    const double a = dt * w.kappa;
    for (std::size_t i = 0; i < n; ++i) {
        // Sum the two face terms first: under reflection they swap, and a
        // commutative pair sum keeps dia exactly mirror-symmetric.
        double right = 0.0, left = 0.0;
        if (i + 1 < n) {
            right = a * w.bp[i];
            w.sup[i] = -(a * w.bm[i]);
        } else {
            w.sup[i] = 0.0;
        }
        if (i > 0) {
            left = a * w.bm[i - 1];
            w.sub[i] = -(a * w.bp[i - 1]);
        } else {
            w.sub[i] = 0.0;
        }
        w.dia[i] = 1.0 + (right + left);
    }
    thomas(w.sub, w.dia, w.sup, p, w.cp, w.dp, w.x1);
    for (std::size_t i = 0; i < n; ++i) {
        w.ra[i] = w.sup[n - 1 - i];
        w.rd[i] = w.dia[n - 1 - i];
        w.rs[i] = w.sub[n - 1 - i];
        w.rr[i] = p[n - 1 - i];
    }
    thomas(w.ra, w.rd, w.rs, w.rr, w.cp, w.dp, w.x2);
    for (std::size_t i = 0; i < n; ++i) w.x1[i] = 0.5 * (w.x1[i] + w.x2[n - 1 - i]);

    for (std::size_t i = 0; i + 1 < n; ++i)
        w.flux[i] = w.kappa * (w.bp[i] * w.x1[i] - w.bm[i] * w.x1[i + 1]);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double in = (i > 0 ? w.flux[i - 1] : 0.0) - (i + 1 < n ? w.flux[i] : 0.0);
        w.out[i] = p[i] + dt * in;
        worst = std::min(worst, w.out[i]);
    }
    if (worst < -1e-14) {
        if (!allow_retry)
            throw std::runtime_error("fp_step: negativity persists after halving dt");
        fp_step_into(w, spec, p, 0.5 * dt, false);
        fp_step_into(w, spec, p, 0.5 * dt, false);
        return;
    }
    for (std::size_t i = 0; i < n; ++i) p[i] = w.out[i] < 0.0 ? 0.0 : w.out[i];
}

}  // namespace

GridMeasure fp_step(const PotentialSpec& spec, const GridMeasure& mu, double dt) {
    if (!(dt > 0.0)) throw std::invalid_argument("fp_step: dt must be positive");
    FpWork w(spec, mu.grid);
    std::vector<double> p = mu.p;
    fp_step_into(w, spec, p, dt, true);
    return GridMeasure{mu.grid, std::move(p)};
}

std::vector<double> quantiles_from_grid(const GridMeasure& mu, std::size_t K) {
    if (K == 0) throw std::invalid_argument("quantiles_from_grid: K must be positive");
    const std::size_t n = mu.grid.n;
    std::vector<double> cum(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) cum[i + 1] = cum[i] + mu.p[i];
    std::vector<double> q(K);
    std::size_t i = 0;
    for (std::size_t k = 0; k < K; ++k) {
        double level = (double(k) + 0.5) / double(K) * cum[n];
        while (i + 1 < n && cum[i + 1] < level) ++i;
        double pi = mu.p[i];
        double frac = pi > 0.0 ? std::clamp((level - cum[i]) / pi, 0.0, 1.0) : 0.5;
        q[k] = mu.grid.left_edge(i) + frac * mu.grid.dz;
    }
    return q;
}

GridMeasure rebin_quantiles(const Grid& grid, const std::vector<double>& q) {
    const std::size_t K = q.size();
    if (K < 2) throw std::invalid_argument("rebin_quantiles: need at least 2 atoms");
    std::vector<double> w(grid.n, 0.0);
    auto deposit_range = [&](double a, double b, double mass) {
        a = std::max(a, -grid.L);
        b = std::min(b, grid.L);
        if (!(b > a)) return;
        double inv = mass / (b - a);
        auto ia = std::size_t(std::clamp(std::floor((a + grid.L) / grid.dz), 0.0,
                                         double(grid.n - 1)));
        auto ib = std::size_t(std::clamp(std::floor((b + grid.L) / grid.dz), 0.0,
                                         double(grid.n - 1)));
        for (std::size_t i = ia; i <= ib; ++i) {
            double lo = std::max(a, grid.left_edge(i));
            double hi = std::min(b, grid.left_edge(i) + grid.dz);
            if (hi > lo) w[i] += inv * (hi - lo);
        }
    };
    auto deposit_point = [&](double x, double mass) {
        double cx = std::clamp(x, -grid.L, grid.L);
        auto i = std::size_t(std::min(double(grid.n - 1),
                                      std::floor((cx + grid.L) / grid.dz)));
        w[i] += mass;
    };
    const double unit = 1.0 / double(K);
    for (std::size_t k = 0; k < K; ++k) {
        double a = k == 0 ? 2.0 * q[0] - 0.5 * (q[0] + q[1])
                          : 0.5 * (q[k - 1] + q[k]);
        double b = k + 1 == K ? 2.0 * q[K - 1] - 0.5 * (q[K - 2] + q[K - 1])
                              : 0.5 * (q[k] + q[k + 1]);
        if (b > a)
            deposit_range(a, b, unit);
        else
            deposit_point(q[k], unit);
    }
    return normalized(grid, std::move(w));
}

namespace {

constexpr double kGapMin = 1e-12;

// L2 projection onto nondecreasing vectors (pool adjacent violators).
void isotone(std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<double> sum(n);
    std::vector<std::size_t> cnt(n);
    std::size_t top = 0;
    for (std::size_t i = 0; i < n; ++i) {
        sum[top] = v[i];
        cnt[top] = 1;
        ++top;
        while (top > 1 &&
               sum[top - 2] * double(cnt[top - 1]) >= sum[top - 1] * double(cnt[top - 2])) {
            sum[top - 2] += sum[top - 1];
            cnt[top - 2] += cnt[top - 1];
            --top;
        }
    }
    std::size_t i = 0;
    for (std::size_t b = 0; b < top; ++b) {
        double avg = sum[b] / double(cnt[b]);
        for (std::size_t k = 0; k < cnt[b]; ++k) v[i++] = avg;
    }
}

// Projection onto {x : x_{k+1} - x_k >= kGapMin}.
void project_gaps(std::vector<double>& x) {
    for (std::size_t k = 0; k < x.size(); ++k) x[k] -= double(k) * kGapMin;
    isotone(x);
    for (std::size_t k = 0; k < x.size(); ++k) x[k] += double(k) * kGapMin;
}

struct JkoObjective {
    const PotentialSpec& spec;
    const std::vector<double>& y;
    double tau;

    // K times the free energy plus movement penalty; gradients on the same
    // scale, so the stationarity test reads the physical optimality residual.
    double value(const std::vector<double>& x) const {
        const std::size_t K = x.size();
        double pot = 0.0, s = 0.0, ent = 0.0, move = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            pot += spec.psi(x[k]);
            s += x[k];
            double d = x[k] - y[k];
            move += d * d;
        }
        double m = s / double(K);
        for (std::size_t k = 0; k + 1 < K; ++k)
            ent -= std::log(double(K) * (x[k + 1] - x[k]));
        return pot - 0.5 * spec.j * m * m * double(K) + ent + move / (2.0 * tau);
    }

    double energy(const std::vector<double>& x) const {
        const std::size_t K = x.size();
        double pot = 0.0, s = 0.0, ent = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            pot += spec.psi(x[k]);
            s += x[k];
        }
        double m = s / double(K);
        for (std::size_t k = 0; k + 1 < K; ++k)
            ent -= std::log(double(K) * (x[k + 1] - x[k]));
        return (pot + ent) / double(K) - 0.5 * spec.j * m * m;
    }

    void grad(const std::vector<double>& x, std::vector<double>& g) const {
        const std::size_t K = x.size();
        double s = 0.0;
        for (double v : x) s += v;
        double jm = spec.j * (s / double(K));
        for (std::size_t k = 0; k < K; ++k)
            g[k] = spec.dpsi(x[k]) - jm + (x[k] - y[k]) / tau;
        for (std::size_t k = 0; k + 1 < K; ++k) {
            double inv = 1.0 / (x[k + 1] - x[k]);
            g[k] += inv;
            g[k + 1] -= inv;
        }
    }
};

// Damped Newton on the quantile objective. The Hessian is a symmetric
// tridiagonal matrix (local terms plus gap-barrier couplings) minus the
// rank-one (j/K) 1 1^T from the mean-field energy, so each direction costs
// two Thomas solves and a Sherman-Morrison correction. A fraction-to-boundary
// limit keeps every gap positive, which is why no projection is needed after
// the initial point; a projected-gradient step is kept as a safeguard.
std::vector<double> jko_minimize(const PotentialSpec& spec, const std::vector<double>& y,
                                 double tau) {
    const std::size_t K = y.size();
    JkoObjective obj{spec, y, tau};
    std::vector<double> x = y;
    project_gaps(x);
    std::vector<double> g(K), d(K), trial(K), probe(K);
    std::vector<double> sub(K), dia(K), sup(K), cp(K), dp(K), ta(K), tb(K);
    const std::vector<double> ones(K, 1.0);
    obj.grad(x, g);
    double fx = obj.value(x);
    const double beta = tau;  // fixed probe scale for the stationarity residual
    const double ju = spec.j / double(K);
    const std::size_t cap = 10000;
    for (std::size_t it = 0; it < cap; ++it) {
        probe = x;
        for (std::size_t k = 0; k < K; ++k) probe[k] -= beta * g[k];
        project_gaps(probe);
        double res = 0.0;
        for (std::size_t k = 0; k < K; ++k)
            res = std::max(res, std::abs(x[k] - probe[k]) / beta);
        if (res <= 1e-8) return x;

        for (std::size_t k = 0; k < K; ++k) {
            dia[k] = spec.ddpsi(x[k]) + 1.0 / tau;
            sub[k] = sup[k] = 0.0;
        }
        for (std::size_t k = 0; k + 1 < K; ++k) {
            double gap = x[k + 1] - x[k];
            double w = 1.0 / (gap * gap);
            dia[k] += w;
            dia[k + 1] += w;
            sup[k] -= w;
            sub[k + 1] -= w;
        }
        thomas(sub, dia, sup, g, cp, dp, ta);
        thomas(sub, dia, sup, ones, cp, dp, tb);
        double sa = 0.0, sb = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            sa += ta[k];
            sb += tb[k];
        }
        double denom = 1.0 - ju * sb;
        bool newton_ok = denom > 1e-12;
        double gd = 0.0;
        if (newton_ok) {
            double coef = ju * sa / denom;
            for (std::size_t k = 0; k < K; ++k) d[k] = -(ta[k] + coef * tb[k]);
            for (std::size_t k = 0; k < K; ++k) gd += g[k] * d[k];
            newton_ok = gd < 0.0;
        }

        bool accepted = false;
        if (newton_ok) {
            double t = 1.0;
            for (std::size_t k = 0; k + 1 < K; ++k) {
                double dgap = d[k + 1] - d[k];
                if (dgap < 0.0) t = std::min(t, -0.99 * (x[k + 1] - x[k]) / dgap);
            }
            if (res <= 1e-4) {
                // Quadratic basin: the per-step energy decrease sits below the
                // machine resolution of the objective, so a monotonicity test
                // would deadlock. The full Newton step converges on the
                // gradient, which is still computed accurately.
                for (std::size_t k = 0; k < K; ++k) x[k] += t * d[k];
                fx = obj.value(x);
                accepted = true;
            }
            for (int back = 0; back <= 60 && !accepted; ++back) {
                for (std::size_t k = 0; k < K; ++k) trial[k] = x[k] + t * d[k];
                double fnew = obj.value(trial);
                if (fnew <= fx + 1e-4 * t * gd) {
                    x.swap(trial);
                    fx = fnew;
                    accepted = true;
                }
                t *= 0.5;
            }
        }
        if (!accepted) {
            double alpha = tau;
            for (int back = 0; back <= 60; ++back) {
                trial = x;
                for (std::size_t k = 0; k < K; ++k) trial[k] -= alpha * g[k];
                project_gaps(trial);
                double decrease = 0.0;
                for (std::size_t k = 0; k < K; ++k) decrease += g[k] * (x[k] - trial[k]);
                double fnew = obj.value(trial);
                if (fnew <= fx - 1e-4 * decrease) {
                    x.swap(trial);
                    fx = fnew;
                    break;
                }
                alpha *= 0.5;
            }
        }
        obj.grad(x, g);
    }
    throw std::runtime_error("jko_step: inner optimizer hit the iteration cap");
}

double jko_energy(const PotentialSpec& spec, const std::vector<double>& x) {
    JkoObjective obj{spec, x, 1.0};
    return obj.energy(x);
}

}  // namespace

std::vector<double> jko_quantile_step(const PotentialSpec& spec,
                                      const std::vector<double>& q_prev, double tau) {
    if (!(tau > 0.0)) throw std::invalid_argument("jko_quantile_step: tau must be positive");
    if (q_prev.size() < 2) throw std::invalid_argument("jko_quantile_step: need >= 2 atoms");
    return jko_minimize(spec, q_prev, tau);
}

GridMeasure jko_step(const PotentialSpec& spec, const GridMeasure& mu, double tau,
                     std::size_t n_atoms) {
    if (!(tau > 0.0)) throw std::invalid_argument("jko_step: tau must be positive");
    std::size_t K = n_atoms ? n_atoms : mu.grid.n;
    std::vector<double> y = quantiles_from_grid(mu, K);
    return rebin_quantiles(mu.grid, jko_minimize(spec, y, tau));
}

namespace {

FlowState make_state(const PotentialSpec& spec, const Grid& grid, double t,
                     const std::vector<double>& p) {
    FlowState st;
    st.t = t;
    st.measure = GridMeasure{grid, p};
    st.energy = free_energy(spec, st.measure);
    st.slope_sq = metric_slope_sq(spec, st.measure);
    st.mean = mean(st.measure);
    return st;
}

FlowTrajectory evolve_fp(const PotentialSpec& spec, const GridMeasure& mu0,
                         const FlowParams& params) {
    FlowTrajectory traj;
    FpWork w(spec, mu0.grid);
    std::vector<double> p = mu0.p;
    traj.records.push_back(make_state(spec, mu0.grid, 0.0, p));
    const auto max_steps =
        std::size_t(std::ceil(params.t_max / params.dt - 1e-9));
    for (std::size_t step = 1; step <= max_steps; ++step) {
        fp_step_into(w, spec, p, params.dt, true);
        if (step % params.record_every == 0 || step == max_steps) {
            double t = double(step) * params.dt;
            traj.records.push_back(make_state(spec, mu0.grid, t, p));
            const FlowState& a = traj.records[traj.records.size() - 2];
            const FlowState& b = traj.records.back();
            double w2 = wasserstein2(a.measure, b.measure);
            traj.speed.push_back(w2 / (b.t - a.t));
            if (b.slope_sq < params.stationarity_tol &&
                w2 < params.stationarity_tol * params.dt) {
                traj.status = FlowStatus::stationary;
                return traj;
            }
        }
    }
    traj.status = FlowStatus::timeout;
    return traj;
}

FlowTrajectory evolve_jko(const PotentialSpec& spec, const GridMeasure& mu0,
                          const FlowParams& params) {
    FlowTrajectory traj;
    const std::size_t K = mu0.grid.n;
    std::vector<double> x = quantiles_from_grid(mu0, K);
    // The recorded energy is the quantile-coordinate free energy, the quantity
    // the minimizing movement decreases monotonically; measures are rebinned
    // for everything metric.
    FlowState st0 = make_state(spec, mu0.grid, 0.0, mu0.p);
    st0.energy = jko_energy(spec, x);
    traj.records.push_back(std::move(st0));
    const auto max_steps =
        std::size_t(std::ceil(params.t_max / params.jko_tau - 1e-9));
    for (std::size_t step = 1; step <= max_steps; ++step) {
        x = jko_minimize(spec, x, params.jko_tau);
        if (step % params.record_every == 0 || step == max_steps) {
            double t = double(step) * params.jko_tau;
            GridMeasure re = rebin_quantiles(mu0.grid, x);
            FlowState st = make_state(spec, mu0.grid, t, re.p);
            st.energy = jko_energy(spec, x);
            traj.records.push_back(std::move(st));
            const FlowState& a = traj.records[traj.records.size() - 2];
            const FlowState& b = traj.records.back();
            double w2 = wasserstein2(a.measure, b.measure);
            traj.speed.push_back(w2 / (b.t - a.t));
            if (b.slope_sq < params.stationarity_tol &&
                w2 < params.stationarity_tol * params.jko_tau) {
                traj.status = FlowStatus::stationary;
                return traj;
            }
        }
    }
    traj.status = FlowStatus::timeout;
    return traj;
}

}  // namespace

FlowTrajectory evolve(const PotentialSpec& spec, const GridMeasure& mu0,
                      const FlowParams& params) {
    params.validate();
    return params.scheme == Scheme::fokker_planck ? evolve_fp(spec, mu0, params)
                                                  : evolve_jko(spec, mu0, params);
}

double check_energy_identity(const PotentialSpec& spec, const FlowTrajectory& traj) {
    (void)spec;
    const auto& r = traj.records;
    if (r.size() < 3)
        throw std::invalid_argument("check_energy_identity: need >= 3 records");
    if (!std::isfinite(r.front().energy))
        throw std::invalid_argument("check_energy_identity: initial energy not finite");
    double islope = 0.0, ispeed = 0.0;
    for (std::size_t k = 0; k + 1 < r.size(); ++k) {
        double h = r[k + 1].t - r[k].t;
        islope += 0.5 * (r[k].slope_sq + r[k + 1].slope_sq) * h;
        ispeed += traj.speed[k] * traj.speed[k] * h;
    }
    double num = r.back().energy - r.front().energy + 0.5 * (islope + ispeed);
    return std::abs(num) / (std::abs(r.front().energy) + 1.0);
}

double lambda_bound(const PotentialSpec& spec, const AssumptionReport& report) {
    if (report.clauses.empty())
        throw std::invalid_argument("lambda_bound: assumption report required");
    return std::min(0.0, report.inf_ddpsi) - spec.j;
}

namespace {

std::vector<double> run_fp_steps(const PotentialSpec& spec, const Grid& grid,
                                 std::vector<double> p, std::size_t steps, double dt) {
    FpWork w(spec, grid);
    for (std::size_t s = 0; s < steps; ++s) fp_step_into(w, spec, p, dt, true);
    return p;
}

}  // namespace

double check_regularization(const PotentialSpec& spec, const GridMeasure& mu,
                            const GridMeasure& nu, double t, const FlowParams& params) {
    if (!(t > 0.0)) throw std::invalid_argument("check_regularization: t must be positive");
    params.validate();
    auto steps = std::size_t(std::max<long long>(1, std::llround(t / params.dt)));
    GridMeasure end{mu.grid, run_fp_steps(spec, mu.grid, mu.p, steps, params.dt)};
    double ft = free_energy(spec, end);
    double w2 = wasserstein2(mu, nu);
    double coef = params.lambda / (2.0 * std::expm1(params.lambda * t));
    return ft - (free_energy(spec, nu) + coef * w2 * w2);
}

double check_semigroup(const PotentialSpec& spec, const GridMeasure& mu,
                       double h, double t, const FlowParams& params) {
    if (!(h > 0.0) || t < 0.0)
        throw std::invalid_argument("check_semigroup: need h > 0 and t >= 0");
    params.validate();
    auto round_steps = [&](double dur) {
        return std::size_t(std::max<long long>(0, std::llround(dur / params.dt)));
    };
    auto direct = run_fp_steps(spec, mu.grid, mu.p, round_steps(t + h), params.dt);
    auto stage = run_fp_steps(spec, mu.grid, mu.p, round_steps(h), params.dt);
    auto chained = run_fp_steps(spec, mu.grid, std::move(stage), round_steps(t), params.dt);
    return wasserstein2(GridMeasure{mu.grid, std::move(direct)},
                        GridMeasure{mu.grid, std::move(chained)});
}

}
