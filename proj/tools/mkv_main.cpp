// mkv: drive the free-energy flow laboratory from a JSON config and emit
// CSV / MKV1 / JSON artifacts plus a manifest into an output directory.
//
// Exit codes: 0 success, 1 computation failure (or a failed assumption audit
// under `check`), 2 configuration error. Failures also print a one-line JSON
// object to stderr.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "mkv/ergodicity.hpp"
#include "mkv/flow.hpp"
#include "mkv/io.hpp"
#include "mkv/measure.hpp"
#include "mkv/particles.hpp"
#include "mkv/potential.hpp"
#include "mkv/threads.hpp"
#include "mkv/tilt.hpp"
#include "mkv/version.hpp"

using nlohmann::json;

namespace {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

[[noreturn]] void cfg_fail(const std::string& where, const std::string& msg) {
    throw ConfigError(where + ": " + msg);
}

void reject_unknown(const json& obj, const std::string& where,
                    std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) cfg_fail(where, "expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool known = false;
        for (const char* a : allowed)
            if (it.key() == a) {
                known = true;
                break;
            }
        if (!known) cfg_fail(where, "unknown key '" + it.key() + "'");
    }
}

double need_num(const json& obj, const std::string& where, const char* key) {
    if (!obj.contains(key)) cfg_fail(where, std::string("missing '") + key + "'");
    const json& v = obj.at(key);
    if (!v.is_number()) cfg_fail(where, std::string("'") + key + "' must be a number");
    return v.get<double>();
}

double num_or(const json& obj, const std::string& where, const char* key, double def) {
    if (!obj.contains(key)) return def;
    const json& v = obj.at(key);
    if (!v.is_number()) cfg_fail(where, std::string("'") + key + "' must be a number");
    return v.get<double>();
}

std::size_t size_or(const json& obj, const std::string& where, const char* key,
                    std::size_t def) {
    if (!obj.contains(key)) return def;
    const json& v = obj.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0)
        cfg_fail(where, std::string("'") + key + "' must be a nonnegative integer");
    return static_cast<std::size_t>(v.get<long long>());
}

std::string need_str(const json& obj, const std::string& where, const char* key) {
    if (!obj.contains(key)) cfg_fail(where, std::string("missing '") + key + "'");
    const json& v = obj.at(key);
    if (!v.is_string()) cfg_fail(where, std::string("'") + key + "' must be a string");
    return v.get<std::string>();
}

std::string str_or(const json& obj, const std::string& where, const char* key,
                   const std::string& def) {
    if (!obj.contains(key)) return def;
    const json& v = obj.at(key);
    if (!v.is_string()) cfg_fail(where, std::string("'") + key + "' must be a string");
    return v.get<std::string>();
}

std::string fnv_hex(const std::string& bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char out[17];
    std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
    return out;
}

json load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) cfg_fail("config", "cannot open " + path);
    json cfg;
    try {
        cfg = json::parse(is);
    } catch (const json::exception& e) {
        cfg_fail("config", std::string("parse error in ") + path + ": " + e.what());
    }
    return cfg;
}

struct Lab {
    mkv::PotentialSpec spec;
    mkv::Grid grid;
    mkv::FlowParams params;
    mkv::AssumptionReport report;
    std::size_t check_samples = 4097;
    double check_tol = 1e-9;
    json cfg;
};

Lab build_lab(json cfg) {
    Lab lab;
    reject_unknown(cfg, "config",
                   {"potential", "j", "grid", "flow", "init", "seed", "check", "hbar",
                    "classify", "basin_sweep", "particles"});

    double j = need_num(cfg, "config", "j");
    if (!(j > 0.0)) cfg_fail("config", "'j' must be positive");

    if (!cfg.contains("grid")) cfg_fail("config", "missing 'grid'");
    const json& g = cfg.at("grid");
    reject_unknown(g, "grid", {"n", "L"});
    double L = need_num(g, "grid", "L");
    std::size_t n = size_or(g, "grid", "n", 0);
    if (n == 0) cfg_fail("grid", "missing 'n'");
    lab.grid = mkv::Grid(n, L);

    if (!cfg.contains("potential")) cfg_fail("config", "missing 'potential'");
    const json& p = cfg.at("potential");
    std::string family = need_str(p, "potential", "family");
    if (family == "quartic") {
        reject_unknown(p, "potential", {"family", "a", "b"});
        double a = num_or(p, "potential", "a", 0.25);
        double b = num_or(p, "potential", "b", -0.5);
        lab.spec = mkv::make_quartic(a, b, j, L);
    } else if (family == "quadratic") {
        reject_unknown(p, "potential", {"family", "q"});
        double q = num_or(p, "potential", "q", 0.5);
        lab.spec = mkv::make_quadratic(q, j, L);
    } else {
        cfg_fail("potential", "unknown family '" + family + "'");
    }

    if (cfg.contains("check")) {
        const json& c = cfg.at("check");
        reject_unknown(c, "check", {"n_samples", "tol"});
        lab.check_samples = size_or(c, "check", "n_samples", 4097);
        lab.check_tol = num_or(c, "check", "tol", 1e-9);
    }
    lab.report = mkv::check_assumptions(lab.spec, lab.check_samples, lab.check_tol);

    json f = cfg.value("flow", json::object());
    reject_unknown(f, "flow",
                   {"dt", "t_max", "stationarity_tol", "record_every", "scheme", "jko_tau"});
    lab.params.dt = num_or(f, "flow", "dt", 1e-3);
    lab.params.t_max = num_or(f, "flow", "t_max", 200.0);
    lab.params.stationarity_tol = num_or(f, "flow", "stationarity_tol", 5e-7);
    lab.params.record_every = size_or(f, "flow", "record_every", 100);
    lab.params.jko_tau = num_or(f, "flow", "jko_tau", 0.02);
    std::string scheme = str_or(f, "flow", "scheme", "fokker_planck");
    if (scheme == "fokker_planck")
        lab.params.scheme = mkv::Scheme::fokker_planck;
    else if (scheme == "jko")
        lab.params.scheme = mkv::Scheme::jko;
    else
        cfg_fail("flow", "unknown scheme '" + scheme + "'");
    lab.params.lambda = mkv::lambda_bound(lab.spec, lab.report);
    lab.params.validate();

    lab.cfg = std::move(cfg);
    return lab;
}

mkv::GridMeasure build_init(const Lab& lab) {
    if (!lab.cfg.contains("init"))
        cfg_fail("config", "this command needs an 'init' section");
    const json& ic = lab.cfg.at("init");
    std::string kind = need_str(ic, "init", "kind");
    if (kind == "gaussian") {
        reject_unknown(ic, "init", {"kind", "mean", "var"});
        return mkv::gaussian_init(lab.grid, need_num(ic, "init", "mean"),
                                  need_num(ic, "init", "var"));
    }
    if (kind == "tilted") {
        reject_unknown(ic, "init", {"kind", "sigma"});
        return mkv::tilted_measure(lab.spec, need_num(ic, "init", "sigma"), lab.grid);
    }
    if (kind == "tilted_mean") {
        reject_unknown(ic, "init", {"kind", "mean"});
        double m = need_num(ic, "init", "mean");
        return mkv::tilted_measure(lab.spec, mkv::legendre(lab.spec, m).dphi, lab.grid);
    }
    if (kind == "mixture") {
        reject_unknown(ic, "init", {"kind", "components"});
        if (!ic.contains("components") || !ic.at("components").is_array() ||
            ic.at("components").empty())
            cfg_fail("init", "'components' must be a nonempty array");
        std::vector<double> w(lab.grid.n, 0.0);
        for (const json& comp : ic.at("components")) {
            reject_unknown(comp, "init.components", {"weight", "mean", "var"});
            double weight = need_num(comp, "init.components", "weight");
            if (!(weight > 0.0)) cfg_fail("init.components", "'weight' must be positive");
            mkv::GridMeasure part =
                mkv::gaussian_init(lab.grid, need_num(comp, "init.components", "mean"),
                                   need_num(comp, "init.components", "var"));
            for (std::size_t i = 0; i < w.size(); ++i) w[i] += weight * part.p[i];
        }
        return mkv::normalized(lab.grid, std::move(w));
    }
    if (kind == "uniform") {
        reject_unknown(ic, "init", {"kind"});
        return mkv::normalized(lab.grid, std::vector<double>(lab.grid.n, 1.0));
    }
    if (kind == "mkv1") {
        reject_unknown(ic, "init", {"kind", "path"});
        mkv::GridMeasure mu = mkv::read_mkv1(need_str(ic, "init", "path"));
        if (!(mu.grid == lab.grid))
            cfg_fail("init", "measure grid does not match the configured grid");
        return mu;
    }
    cfg_fail("init", "unknown kind '" + kind + "'");
}

class Emitter {
  public:
    explicit Emitter(const std::string& dir) : dir_(dir) {
        std::filesystem::create_directories(dir_);
    }

    std::string path(const std::string& name) const { return (dir_ / name).string(); }

    void note(const std::string& name) { hashes_[name] = mkv::file_hash_hex(path(name)); }

    void write_json(const std::string& name, const json& j) {
        std::ofstream os(path(name), std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open for writing: " + path(name));
        os << j.dump(2) << '\n';
        os.flush();
        if (!os) throw std::runtime_error("write failed: " + path(name));
        note(name);
    }

    void write_measure(const std::string& stem, const mkv::GridMeasure& mu) {
        mkv::write_mkv1(path(stem + ".mkv1"), mu);
        note(stem + ".mkv1");
        mkv::write_measure_csv(path(stem + ".csv"), mu);
        note(stem + ".csv");
    }

    void write_trajectory(const std::string& name, const mkv::FlowTrajectory& traj,
                          const mkv::StationaryTriple& triple) {
        mkv::write_trajectory_csv(path(name), traj, triple.mu_minus, triple.mu_zero,
                                  triple.mu_plus);
        note(name);
    }

    std::ofstream open_csv(const std::string& name) {
        std::ofstream os(path(name), std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open for writing: " + path(name));
        return os;
    }

    json files_json() const {
        json out = json::object();
        for (const auto& [name, hash] : hashes_) out[name] = hash;
        return out;
    }

  private:
    std::filesystem::path dir_;
    std::map<std::string, std::string> hashes_;
};

const char* status_name(mkv::FlowStatus s) {
    return s == mkv::FlowStatus::stationary ? "stationary" : "timeout";
}

json classification_json(const mkv::ClassificationResult& r) {
    return json{{"label", mkv::label_name(r.label)}, {"w2_minus", r.w2_minus},
                {"w2_zero", r.w2_zero},             {"w2_plus", r.w2_plus},
                {"f_final", r.f_final},             {"t_final", r.t_final},
                {"reason", r.reason}};
}

int run_check(const Lab& lab, Emitter& em) {
    json clauses = json::array();
    for (const mkv::ClauseResult& c : lab.report.clauses) {
        clauses.push_back(json{{"name", c.name},
                               {"pass", c.pass},
                               {"margin", c.margin},
                               {"detail", c.detail}});
        std::printf("clause %-16s %s  margin=%.3g%s%s\n", c.name.c_str(),
                    c.pass ? "pass" : "FAIL", c.margin, c.detail.empty() ? "" : "  ",
                    c.detail.c_str());
    }
    em.write_json("check.json",
                  json{{"n_samples", lab.report.n_samples},
                       {"base_variance", lab.report.base_variance},
                       {"inf_ddpsi", lab.report.inf_ddpsi},
                       {"tail_ratio", lab.report.tail_ratio},
                       {"lambda", lab.params.lambda},
                       {"all_pass", lab.report.all_pass()},
                       {"clauses", clauses}});
    return lab.report.all_pass() ? 0 : 1;
}

int run_stationary(const Lab& lab, Emitter& em) {
    mkv::StationaryTriple triple = mkv::stationary_triple(lab.spec, lab.grid);
    em.write_measure("mu_minus", triple.mu_minus);
    em.write_measure("mu_zero", triple.mu_zero);
    em.write_measure("mu_plus", triple.mu_plus);
    em.write_json("stationary.json",
                  json{{"m_star", triple.m_star},
                       {"sigma_star", triple.sigma_star},
                       {"f_minus", triple.f_minus},
                       {"f_zero", triple.f_zero},
                       {"f_plus", triple.f_plus},
                       {"slope_sq_minus", mkv::metric_slope_sq(lab.spec, triple.mu_minus)},
                       {"slope_sq_zero", mkv::metric_slope_sq(lab.spec, triple.mu_zero)}});
    std::printf("m_star=%.12g  F(minus)=%.12g  F(zero)=%.12g\n", triple.m_star,
                triple.f_minus, triple.f_zero);
    return 0;
}

int run_hbar(const Lab& lab, Emitter& em) {
    json h = lab.cfg.value("hbar", json::object());
    reject_unknown(h, "hbar", {"m_min", "m_max", "count", "units"});
    double m_min = num_or(h, "hbar", "m_min", -1.5);
    double m_max = num_or(h, "hbar", "m_max", 1.5);
    std::size_t count = size_or(h, "hbar", "count", 121);
    std::string units = str_or(h, "hbar", "units", "mstar");
    if (count < 2) cfg_fail("hbar", "'count' must be at least 2");
    if (!(m_max > m_min)) cfg_fail("hbar", "'m_max' must exceed 'm_min'");

    mkv::CriticalPoints cp = mkv::critical_points(lab.spec);
    double scale = 1.0;
    if (units == "mstar") {
        if (cp.count < 3)
            throw std::runtime_error("hbar: units 'mstar' need a supercritical potential");
        scale = cp.m_star;
    } else if (units != "absolute") {
        cfg_fail("hbar", "unknown units '" + units + "'");
    }

    std::ofstream os = em.open_csv("hbar.csv");
    os << "m,hbar,sigma\n";
    double argmin = 0.0, minval = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        double frac = double(i) / double(count - 1);
        double m = scale * (m_min + frac * (m_max - m_min));
        mkv::LegendrePoint lp = mkv::legendre(lab.spec, m);
        double val = lp.phi - 0.5 * lab.spec.j * m * m;
        os << mkv::fmt17(m) << ',' << mkv::fmt17(val) << ',' << mkv::fmt17(lp.dphi) << '\n';
        if (i == 0 || val < minval) {
            minval = val;
            argmin = m;
        }
    }
    os.flush();
    if (!os) throw std::runtime_error("write failed: hbar.csv");
    em.note("hbar.csv");
    em.write_json("hbar.json", json{{"m_star", cp.m_star},
                                    {"critical_count", cp.count},
                                    {"argmin_m", argmin},
                                    {"min_hbar", minval}});
    std::printf("hbar table: %zu rows, min %.9g at m=%.9g (m_star=%.9g)\n", count, minval,
                argmin, cp.m_star);
    return 0;
}

int run_flow(const Lab& lab, const mkv::GridMeasure& mu0, Emitter& em) {
    mkv::FlowTrajectory traj = mkv::evolve(lab.spec, mu0, lab.params);
    mkv::StationaryTriple triple;
    try {
        triple = mkv::stationary_triple(lab.spec, lab.grid);
    } catch (const std::exception&) {
        // Subcritical: only the symmetric state exists; reuse it for all
        // three distance columns.
        mkv::GridMeasure zero = mkv::tilted_measure(lab.spec, 0.0, lab.grid);
        triple.mu_minus = zero;
        triple.mu_zero = zero;
        triple.mu_plus = zero;
    }
    em.write_trajectory("trajectory.csv", traj, triple);
    const mkv::FlowState& last = traj.records.back();
    em.write_measure("final", last.measure);
    em.write_json("flow.json", json{{"status", status_name(traj.status)},
                                    {"t_final", last.t},
                                    {"f_final", last.energy},
                                    {"slope_sq_final", last.slope_sq},
                                    {"mean_final", last.mean},
                                    {"records", traj.records.size()}});
    std::printf("flow: %s at t=%.6g, F=%.9g, slope^2=%.3g, mean=%.6g\n",
                status_name(traj.status), last.t, last.energy, last.slope_sq, last.mean);
    return 0;
}

mkv::ClassifyOptions classify_options(const Lab& lab) {
    json c = lab.cfg.value("classify", json::object());
    reject_unknown(c, "classify", {"match_tol", "energy_tol", "mean_tol"});
    mkv::ClassifyOptions opts;
    opts.match_tol = num_or(c, "classify", "match_tol", 1e-3);
    opts.energy_tol = num_or(c, "classify", "energy_tol", 1e-8);
    opts.mean_tol = num_or(c, "classify", "mean_tol", 1e-6);
    return opts;
}

int run_classify(const Lab& lab, const mkv::GridMeasure& mu0, Emitter& em) {
    mkv::StationaryTriple triple = mkv::stationary_triple(lab.spec, lab.grid);
    mkv::ClassificationResult r =
        mkv::classify(lab.spec, triple, mu0, lab.params, classify_options(lab));
    em.write_trajectory("trajectory.csv", r.trajectory, triple);
    em.write_measure("final", r.trajectory.records.back().measure);
    json out = classification_json(r);
    mkv::SmallBasinPrediction pred =
        mkv::small_basin_predict(lab.spec, triple, mu0, classify_options(lab));
    out["small_basin_applicable"] = pred.applicable;
    out["small_basin_predicted"] = mkv::label_name(pred.predicted);
    em.write_json("classify.json", out);
    std::printf("classify: %s (W2 to minus/zero/plus = %.3g / %.3g / %.3g)\n",
                mkv::label_name(r.label), r.w2_minus, r.w2_zero, r.w2_plus);
    return 0;
}

int run_basin_sweep(const Lab& lab, Emitter& em, int threads) {
    json b = lab.cfg.value("basin_sweep", json::object());
    reject_unknown(b, "basin_sweep", {"means", "vars"});
    auto parse_range = [&](const char* key, double lo, double hi, std::size_t cnt) {
        json r = b.value(key, json::object());
        std::string where = std::string("basin_sweep.") + key;
        reject_unknown(r, where, {"min", "max", "count"});
        double mn = num_or(r, where, "min", lo);
        double mx = num_or(r, where, "max", hi);
        std::size_t c = size_or(r, where, "count", cnt);
        if (c < 1) cfg_fail(where, "'count' must be positive");
        if (c > 1 && !(mx > mn)) cfg_fail(where, "'max' must exceed 'min'");
        std::vector<double> vals(c);
        for (std::size_t i = 0; i < c; ++i)
            vals[i] = c == 1 ? mn : mn + (mx - mn) * double(i) / double(c - 1);
        return vals;
    };
    std::vector<double> means = parse_range("means", -1.0, 1.0, 9);
    std::vector<double> vars = parse_range("vars", 0.2, 1.0, 5);

    std::vector<std::pair<double, double>> pairs;
    pairs.reserve(means.size() * vars.size());
    for (double m : means)
        for (double v : vars) pairs.emplace_back(m, v);

    mkv::StationaryTriple triple = mkv::stationary_triple(lab.spec, lab.grid);
    std::vector<mkv::SweepRow> rows =
        mkv::basin_sweep(lab.spec, triple, pairs, lab.params, threads);

    std::ofstream os = em.open_csv("basin.csv");
    os << "mean,var,label,w2_minus,w2_zero,w2_plus,f_final,t_final,reason\n";
    std::map<std::string, int> counts;
    for (const mkv::SweepRow& row : rows) {
        const mkv::ClassificationResult& r = row.result;
        std::string reason = r.reason;
        for (char& ch : reason)
            if (ch == ',') ch = ';';
        os << mkv::fmt17(row.mean) << ',' << mkv::fmt17(row.var) << ','
           << mkv::label_name(r.label) << ',' << mkv::fmt17(r.w2_minus) << ','
           << mkv::fmt17(r.w2_zero) << ',' << mkv::fmt17(r.w2_plus) << ','
           << mkv::fmt17(r.f_final) << ',' << mkv::fmt17(r.t_final) << ',' << reason << '\n';
        ++counts[mkv::label_name(r.label)];
    }
    os.flush();
    if (!os) throw std::runtime_error("write failed: basin.csv");
    em.note("basin.csv");

    json summary = json::object();
    for (const auto& [k, v] : counts) summary[k] = v;
    em.write_json("basin.json",
                  json{{"rows", rows.size()}, {"labels", summary}, {"threads", threads}});
    std::printf("basin sweep: %zu rows\n", rows.size());
    return 0;
}

int run_certificate(const Lab& lab, const mkv::GridMeasure& nu, Emitter& em) {
    mkv::StationaryTriple triple = mkv::stationary_triple(lab.spec, lab.grid);
    mkv::BasinCertificate cert = mkv::basin_certificate(lab.spec, triple, nu, lab.params);
    em.write_measure("anchor", cert.anchor);
    em.write_json("certificate.json", json{{"t_prime", cert.t_prime},
                                           {"delta", cert.delta},
                                           {"w2_at_t", cert.w2_at_t},
                                           {"energy_excess", cert.energy_excess},
                                           {"contraction", cert.contraction},
                                           {"big_delta", cert.big_delta},
                                           {"lambda", lab.params.lambda},
                                           {"m_star", triple.m_star}});
    std::printf("certificate: t'=%.6g, delta=%.6g\n", cert.t_prime, cert.delta);
    return 0;
}

int run_particles(const Lab& lab, const mkv::GridMeasure& mu0, Emitter& em, int threads) {
    json pc = lab.cfg.value("particles", json::object());
    reject_unknown(pc, "particles", {"n_list", "seeds", "t_end", "dt"});
    std::vector<std::size_t> n_list{100, 1000, 10000};
    if (pc.contains("n_list")) {
        const json& nl = pc.at("n_list");
        if (!nl.is_array() || nl.empty())
            cfg_fail("particles", "'n_list' must be a nonempty array");
        n_list.clear();
        for (const json& v : nl) {
            if (!v.is_number_integer() || v.get<long long>() < 2)
                cfg_fail("particles", "'n_list' entries must be integers >= 2");
            n_list.push_back(static_cast<std::size_t>(v.get<long long>()));
        }
    }
    std::vector<std::uint64_t> seeds;
    if (pc.contains("seeds")) {
        const json& sl = pc.at("seeds");
        if (!sl.is_array() || sl.empty())
            cfg_fail("particles", "'seeds' must be a nonempty array");
        for (const json& v : sl) {
            if (!v.is_number_integer() || v.get<long long>() < 0)
                cfg_fail("particles", "'seeds' entries must be nonnegative integers");
            seeds.push_back(static_cast<std::uint64_t>(v.get<long long>()));
        }
    } else if (lab.cfg.contains("seed")) {
        seeds.push_back(static_cast<std::uint64_t>(
            size_or(lab.cfg, "config", "seed", 0)));
    } else {
        cfg_fail("particles", "stochastic command needs 'seeds' (or a top-level 'seed')");
    }
    double t_end = num_or(pc, "particles", "t_end", 2.0);
    double dt = num_or(pc, "particles", "dt", 1e-3);

    std::vector<mkv::PropagationRow> rows =
        mkv::propagation_gap(lab.spec, mu0, n_list, t_end, dt, seeds, threads);

    std::ofstream os = em.open_csv("particles.csv");
    os << "n,seed,gap\n";
    for (const mkv::PropagationRow& row : rows)
        for (std::size_t k = 0; k < row.gaps.size(); ++k)
            os << row.n << ',' << seeds[k] << ',' << mkv::fmt17(row.gaps[k]) << '\n';
    os.flush();
    if (!os) throw std::runtime_error("write failed: particles.csv");
    em.note("particles.csv");

    std::ofstream sm = em.open_csv("particles_summary.csv");
    sm << "n,median_gap\n";
    for (const mkv::PropagationRow& row : rows)
        sm << row.n << ',' << mkv::fmt17(row.median_gap) << '\n';
    sm.flush();
    if (!sm) throw std::runtime_error("write failed: particles_summary.csv");
    em.note("particles_summary.csv");

    // Least-squares slope of log10(median gap) against log10(n).
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const mkv::PropagationRow& row : rows) {
        double x = std::log10(double(row.n)), y = std::log10(row.median_gap);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    double k = double(rows.size());
    double slope = (k * sxy - sx * sy) / (k * sxx - sx * sx);
    json medians = json::array();
    for (const mkv::PropagationRow& row : rows)
        medians.push_back(json{{"n", row.n}, {"median_gap", row.median_gap}});
    em.write_json("particles.json", json{{"loglog_slope", slope},
                                         {"t_end", t_end},
                                         {"dt", dt},
                                         {"seeds", seeds},
                                         {"medians", medians}});
    std::printf("particles: log-log slope %.3f over %zu ensemble sizes\n", slope,
                rows.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Free-energy flow laboratory for the 1-D McKean-Vlasov equation"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    int threads = 0;
    const std::pair<const char*, const char*> cmds[] = {
        {"check", "Audit the standing assumptions on the configured potential"},
        {"stationary", "Compute the stationary measures and their free energies"},
        {"hbar", "Tabulate the effective free energy over a range of means"},
        {"flow", "Integrate the flow from the configured initial condition"},
        {"classify", "Label the long-time limit of the configured initial condition"},
        {"basin-sweep", "Classify a grid of Gaussian initial conditions"},
        {"certificate", "Emit a basin-radius certificate for the configured anchor"},
        {"particles", "Measure the particle-system gap to the PDE state"},
    };
    for (const auto& [name, desc] : cmds) {
        CLI::App* sub = app.add_subcommand(name, desc);
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--out", out_dir, "Output directory")->required();
        sub->add_option("--threads", threads, "Worker threads (default 1, env MKV_THREADS)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << json{{"error", e.what()}, {"exit_code", 2}}.dump() << "\n";
        return 2;
    }
    std::string cmd = app.get_subcommands().front()->get_name();

    bool building = true;
    std::optional<Emitter> em;
    try {
        Lab lab = build_lab(load_config(config_path));
        std::optional<mkv::GridMeasure> mu0;
        if (cmd == "flow" || cmd == "classify" || cmd == "certificate" ||
            cmd == "particles")
            mu0 = build_init(lab);
        int nthreads = mkv::resolve_threads(threads);
        em.emplace(out_dir);
        building = false;

        auto t0 = std::chrono::steady_clock::now();
        int code = 0;
        if (cmd == "check")
            code = run_check(lab, *em);
        else if (cmd == "stationary")
            code = run_stationary(lab, *em);
        else if (cmd == "hbar")
            code = run_hbar(lab, *em);
        else if (cmd == "flow")
            code = run_flow(lab, *mu0, *em);
        else if (cmd == "classify")
            code = run_classify(lab, *mu0, *em);
        else if (cmd == "basin-sweep")
            code = run_basin_sweep(lab, *em, nthreads);
        else if (cmd == "certificate")
            code = run_certificate(lab, *mu0, *em);
        else if (cmd == "particles")
            code = run_particles(lab, *mu0, *em, nthreads);
        double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                          .count();

        json manifest{{"command", cmd},
                      {"version", mkv::version},
                      {"config", lab.cfg},
                      {"config_hash", fnv_hex(lab.cfg.dump())},
                      {"wall_time_seconds", wall},
                      {"files", em->files_json()}};
        std::ofstream os(em->path("manifest.json"), std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open manifest.json");
        os << manifest.dump(2) << '\n';
        return code;
    } catch (const ConfigError& e) {
        // Config problems can surface inside a runner (per-command sections
        // are parsed there); they are exit 2 regardless of phase.
        json err{{"error", e.what()}, {"exit_code", 2}};
        std::cerr << err.dump() << "\n";
        if (!building && em) {
            try {
                em->write_json("error.json", err);
            } catch (...) {
            }
        }
        return 2;
    } catch (const std::exception& e) {
        int ec = building ? 2 : 1;
        json err{{"error", e.what()}, {"exit_code", ec}};
        std::cerr << err.dump() << "\n";
        if (!building && em) {
            try {
                em->write_json("error.json", err);
            } catch (...) {
            }
        }
        return ec;
    }
}
