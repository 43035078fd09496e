#include "orbm/experiments.hpp"

#include "orbm/bandwidth.hpp"
#include "orbm/cone_geometry.hpp"
#include "orbm/ensemble.hpp"
#include "orbm/ergodic.hpp"
#include "orbm/generator.hpp"
#include "orbm/hitting.hpp"
#include "orbm/manifest.hpp"
#include "orbm/prelimit.hpp"
#include "orbm/report.hpp"
#include "orbm/sder.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>

namespace orbm {

const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"check-conditions", "simulate-orbm",      "exit-time",
                                                "survival-bound",   "hitting-uniqueness", "ergodic-demo",
                                                "prelimit",         "compare"};
    return names;
}

namespace {

constexpr const char* kExp = "experiment";

struct Context {
    const Config& cfg;
    std::string out;
    std::uint64_t seed = 1;
    int threads = 1;
    std::ostream& log;
    Manifest manifest;

    void write(const std::string& name, const std::function<void(std::ostream&)>& fn) {
        const auto path = std::filesystem::path(out) / name;
        std::ofstream os(path, std::ios::binary);
        if (!os) throw Error("cannot write " + path.string());
        fn(os);
        os.close();
        if (!os) throw Error("error while writing " + path.string());
        manifest.add_output(out, name);
    }
};

// ---- shared blocks ---------------------------------------------------------

ConeParams read_cone(const Config& c) {
    ConeParams p;
    p.d = static_cast<int>(c.get_long("model", "d").value_or(3));
    p.alpha = c.get_double("model", "alpha").value_or(2.0);
    p.mu = c.get_double("model", "mu").value_or(1.0);
    p.face_tol = c.get_double("model", "face_tol").value_or(p.face_tol);
    p.invert_tol = c.get_double("model", "invert_tol").value_or(p.invert_tol);
    p.vertex_tol = c.get_double("model", "vertex_tol").value_or(p.vertex_tol);
    try {
        p.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(c.origin() + ": [model]: " + e.what());
    }
    return p;
}

Vec read_drift(const Config& c, int d) {
    Vec b = c.get_vector("model", "b").value_or(Vec::Zero(d));
    if (b.size() != d) throw ConfigError(c.origin() + ": [model] b must have d = " + std::to_string(d) + " entries");
    return b;
}

SimConfig read_sim(const Config& c, std::uint64_t seed) {
    const std::string s = "simulation";
    SimConfig sc;
    sc.dt_max = c.get_double(s, "dt_max").value_or(sc.dt_max);
    if (auto rule = c.get_string(s, "dt_rule")) {
        if (*rule == "fixed") {
            sc.dt_rule = DtRule::Fixed;
        } else if (*rule == "radius_scaled") {
            sc.dt_rule = DtRule::RadiusScaled;
        } else {
            throw ConfigError(c.origin() + ": [simulation] dt_rule must be fixed or radius_scaled");
        }
    }
    sc.kappa = c.get_double(s, "kappa").value_or(sc.kappa);
    sc.dt_min = c.get_double(s, "dt_min").value_or(sc.dt_min);
    sc.origin_eps = c.get_double(s, "origin_eps").value_or(sc.origin_eps);
    sc.max_steps = c.get_long(s, "max_steps").value_or(sc.max_steps);
    sc.interpolate_crossings = c.get_bool(s, "interpolate_crossings").value_or(sc.interpolate_crossings);
    sc.max_reflect_iter = static_cast<int>(c.get_long(s, "max_reflect_iter").value_or(sc.max_reflect_iter));
    sc.seed = seed;
    try {
        sc.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(c.origin() + ": [simulation]: " + e.what());
    }
    return sc;
}

NetworkTopology read_topology(const Config& c, const ConeParams& p) {
    const std::string s = "topology";
    if (!c.has_section(s)) return example_topology(p.d, p.mu, p.alpha);
    NetworkTopology t;
    auto need = [&](const char* key) {
        if (!c.has(s, key)) throw ConfigError(c.origin() + ": [topology] " + key + ": required key is missing");
    };
    need("A");
    t.A = *c.get_matrix(s, "A");
    const int m = static_cast<int>(t.A.cols());
    t.mu = c.get_vector(s, "mu").value_or(Vec::Ones(m));
    t.nu = c.get_vector(s, "nu").value_or(Vec::Ones(m));
    t.k = c.get_vector(s, "k").value_or(Vec::Ones(m));
    t.alpha = c.get_double(s, "alpha").value_or(p.alpha);
    t.C = c.get_vector(s, "C").value_or(Vec(t.A * t.nu.cwiseQuotient(t.mu)));
    try {
        t.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(c.origin() + ": [topology]: " + e.what());
    }
    return t;
}

template <class T>
T positive(const Config& c, const std::string& key, T value) {
    if (!(value > T(0))) throw ConfigError(c.origin() + ": [experiment] " + key + " must be > 0");
    return value;
}

// ---- check-conditions ------------------------------------------------------

int cmd_check_conditions(Context& ctx, const ConeParams& p, const Vec& b) {
    const Config& c = ctx.cfg;
    BoundarySamplerConfig bs;
    bs.n_samples = static_cast<int>(c.get_long(kExp, "n_samples").value_or(bs.n_samples));
    if (auto r = c.get_list(kExp, "radii")) bs.radii = *r;
    bs.seed = ctx.seed;
    AuxSamplerConfig as;
    as.n_boundary = static_cast<int>(c.get_long(kExp, "n_boundary").value_or(as.n_boundary));
    as.n_interior = static_cast<int>(c.get_long(kExp, "n_interior").value_or(as.n_interior));
    as.seed = ctx.seed;
    const auto beta_key = c.get_double(kExp, "beta");
    const auto delta_w_key = c.get_double(kExp, "delta_w");
    c.reject_unknown();

    const auto window = beta_window(p.mu, p.d);
    double beta = beta_key.value_or(-0.8);
    if (!beta_key && window && !window->contains(beta)) beta = 0.5 * window->lo;
    double delta_w = delta_w_key.value_or(0.1);
    double c_v = std::numeric_limits<double>::quiet_NaN();
    if (window && window->contains(beta)) {
        c_v = lyapunov_constant(p.mu, beta, p.d);
        if (!delta_w_key) delta_w = lyapunov_validity_radius(c_v, b);
    }
    const DiffusionParams dp = example_diffusion(p.d, p.mu, b);

    ConditionReport g = check_condition_G(p, bs);
    ConditionReport aux = check_auxfunc(LyapunovSpec::power_law(beta, delta_w), p, dp, as);

    ctx.write("condition_G.txt", [&](std::ostream& os) { g.write_text(os); });
    ctx.write("condition_G.csv", [&](std::ostream& os) { g.write_csv(os); });
    ctx.write("auxfunc.txt", [&](std::ostream& os) { aux.write_text(os); });
    ctx.write("auxfunc.csv", [&](std::ostream& os) { aux.write_csv(os); });
    ctx.write("summary.txt", [&](std::ostream& os) {
        os << "mu: " << format_double(p.mu) << '\n';
        os << "mu_threshold: " << format_double(mu_threshold(p.d)) << '\n';
        os << "beta_min: " << format_double(beta_min(p.mu, p.d)) << '\n';
        if (window) {
            os << "beta_window: (" << format_double(window->lo) << ", 0)\n";
        } else {
            os << "beta_window: empty (beta_min >= 0)\n";
        }
        os << "beta: " << format_double(beta) << '\n';
        os << "c_V: " << format_double(c_v) << '\n';
        os << "delta_w: " << format_double(delta_w) << '\n';
        os << "condition_G: " << (g.pass ? "pass" : "fail") << " worst_margin " << format_double(g.worst_margin) << '\n';
        os << "auxfunc: " << (aux.pass ? "pass" : "fail") << " worst_margin " << format_double(aux.worst_margin) << '\n';
        for (const auto& d : aux.diagnostics) os << "auxfunc diagnostic: " << d << '\n';
    });
    ctx.log << "beta window: ";
    if (window) {
        ctx.log << "(" << format_double(window->lo) << ", 0)\n";
    } else {
        ctx.log << "empty\n";
    }
    ctx.log << "condition G: " << (g.pass ? "pass" : "fail") << ", auxfunc: " << (aux.pass ? "pass" : "fail") << '\n';
    return g.pass && aux.pass ? kExitOk : kExitCondition;
}

// ---- simulate-orbm ---------------------------------------------------------

int cmd_simulate(Context& ctx, const ConeParams& p, const DiffusionParams& dp, const SimConfig& sc) {
    const Config& c = ctx.cfg;
    const long n_paths = positive(c, "n_paths", c.get_long(kExp, "n_paths").value_or(1));
    const Vec x0 = c.get_vector(kExp, "x0").value_or(Vec::Zero(p.d));
    if (x0.size() != p.d) throw ConfigError(c.origin() + ": [experiment] x0 must have d entries");
    StopSpec stop;
    stop.radii = c.get_list(kExp, "radii").value_or(std::vector<double>{0.5});
    stop.t_max = c.get_double(kExp, "t_max").value_or(stop.t_max);
    stop.stop_on_origin = c.get_bool(kExp, "stop_on_origin").value_or(false);
    const long dump = c.get_long(kExp, "dump_paths").value_or(1);
    c.reject_unknown();
    if (!in_cone(x0, p)) throw ConfigError(c.origin() + ": [experiment] x0 is outside the cone");

    auto records = parallel_map(static_cast<std::size_t>(n_paths), ctx.threads, [&](std::size_t i) {
        StopSpec s = stop;
        s.record_path = static_cast<long>(i) < dump;
        return simulate_path(x0, s, sc, p, dp, i);
    });
    ctx.write("first_passage.csv", [&](std::ostream& os) {
        os << "seed,path,radius,time,killed_flag\n";
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto& rec = records[i];
            for (double r : stop.radii) {
                auto it = rec.tau_hits.find(r);
                const bool killed = rec.reason == StopReason::OriginProxy && it == rec.tau_hits.end();
                os << sc.seed << ',' << i << ',' << format_double(r) << ','
                   << (it == rec.tau_hits.end() ? std::string("nan") : format_double(it->second)) << ','
                   << (killed ? 1 : 0) << '\n';
            }
        }
    });
    ctx.write("paths.csv", [&](std::ostream& os) {
        os << "path,t";
        for (int j = 1; j <= p.d; ++j) os << ",x" << j;
        for (int j = 1; j <= p.d; ++j) os << ",lt" << j;
        os << '\n';
        for (std::size_t i = 0; i < records.size(); ++i) {
            const auto& rec = records[i];
            for (std::size_t k = 0; k < rec.times.size(); ++k) {
                os << i << ',' << format_double(rec.times[k]);
                for (int j = 0; j < p.d; ++j) os << ',' << format_double(rec.states[k][j]);
                for (int j = 0; j < p.d; ++j) os << ',' << format_double(rec.local_time[k][j]);
                os << '\n';
            }
        }
    });
    long steps = 0;
    for (const auto& r : records) steps += r.steps;
    ctx.log << "simulated " << n_paths << " paths, " << steps << " steps\n";
    return kExitOk;
}

// ---- exit-time -------------------------------------------------------------

int cmd_exit_time(Context& ctx, const ConeParams& p, const DiffusionParams& dp, const SimConfig& sc) {
    const Config& c = ctx.cfg;
    const double delta = c.require_double(kExp, "delta");
    const long n_paths = positive(c, "n_paths", c.get_long(kExp, "n_paths").value_or(10000));
    c.reject_unknown();
    if (!(delta > 0.0 && delta < 4.0)) throw ConfigError(c.origin() + ": [experiment] delta must lie in (0, 4)");

    const ExitEstimate est = mean_exit_from_origin(delta, n_paths, sc, p, dp, ctx.threads);
    const double rel = est.mean > 0.0 ? est.std_error / est.mean : 0.0;
    const double allowed = est.bound * (1.0 + 3.0 * rel);
    const bool pass = est.mean <= allowed && !est.samples.empty();
    ctx.write("exit_times.csv", [&](std::ostream& os) {
        os << "seed,path,radius,time,killed_flag\n";
        for (std::size_t i = 0; i < est.samples.size(); ++i) {
            os << sc.seed << ',' << est.sample_paths[i] << ',' << format_double(delta) << ','
               << format_double(est.samples[i]) << ",0\n";
        }
    });
    ctx.write("exit_time_summary.csv", [&](std::ostream& os) {
        os << "delta,n_paths,failed,mean,std_error,bound,allowed,pass\n";
        os << format_double(delta) << ',' << n_paths << ',' << est.failed << ',' << format_double(est.mean) << ','
           << format_double(est.std_error) << ',' << format_double(est.bound) << ',' << format_double(allowed) << ','
           << (pass ? 1 : 0) << '\n';
    });
    ctx.log << "E[tau] = " << format_double(est.mean) << " +- " << format_double(est.std_error) << ", bound "
            << format_double(est.bound) << (pass ? " (within bound)" : " (ABOVE bound)") << '\n';
    return pass ? kExitOk : kExitCondition;
}

// ---- survival-bound --------------------------------------------------------

int cmd_survival(Context& ctx, const ConeParams& p, const DiffusionParams& dp, const SimConfig& sc) {
    const Config& c = ctx.cfg;
    const double delta = c.require_double(kExp, "delta");
    const double beta = c.get_double(kExp, "beta").value_or(-0.8);
    Vec dir = c.get_vector(kExp, "x0_direction").value_or(Vec::Ones(p.d));
    const double r0 = c.get_double(kExp, "x0_radius").value_or(0.5 * delta);
    const double eps = c.get_double(kExp, "eps").value_or(r0 / 100.0);
    const long n_paths = positive(c, "n_paths", c.get_long(kExp, "n_paths").value_or(10000));
    c.reject_unknown();
    if (dir.size() != p.d || !(dir.norm() > 0.0)) throw ConfigError(c.origin() + ": [experiment] bad x0_direction");
    const Vec x0 = dir.normalized() * r0;
    if (!in_cone(x0, p)) throw ConfigError(c.origin() + ": [experiment] x0 is outside the cone");
    const auto window = beta_window(p.mu, p.d);
    const bool beta_ok = window && window->contains(beta);

    const SmallBallEstimate est = small_ball_probability(x0, eps, delta, n_paths, sc, p, dp, ctx.threads);
    const double bound = std::pow(eps / r0, -beta);
    const double allowed = bound + 3.0 * est.std_error;
    const bool pass = beta_ok && est.probability <= allowed;
    ctx.write("survival.csv", [&](std::ostream& os) {
        os << "delta,x0_radius,eps,beta,n_paths,hits,failed,probability,std_error,bound,allowed,pass\n";
        os << format_double(delta) << ',' << format_double(r0) << ',' << format_double(eps) << ','
           << format_double(beta) << ',' << n_paths << ',' << est.hits << ',' << est.failed << ','
           << format_double(est.probability) << ',' << format_double(est.std_error) << ',' << format_double(bound)
           << ',' << format_double(allowed) << ',' << (pass ? 1 : 0) << '\n';
    });
    if (!beta_ok) ctx.log << "beta " << format_double(beta) << " is outside the beta window for mu\n";
    ctx.log << "P(small ball first) = " << format_double(est.probability) << " +- " << format_double(est.std_error)
            << ", bound " << format_double(bound) << '\n';
    return pass ? kExitOk : kExitCondition;
}

// ---- hitting-uniqueness ----------------------------------------------------

int cmd_hitting(Context& ctx, const ConeParams& p, const DiffusionParams& dp, const SimConfig& sc) {
    const Config& c = ctx.cfg;
    UniquenessConfig u;
    u.delta = c.require_double(kExp, "delta");
    u.levels = static_cast<int>(c.get_long(kExp, "levels").value_or(u.levels));
    u.cells = static_cast<int>(c.get_long(kExp, "cells").value_or(u.cells));
    u.paths_per_cell = c.get_long(kExp, "paths_per_cell").value_or(u.paths_per_cell);
    u.bootstrap = static_cast<int>(c.get_long(kExp, "bootstrap").value_or(u.bootstrap));
    const auto initial = c.get_list(kExp, "initial_cells");
    const double tv_tol = c.get_double(kExp, "tv_tol").value_or(0.05);
    c.reject_unknown();
    if (initial) {
        for (double v : *initial) {
            if (v != std::floor(v) || v < 0 || v >= u.cells) {
                throw ConfigError(c.origin() + ": [experiment] initial_cells entries must be cell indices");
            }
            u.initial.push_back(point_mass(u.cells, static_cast<int>(v)));
        }
    }
    UniquenessReport rep;
    try {
        rep = uniqueness_experiment(u, sc, p, dp, ctx.threads);
    } catch (const InvalidArgument& e) {
        throw ConfigError(c.origin() + ": [experiment]: " + e.what());
    }
    ctx.write("kernels.csv", [&](std::ostream& os) { write_kernels_csv(os, rep.kernels); });
    ctx.write("hitting_distributions.csv", [&](std::ostream& os) {
        os << "nu,cell,probability\n";
        for (std::size_t s = 0; s < rep.distributions.size(); ++s) {
            for (Eigen::Index i = 0; i < rep.distributions[s].size(); ++i) {
                os << s << ',' << i << ',' << format_double(rep.distributions[s][i]) << '\n';
            }
        }
    });
    ctx.write("tv.csv", [&](std::ostream& os) {
        os << "a,b,tv,std_error\n";
        for (Eigen::Index a = 0; a < rep.tv.rows(); ++a) {
            for (Eigen::Index b = a + 1; b < rep.tv.cols(); ++b) {
                os << a << ',' << b << ',' << format_double(rep.tv(a, b)) << ','
                   << format_double(rep.tv_std_error(a, b)) << '\n';
            }
        }
    });
    ctx.write("report.txt", [&](std::ostream& os) { write_uniqueness_report(os, rep); });
    ctx.log << "max pairwise TV " << format_double(rep.max_tv) << " (tolerance " << format_double(tv_tol) << ")\n";
    for (const auto& w : rep.warnings) ctx.log << "warning: " << w << '\n';
    return rep.max_tv <= tv_tol ? kExitOk : kExitCondition;
}

// ---- ergodic-demo ----------------------------------------------------------

int cmd_ergodic(Context& ctx) {
    const Config& c = ctx.cfg;
    const std::string kind = c.get_string(kExp, "kernel").value_or("two_state");
    const long n = positive(c, "n", c.get_long(kExp, "n").value_or(200));
    const auto kernels_csv = c.get_string(kExp, "kernels_csv");
    const auto f_list = c.get_vector(kExp, "f");
    const long nu_count = positive(c, "nu_count", c.get_long(kExp, "nu_count").value_or(3));
    const std::string nu_kind = c.get_string(kExp, "nu").value_or("random");
    LimitOptions lo;
    lo.tol = c.get_double(kExp, "tol").value_or(lo.tol);
    lo.horizon = static_cast<int>(c.get_long(kExp, "horizon").value_or(lo.horizon));
    lo.floors.c0 = c.get_double(kExp, "c0_floor").value_or(lo.floors.c0);
    lo.floors.eps = c.get_double(kExp, "eps_floor").value_or(lo.floors.eps);
    c.reject_unknown();

    KernelSequence seq;
    if (kind == "two_state") {
        Mat q(2, 2);
        q << 0.5, 0.3, 0.2, 0.4;
        seq = KernelSequence::constant(q, static_cast<int>(n));
    } else if (kind == "identity") {
        seq = KernelSequence::constant(Mat::Identity(2, 2), static_cast<int>(n));
    } else if (kind == "file") {
        if (!kernels_csv) throw ConfigError(c.origin() + ": [experiment] kernel = file needs kernels_csv");
        std::ifstream in(*kernels_csv);
        if (!in) throw ConfigError(c.origin() + ": [experiment] cannot open " + *kernels_csv);
        try {
            seq = KernelSequence(read_kernels_csv(in));
        } catch (const InvalidArgument& e) {
            throw ConfigError(c.origin() + ": [experiment] kernels_csv: " + e.what());
        }
    } else {
        throw ConfigError(c.origin() + ": [experiment] kernel must be two_state, identity or file");
    }
    Vec f = f_list.value_or(Vec::Unit(seq.states(0), 0));
    if (f.size() != seq.states(0)) throw ConfigError(c.origin() + ": [experiment] f must have |E_0| entries");

    std::vector<NuSequence> nus;
    if (nu_kind == "random") {
        nus = random_nu_sequences(seq, static_cast<int>(nu_count), ctx.seed);
    } else if (nu_kind == "alternating") {
        // Point masses alternating between the first and last state.
        for (long s = 0; s < nu_count; ++s) {
            NuSequence nu;
            for (int l = 1; l <= seq.length(); ++l) {
                const int size = seq.states(l);
                nu.push_back(point_mass(size, ((l + s) % 2 == 0) ? 0 : size - 1));
            }
            nus.push_back(std::move(nu));
        }
    } else {
        throw ConfigError(c.origin() + ": [experiment] nu must be random or alternating");
    }

    const ErgodicDiagnostics diag = normalized_limit(seq, {f}, nus, lo);
    ctx.write("ergodic.txt", [&](std::ostream& os) { diag.write_text(os); });
    ctx.write("trace.csv", [&](std::ostream& os) { diag.write_trace_csv(os); });
    ctx.write("assumptions.csv", [&](std::ostream& os) {
        os << "level,c0,eps\n";
        for (std::size_t l = 0; l < diag.eps_trace.size(); ++l) {
            const double c0 = l < diag.c0_trace.size() ? diag.c0_trace[l] : std::numeric_limits<double>::quiet_NaN();
            os << l + 1 << ',' << format_double(c0) << ',' << format_double(diag.eps_trace[l]) << '\n';
        }
    });
    ctx.log << "c0 = " << format_double(diag.assumptions.c0) << ", eps0 = " << format_double(diag.assumptions.eps0)
            << ", C(f) = " << format_double(diag.c_f.front()) << (diag.converged ? "" : " (not converged)") << '\n';
    for (const auto& v : diag.assumptions.violations) ctx.log << v.describe() << '\n';
    if (!diag.assumptions.ok()) return kExitCondition;
    diag.require_converged();
    return kExitOk;
}

// ---- prelimit --------------------------------------------------------------

int cmd_prelimit(Context& ctx, const ConeParams& p, const Vec& b) {
    const Config& c = ctx.cfg;
    const std::vector<double> rs = c.get_list(kExp, "r_list").value_or(std::vector<double>{10, 20, 40});
    const double horizon = positive(c, "horizon", c.get_double(kExp, "horizon").value_or(1.0));
    const int grid = static_cast<int>(c.get_long(kExp, "grid_points").value_or(101));
    const long reps = positive(c, "replications", c.get_long(kExp, "replications").value_or(1));
    const double htol = c.get_double(kExp, "htol").value_or(1e-12);
    const NetworkTopology topo = read_topology(c, p);
    c.reject_unknown();
    if (b.size() != topo.resources()) throw ConfigError(c.origin() + ": [model] b does not match the topology");

    struct DriftRow {
        double r;
        Vec drift;
    };
    std::vector<DriftRow> drifts;
    double worst = 0.0;
    for (double r : rs) {
        const HeavyTrafficRates rates = heavy_traffic_config(topo, r, b);
        const Vec drift = heavy_traffic_drift(topo, rates);
        worst = std::max(worst, (drift - b).cwiseAbs().maxCoeff());
        drifts.push_back({r, drift});
    }
    ctx.write("heavy_traffic.csv", [&](std::ostream& os) {
        os << "r,resource,drift,target,error\n";
        for (const auto& row : drifts) {
            for (Eigen::Index j = 0; j < b.size(); ++j) {
                os << format_double(row.r) << ',' << j + 1 << ',' << format_double(row.drift[j]) << ','
                   << format_double(b[j]) << ',' << format_double(row.drift[j] - b[j]) << '\n';
            }
        }
    });

    struct Job {
        std::size_t ri;
        long rep;
    };
    std::vector<Job> jobs;
    for (std::size_t ri = 0; ri < rs.size(); ++ri) {
        for (long k = 0; k < reps; ++k) jobs.push_back({ri, k});
    }
    const auto paths = parallel_map(jobs.size(), ctx.threads, [&](std::size_t i) {
        const double r = rs[jobs[i].ri];
        const NetworkTopology topo_r = at_scale(topo, heavy_traffic_config(topo, r, b));
        return sample_scaled_workload(topo_r, r, horizon, grid, stream_seed(ctx.seed, i));
    });
    ctx.write("xr_paths.csv", [&](std::ostream& os) {
        os << "r,replication,t";
        for (int j = 1; j <= topo.resources(); ++j) os << ",x" << j;
        os << '\n';
        for (std::size_t i = 0; i < paths.size(); ++i) {
            for (std::size_t k = 0; k < paths[i].times.size(); ++k) {
                os << format_double(paths[i].r) << ',' << jobs[i].rep << ',' << format_double(paths[i].times[k]);
                for (Eigen::Index j = 0; j < paths[i].values[k].size(); ++j) {
                    os << ',' << format_double(paths[i].values[k][j]);
                }
                os << '\n';
            }
        }
    });
    ctx.log << "heavy-traffic identity max error " << format_double(worst) << '\n';
    return worst <= htol ? kExitOk : kExitCondition;
}

// ---- compare ---------------------------------------------------------------

int cmd_compare(Context& ctx, const ConeParams& p, const Vec& b) {
    const Config& c = ctx.cfg;
    CompareConfig cc;
    cc.r_list = c.get_list(kExp, "r_list").value_or(cc.r_list);
    cc.horizon = c.get_double(kExp, "horizon").value_or(cc.horizon);
    cc.replications = static_cast<int>(c.get_long(kExp, "replications").value_or(cc.replications));
    cc.grid_points = static_cast<int>(c.get_long(kExp, "grid_points").value_or(cc.grid_points));
    cc.delta = c.get_double(kExp, "delta").value_or(cc.delta);
    cc.collar = c.get_double(kExp, "collar").value_or(cc.collar);
    cc.orbm_dt = c.get_double(kExp, "orbm_dt").value_or(cc.orbm_dt);
    const NetworkTopology topo = read_topology(c, p);
    c.reject_unknown();
    cc.b = b;
    cc.seed = ctx.seed;
    CompareReport rep;
    try {
        rep = scaled_workload_compare(topo, cc, ctx.threads);
    } catch (const InvalidArgument& e) {
        throw ConfigError(c.origin() + ": " + e.what());
    }
    ctx.write("compare.csv", [&](std::ostream& os) { rep.write_csv(os); });
    ctx.write("compare.txt", [&](std::ostream& os) { rep.write_text(os); });
    ctx.log << "compare: " << rep.rows.size() << " statistics written (report only)\n";
    return kExitOk;
}

int dispatch(const std::string& sub, Context& ctx) {
    const Config& c = ctx.cfg;
    const ConeParams p = read_cone(c);
    const Vec b = read_drift(c, p.d);
    const SimConfig sc = read_sim(c, ctx.seed);
    if (sub == "check-conditions") return cmd_check_conditions(ctx, p, b);
    if (sub == "ergodic-demo") return cmd_ergodic(ctx);
    if (sub == "prelimit") return cmd_prelimit(ctx, p, b);
    if (sub == "compare") return cmd_compare(ctx, p, b);
    const DiffusionParams dp = example_diffusion(p.d, p.mu, b);
    if (sub == "simulate-orbm") return cmd_simulate(ctx, p, dp, sc);
    if (sub == "exit-time") return cmd_exit_time(ctx, p, dp, sc);
    if (sub == "survival-bound") return cmd_survival(ctx, p, dp, sc);
    if (sub == "hitting-uniqueness") return cmd_hitting(ctx, p, dp, sc);
    throw ConfigError("unknown subcommand '" + sub + "'");
}

}  // namespace

int run_experiment(const std::string& subcommand, const RunOptions& opts, std::ostream& log) {
    try {
        return run_experiment(subcommand, Config::load(opts.config_path), opts, log);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        return kExitConfig;
    }
}

int run_experiment(const std::string& subcommand, Config cfg, const RunOptions& opts, std::ostream& log) {
    const auto start = std::chrono::steady_clock::now();
    std::string out_dir;
    std::uint64_t seed = 1;
    int code = kExitOk;
    std::optional<Context> ctx;
    try {
        if (std::find(subcommands().begin(), subcommands().end(), subcommand) == subcommands().end()) {
            throw ConfigError("unknown subcommand '" + subcommand + "'");
        }
        if (opts.threads < 1) throw ConfigError("--threads must be >= 1");
        seed = cfg.get_u64("", "seed").value_or(1);
        if (opts.seed) seed = *opts.seed;
        const auto dir_key = cfg.get_string("output", "dir");
        out_dir = opts.out_dir ? *opts.out_dir : dir_key.value_or("out");
        std::filesystem::create_directories(out_dir);
        ctx.emplace(Context{cfg, out_dir, seed, opts.threads, log, {}});
        ctx->manifest.subcommand = subcommand;
        ctx->manifest.config_path = opts.config_path;
        ctx->manifest.seed = seed;
        ctx->manifest.threads = opts.threads;
        code = dispatch(subcommand, *ctx);
    } catch (const ConfigError& e) {
        log << "config error: " << e.what() << '\n';
        code = kExitConfig;
    } catch (const OutsideCone& e) {
        log << "config error: " << e.what() << '\n';
        code = kExitConfig;
    } catch (const InvalidArgument& e) {
        log << "config error: " << e.what() << '\n';
        code = kExitConfig;
    } catch (const NumericalError& e) {
        log << "numerical failure: " << e.what() << '\n';
        code = kExitNumerical;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        code = kExitNumerical;
    }
    if (ctx) {
        ctx->manifest.exit_code = code;
        ctx->manifest.config_echo = cfg.echo();
        ctx->manifest.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        try {
            ctx->manifest.write(out_dir);
        } catch (const std::exception& e) {
            log << "error: " << e.what() << '\n';
            if (code == kExitOk) code = kExitNumerical;
        }
    }
    return code;
}

}  // namespace orbm
