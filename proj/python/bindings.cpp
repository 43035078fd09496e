#include "orbm/bandwidth.hpp"
#include "orbm/cone_geometry.hpp"
#include "orbm/ergodic.hpp"
#include "orbm/experiments.hpp"
#include "orbm/generator.hpp"
#include "orbm/hitting.hpp"
#include "orbm/sder.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

namespace py = pybind11;
using namespace orbm;

namespace {

py::dict path_to_dict(const PathRecord& rec) {
    py::dict d;
    d["times"] = rec.times;
    d["states"] = rec.states;
    d["tau_hits"] = rec.tau_hits;
    d["hit_points"] = rec.hit_points;
    d["theta_proxy"] = rec.theta_proxy;
    d["total_local_time"] = rec.total_local_time;
    d["final_state"] = rec.final_state;
    d["final_time"] = rec.final_time;
    d["steps"] = rec.steps;
    d["vertex_snaps"] = rec.vertex_snaps;
    const char* reasons[] = {"all_radii_hit", "origin_proxy", "time_limit"};
    d["reason"] = reasons[static_cast<int>(rec.reason)];
    return d;
}

py::dict report_to_dict(const ConditionReport& rep) {
    py::dict d;
    d["condition_id"] = rep.condition_id;
    d["pass"] = rep.pass;
    d["worst_margin"] = rep.worst_margin;
    d["samples"] = rep.samples.size();
    d["warnings"] = rep.warnings;
    std::ostringstream text;
    rep.write_text(text);
    d["text"] = text.str();
    return d;
}

}  // namespace

PYBIND11_MODULE(_orbm, m) {
    m.doc() = "Reflected Brownian motion in alpha-fair cones";
    m.attr("__version__") = ORBM_VERSION;

    auto error = py::register_exception<Error>(m, "Error");
    py::register_exception<InvalidArgument>(m, "InvalidArgument", error);
    py::register_exception<NumericalError>(m, "NumericalError", error);
    py::register_exception<OutsideCone>(m, "OutsideCone", error);

    py::class_<ConeParams>(m, "ConeParams")
        .def(py::init([](int d, double alpha, double mu) {
                 ConeParams p;
                 p.d = d;
                 p.alpha = alpha;
                 p.mu = mu;
                 p.validate();
                 return p;
             }),
             py::arg("d") = 3, py::arg("alpha") = 2.0, py::arg("mu") = 1.0)
        .def_readwrite("d", &ConeParams::d)
        .def_readwrite("alpha", &ConeParams::alpha)
        .def_readwrite("mu", &ConeParams::mu)
        .def("__repr__", [](const ConeParams& p) {
            return "ConeParams(d=" + std::to_string(p.d) + ", alpha=" + format_double(p.alpha) +
                   ", mu=" + format_double(p.mu) + ")";
        });

    m.def("embed", &embed, py::arg("q"), py::arg("params"));
    m.def(
        "invert",
        [](const Vec& x, const ConeParams& p) {
            const Inversion inv = invert(x, p);
            return py::make_tuple(inv.q, inv.faces.active, inv.faces.at_vertex);
        },
        py::arg("x"), py::arg("params"), "Returns (q, active faces, at_vertex).");
    m.def("in_cone", &in_cone, py::arg("x"), py::arg("params"));
    m.def("inward_normal", &inward_normal, py::arg("face"), py::arg("x"), py::arg("params"));
    m.def("reflection_matrix", &reflection_matrix, py::arg("x"), py::arg("params"));
    m.def("spectral_radius", &spectral_radius, py::arg("m"));
    m.def(
        "check_condition_G",
        [](const ConeParams& p, int n_samples, std::uint64_t seed) {
            BoundarySamplerConfig cfg;
            cfg.n_samples = n_samples;
            cfg.seed = seed;
            return report_to_dict(check_condition_G(p, cfg));
        },
        py::arg("params"), py::arg("n_samples") = 2000, py::arg("seed") = 1);

    m.def("sigma_matrix", py::overload_cast<int, double>(&sigma_matrix), py::arg("d"), py::arg("mu"));
    m.def("beta_min", &beta_min, py::arg("mu"), py::arg("d") = 3);
    m.def(
        "beta_window",
        [](double mu, int d) -> std::optional<std::pair<double, double>> {
            const auto w = beta_window(mu, d);
            if (!w) return std::nullopt;
            return std::make_pair(w->lo, w->hi);
        },
        py::arg("mu"), py::arg("d") = 3, "Open interval (lo, hi) of admissible beta, or None when empty.");
    m.def("mu_threshold", &mu_threshold, py::arg("d") = 3);
    m.def("lyapunov_constant", &lyapunov_constant, py::arg("mu"), py::arg("beta"), py::arg("d") = 3);
    m.def(
        "power_law_generator",
        [](double beta, const Vec& x, double mu, const Vec& b) {
            return power_law_generator(beta, x, example_diffusion(static_cast<int>(x.size()), mu, b));
        },
        py::arg("beta"), py::arg("x"), py::arg("mu"), py::arg("b"));

    py::class_<SimConfig>(m, "SimConfig")
        .def(py::init<>())
        .def_readwrite("dt_max", &SimConfig::dt_max)
        .def_readwrite("kappa", &SimConfig::kappa)
        .def_readwrite("dt_min", &SimConfig::dt_min)
        .def_readwrite("origin_eps", &SimConfig::origin_eps)
        .def_readwrite("seed", &SimConfig::seed)
        .def_readwrite("max_steps", &SimConfig::max_steps)
        .def_readwrite("max_reflect_iter", &SimConfig::max_reflect_iter)
        .def_property(
            "fixed_dt", [](const SimConfig& c) { return c.dt_rule == DtRule::Fixed; },
            [](SimConfig& c, bool fixed) { c.dt_rule = fixed ? DtRule::Fixed : DtRule::RadiusScaled; });

    m.def(
        "simulate_path",
        [](const Vec& x0, std::vector<double> radii, const SimConfig& cfg, const ConeParams& p, const Vec& b,
           bool record, bool stop_on_origin, double t_max, std::uint64_t path_index) {
            StopSpec stop;
            stop.radii = std::move(radii);
            stop.record_path = record;
            stop.stop_on_origin = stop_on_origin;
            stop.t_max = t_max;
            const auto dp = example_diffusion(p.d, p.mu, b);
            PathRecord rec;
            {
                py::gil_scoped_release release;
                rec = simulate_path(x0, stop, cfg, p, dp, path_index);
            }
            return path_to_dict(rec);
        },
        py::arg("x0"), py::arg("radii"), py::arg("config"), py::arg("params"), py::arg("b"),
        py::arg("record") = false, py::arg("stop_on_origin") = true,
        py::arg("t_max") = std::numeric_limits<double>::infinity(), py::arg("path_index") = 0);
    m.def(
        "exit_time_bound",
        [](double delta, double mu, int d) { return exit_time_bound(delta, example_diffusion(d, mu, Vec::Zero(d))); },
        py::arg("delta"), py::arg("mu"), py::arg("d") = 3);
    m.def(
        "mean_exit_from_origin",
        [](double delta, long n_paths, const SimConfig& cfg, const ConeParams& p, int threads) {
            ExitEstimate est;
            {
                py::gil_scoped_release release;
                est = mean_exit_from_origin(delta, n_paths, cfg, p, example_diffusion(p.d, p.mu, Vec::Zero(p.d)),
                                            threads);
            }
            py::dict d;
            d["mean"] = est.mean;
            d["std_error"] = est.std_error;
            d["bound"] = est.bound;
            d["failed"] = est.failed;
            d["samples"] = est.samples;
            return d;
        },
        py::arg("delta"), py::arg("n_paths"), py::arg("config"), py::arg("params"), py::arg("threads") = 1);
    m.def(
        "small_ball_probability",
        [](const Vec& x0, double eps, double delta, long n_paths, const SimConfig& cfg, const ConeParams& p,
           int threads) {
            SmallBallEstimate est;
            {
                py::gil_scoped_release release;
                est = small_ball_probability(x0, eps, delta, n_paths, cfg, p,
                                             example_diffusion(p.d, p.mu, Vec::Zero(p.d)), threads);
            }
            py::dict d;
            d["probability"] = est.probability;
            d["std_error"] = est.std_error;
            d["hits"] = est.hits;
            d["failed"] = est.failed;
            return d;
        },
        py::arg("x0"), py::arg("eps"), py::arg("delta"), py::arg("n_paths"), py::arg("config"), py::arg("params"),
        py::arg("threads") = 1);

    m.def("hitting_distribution", &hitting_distribution, py::arg("kernels"), py::arg("nu"));
    m.def(
        "backward_composition",
        [](const std::vector<Mat>& kernels, const Vec& nu, const Vec& f) {
            const auto c = backward_composition(kernels, nu, f);
            return py::make_tuple(c.value, c.log_mass);
        },
        py::arg("kernels"), py::arg("nu"), py::arg("f"), "Returns (normalized value, log of the normalizing mass).");
    m.def("total_variation", &total_variation, py::arg("a"), py::arg("b"));
    m.def(
        "uniqueness_experiment",
        [](double mu, double delta, int levels, int cells, long paths_per_cell, std::vector<int> initial_cells,
           const SimConfig& cfg, int threads) {
            const ConeParams p = [&] {
                ConeParams c;
                c.mu = mu;
                return c;
            }();
            UniquenessConfig u;
            u.delta = delta;
            u.levels = levels;
            u.cells = cells;
            u.paths_per_cell = paths_per_cell;
            for (int i : initial_cells) u.initial.push_back(point_mass(cells, i));
            UniquenessReport rep;
            {
                py::gil_scoped_release release;
                rep = uniqueness_experiment(u, cfg, p, example_diffusion(3, mu, Vec::Zero(3)), threads);
            }
            std::vector<Mat> kernels;
            for (const auto& k : rep.kernels) kernels.push_back(k.matrix);
            py::dict d;
            d["kernels"] = kernels;
            d["distributions"] = rep.distributions;
            d["tv"] = rep.tv;
            d["tv_std_error"] = rep.tv_std_error;
            d["max_tv"] = rep.max_tv;
            d["cell_angle"] = rep.cell_angle;
            d["warnings"] = rep.warnings;
            return d;
        },
        py::arg("mu"), py::arg("delta"), py::arg("levels"), py::arg("cells"), py::arg("paths_per_cell"),
        py::arg("initial_cells"), py::arg("config"), py::arg("threads") = 1);

    m.def("overlap", &overlap, py::arg("q"), py::arg("x"), py::arg("xt"));
    m.def(
        "normalized_limit",
        [](const std::vector<Mat>& kernels, const std::vector<Vec>& fs, int n_sequences, std::uint64_t seed,
           double tol) {
            const KernelSequence seq(kernels);
            LimitOptions opts;
            opts.tol = tol;
            const auto diag = normalized_limit(seq, fs, random_nu_sequences(seq, n_sequences, seed), opts);
            std::vector<std::string> violations;
            for (const auto& v : diag.assumptions.violations) violations.push_back(v.describe());
            py::dict d;
            d["converged"] = diag.converged;
            d["converged_at"] = diag.converged_at;
            d["c_f"] = diag.c_f;
            d["c0"] = diag.assumptions.c0;
            d["eps0"] = diag.assumptions.eps0;
            d["violations"] = violations;
            d["ratio_trace"] = diag.ratio_trace;
            return d;
        },
        py::arg("kernels"), py::arg("fs"), py::arg("n_sequences") = 3, py::arg("seed") = 1, py::arg("tol") = 1e-10);

    py::class_<NetworkTopology>(m, "NetworkTopology")
        .def(py::init<>())
        .def_readwrite("A", &NetworkTopology::A)
        .def_readwrite("C", &NetworkTopology::C)
        .def_readwrite("k", &NetworkTopology::k)
        .def_readwrite("nu", &NetworkTopology::nu)
        .def_readwrite("mu", &NetworkTopology::mu)
        .def_readwrite("alpha", &NetworkTopology::alpha)
        .def("validate", &NetworkTopology::validate);
    m.def("example_topology", &example_topology, py::arg("d"), py::arg("mu"), py::arg("alpha"));
    m.def(
        "fair_allocation",
        [](const Vec& n, const NetworkTopology& t) {
            const auto a = fair_allocation(n, t);
            return py::make_tuple(a.lambda, a.prices, a.kkt_residual);
        },
        py::arg("n"), py::arg("topology"), "Returns (bandwidths, prices, KKT residual).");
    m.def(
        "heavy_traffic_drift",
        [](const NetworkTopology& t, double r, const Vec& b) {
            return heavy_traffic_drift(t, heavy_traffic_config(t, r, b));
        },
        py::arg("topology"), py::arg("r"), py::arg("b"));

    m.def("subcommands", &subcommands);
    m.def(
        "run",
        [](const std::string& subcommand, const std::string& config_path, std::optional<std::string> out_dir,
           std::optional<std::uint64_t> seed, int threads) {
            RunOptions opts;
            opts.config_path = config_path;
            opts.out_dir = std::move(out_dir);
            opts.seed = seed;
            opts.threads = threads;
            std::ostringstream log;
            int rc = 0;
            {
                py::gil_scoped_release release;
                rc = run_experiment(subcommand, opts, log);
            }
            return py::make_tuple(rc, log.str());
        },
        py::arg("subcommand"), py::arg("config"), py::arg("out") = py::none(), py::arg("seed") = py::none(),
        py::arg("threads") = 1, "Runs a command-line subcommand; returns (exit code, log text).");
}
