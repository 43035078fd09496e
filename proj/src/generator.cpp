#include "orbm/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace orbm {

void DiffusionParams::validate(int d) const {
    if (b.size() != d) throw InvalidArgument("DiffusionParams: drift has wrong dimension");
    if (sigma.rows() != d || sigma.cols() != d) throw InvalidArgument("DiffusionParams: sigma must be d x d");
    if (!b.allFinite() || !sigma.allFinite()) throw InvalidArgument("DiffusionParams: non-finite entries");
    Eigen::FullPivLU<Mat> lu(sigma);
    if (!lu.isInvertible()) throw InvalidArgument("DiffusionParams: sigma must be nonsingular");
}

double DiffusionParams::condition_number() const {
    Eigen::JacobiSVD<Mat> svd(sigma);
    const auto& s = svd.singularValues();
    return s[0] / s[s.size() - 1];
}

Mat sigma_matrix(const NetworkTopology& topo) {
    const auto d = topo.A.rows();
    if (topo.mu.size() != topo.A.cols() || topo.nu.size() != topo.A.cols()) {
        throw InvalidArgument("sigma_matrix: rate vectors do not match the incidence matrix");
    }
    Eigen::FullPivLU<Mat> lu(topo.A);
    if (lu.rank() != d) throw RankDeficient("sigma_matrix: incidence matrix is not of rank d");
    if ((topo.mu.array() <= 0.0).any() || (topo.nu.array() <= 0.0).any()) {
        throw InvalidArgument("sigma_matrix: rates must be positive");
    }
    const Vec middle = topo.nu.cwiseQuotient(topo.mu.cwiseProduct(topo.mu));
    return 2.0 * topo.A * middle.asDiagonal() * topo.A.transpose();
}

Mat sigma_matrix(int d, double mu) {
    if (d < 1 || !(mu > 0.0)) throw InvalidArgument("sigma_matrix: need d >= 1 and mu > 0");
    const double c = 1.0 / (mu * mu);
    Mat s = Mat::Constant(d, d, 2.0 * c);
    s.diagonal().array() += 2.0;
    return s;
}

DiffusionParams example_diffusion(int d, double mu, const Vec& b) {
    DiffusionParams dp{b, sigma_matrix(d, mu)};
    dp.validate(d);
    return dp;
}

namespace {

double fd_scale(const Vec& x) {
    const double n = x.norm();
    return n > 0.0 ? n : 1.0;
}

}  // namespace

Vec fd_gradient(const ScalarField& f, const Vec& x) {
    const double h = std::cbrt(std::numeric_limits<double>::epsilon()) * fd_scale(x);
    Vec g(x.size());
    Vec xp = x, xm = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        xp[i] = x[i] + h;
        xm[i] = x[i] - h;
        g[i] = (f.value(xp) - f.value(xm)) / (2.0 * h);
        xp[i] = xm[i] = x[i];
    }
    return g;
}

Mat fd_hessian(const ScalarField& f, const Vec& x) {
    const double h = std::pow(std::numeric_limits<double>::epsilon(), 0.25) * fd_scale(x);
    const auto n = x.size();
    Mat hess(n, n);
    const double f0 = f.value(x);
    Vec y = x;
    for (Eigen::Index i = 0; i < n; ++i) {
        y[i] = x[i] + h;
        const double fp = f.value(y);
        y[i] = x[i] - h;
        const double fm = f.value(y);
        y[i] = x[i];
        hess(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
        for (Eigen::Index j = 0; j < i; ++j) {
            y[i] = x[i] + h; y[j] = x[j] + h;
            const double fpp = f.value(y);
            y[j] = x[j] - h;
            const double fpm = f.value(y);
            y[i] = x[i] - h;
            const double fmm = f.value(y);
            y[j] = x[j] + h;
            const double fmp = f.value(y);
            y[i] = x[i]; y[j] = x[j];
            hess(i, j) = hess(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
        }
    }
    return hess;
}

Vec ScalarField::gradient(const Vec& x) const { return fd_gradient(*this, x); }
Mat ScalarField::hessian(const Vec& x) const { return fd_hessian(*this, x); }

double PowerLawField::value(const Vec& x) const { return std::pow(x.norm(), beta_); }

Vec PowerLawField::gradient(const Vec& x) const {
    const double r = x.norm();
    return beta_ * std::pow(r, beta_ - 2.0) * x;
}

Mat PowerLawField::hessian(const Vec& x) const {
    const double r = x.norm();
    Mat h = beta_ * (beta_ - 2.0) * std::pow(r, beta_ - 4.0) * x * x.transpose();
    h.diagonal().array() += beta_ * std::pow(r, beta_ - 2.0);
    return h;
}

double HalfSquaredProjection::value(const Vec& x) const {
    const double p = e_.dot(x);
    return 0.5 * p * p;
}

Vec HalfSquaredProjection::gradient(const Vec& x) const { return e_.dot(x) * e_; }

Mat HalfSquaredProjection::hessian(const Vec&) const { return e_ * e_.transpose(); }

double apply_generator(const ScalarField& f, const Vec& x, const DiffusionParams& dp) {
    const Mat a = dp.sigma * dp.sigma.transpose();
    return dp.b.dot(f.gradient(x)) + 0.5 * (a.cwiseProduct(f.hessian(x))).sum();
}

double power_law_generator(double beta, const Vec& x, const DiffusionParams& dp) {
    const double r2 = x.squaredNorm();
    const double r = std::sqrt(r2);
    const double tr = (dp.sigma * dp.sigma.transpose()).trace();
    const double st = (dp.sigma.transpose() * x).squaredNorm();
    return beta * std::pow(r, beta - 2.0) * (dp.b.dot(x) + 0.5 * tr + 0.5 * (beta - 2.0) * st / r2);
}

double beta_min(double mu, int d) {
    if (!(mu > 0.0) || d < 2) throw InvalidArgument("beta_min: need mu > 0 and d >= 2");
    const double g = 1.0 + d / (mu * mu);
    return 1.0 - (d - 1.0) / (g * g);
}

std::optional<BetaWindow> beta_window(double mu, int d) {
    const double lo = beta_min(mu, d);
    if (lo >= 0.0) return std::nullopt;
    return BetaWindow{lo, 0.0};
}

double mu_threshold(int d) {
    if (d < 2) throw InvalidArgument("mu_threshold: d must be >= 2");
    const double root = std::sqrt(d - 1.0) - 1.0;
    if (root <= 0.0) return std::numeric_limits<double>::infinity();
    return std::sqrt(d / root);
}

double lyapunov_constant(double mu, double beta, int d) {
    const auto w = beta_window(mu, d);
    if (!w || !w->contains(beta)) {
        throw BetaOutOfWindow("lyapunov_constant: beta is outside the admissible window for this mu");
    }
    const double g = 1.0 + d / (mu * mu);
    return 2.0 * (d - 1.0) + 2.0 * (beta - 1.0) * g * g;
}

double lyapunov_validity_radius(double c_v, const Vec& b) { return c_v / (b.norm() + 1.0); }

double example_trace(double mu, int d) {
    const double g = 1.0 + d / (mu * mu);
    return 4.0 * ((d - 1.0) + g * g);
}

double example_max_eig(double mu, int d) {
    const double g = 1.0 + d / (mu * mu);
    return 4.0 * g * g;
}

LyapunovSpec LyapunovSpec::power_law(double beta, double delta_w) {
    LyapunovSpec s;
    s.kind = LyapunovKind::PowerLaw;
    s.beta = beta;
    s.delta_w = delta_w;
    s.v = std::make_shared<PowerLawField>(beta);
    return s;
}

LyapunovSpec LyapunovSpec::user_pair(std::shared_ptr<const ScalarField> v_plus,
                                     std::shared_ptr<const ScalarField> v_minus, double delta_w) {
    LyapunovSpec s;
    s.kind = LyapunovKind::UserPair;
    s.delta_w = delta_w;
    s.v_plus = std::move(v_plus);
    s.v_minus = std::move(v_minus);
    return s;
}

namespace {

bool field_is_analytic(const ScalarField* f) {
    if (!f) return true;
    if (const auto* ff = dynamic_cast<const FunctionField*>(f)) return ff->analytic();
    return true;
}

struct AuxPoint {
    Vec x;
    std::vector<int> faces;
};

// A point of the closed cone at radius r: a random face set (possibly empty)
// and log-uniform free q-coordinates, scaled onto the sphere.
AuxPoint random_cone_point(const ConeParams& p, double r, bool boundary, PathRng& rng) {
    Vec q(p.d);
    for (int j = 0; j < p.d; ++j) q[j] = std::pow(10.0, -3.0 + 5.0 * rng.uniform());
    std::vector<int> faces;
    if (boundary) {
        const unsigned n_sets = (1u << p.d) - 2u;
        const unsigned mask = 1u + static_cast<unsigned>(rng.uniform() * n_sets) % n_sets;
        for (int h = 0; h < p.d; ++h) {
            if (mask & (1u << h)) {
                q[h] = 0.0;
                faces.push_back(h);
            }
        }
    }
    Vec x = embed(q, p);
    x *= r / x.norm();
    return {x, faces};
}

}  // namespace

ConditionReport check_auxfunc(const LyapunovSpec& spec, const ConeParams& p, const DiffusionParams& dp,
                              const AuxSamplerConfig& cfg) {
    ConditionReport rep;
    rep.condition_id = spec.kind == LyapunovKind::PowerLaw ? "auxfunc(i)" : "auxfunc(ii)";
    rep.metadata["d"] = std::to_string(p.d);
    rep.metadata["alpha"] = format_double(p.alpha);
    rep.metadata["mu"] = format_double(p.mu);
    rep.metadata["delta_W"] = format_double(spec.delta_w);
    rep.metadata["seed"] = std::to_string(cfg.seed);
    if (!p.c2_certified()) {
        rep.warnings.emplace_back("alpha < 2: faces are not C^2; results are not C2-certified");
    }

    bool analytic = true;
    if (spec.kind == LyapunovKind::PowerLaw) {
        rep.metadata["beta"] = format_double(spec.beta);
        const auto window = beta_window(p.mu, p.d);
        if (!window) {
            rep.diagnostics.emplace_back("beta-window is empty for mu = " + format_double(p.mu) +
                                         " (beta_min = " + format_double(beta_min(p.mu, p.d)) +
                                         "); power-law Lyapunov function refused");
            rep.report_tol = cfg.report_tol.value_or(1e-10);
            rep.pass = false;
            rep.worst_margin = std::numeric_limits<double>::quiet_NaN();
            return rep;
        }
        rep.metadata["beta_min"] = format_double(window->lo);
        if (!window->contains(spec.beta)) {
            rep.diagnostics.emplace_back("beta = " + format_double(spec.beta) + " lies outside (" +
                                         format_double(window->lo) + ", 0)");
            rep.report_tol = cfg.report_tol.value_or(1e-10);
            rep.pass = false;
            rep.worst_margin = std::numeric_limits<double>::quiet_NaN();
            return rep;
        }
        const double c_v = lyapunov_constant(p.mu, spec.beta, p.d);
        rep.metadata["c_V"] = format_double(c_v);
        rep.metadata["validity_radius"] = format_double(lyapunov_validity_radius(c_v, dp.b));
    } else {
        analytic = field_is_analytic(spec.v_plus.get()) && field_is_analytic(spec.v_minus.get());
        if (!spec.v_plus || !spec.v_minus) throw InvalidArgument("check_auxfunc: user pair needs V+ and V-");
    }
    if (!(spec.delta_w > 0.0)) throw InvalidArgument("check_auxfunc: delta_W must be positive");
    rep.report_tol = cfg.report_tol.value_or(analytic ? 1e-10 : 1e-6);

    const double r_max = spec.delta_w;
    const double r_min = spec.delta_w * cfg.radius_min_fraction;
    const double log_span = std::log(r_max / r_min);
    PathRng rng(cfg.seed, 0);

    const std::shared_ptr<const ScalarField> v =
        spec.kind == LyapunovKind::PowerLaw ? (spec.v ? spec.v : std::make_shared<PowerLawField>(spec.beta)) : nullptr;

    auto evaluate = [&](const AuxPoint& pt) {
        if (spec.kind == LyapunovKind::PowerLaw) {
            const Vec g = v->gradient(pt.x);
            for (int h : pt.faces) rep.add(pt.x, "gradV.g<=0", -g[h]);
            rep.add(pt.x, "AV<=0", -apply_generator(*v, pt.x, dp));
        } else {
            const double vp = spec.v_plus->value(pt.x);
            const double vm = spec.v_minus->value(pt.x);
            rep.add(pt.x, "V+>0", vp);
            rep.add(pt.x, "V->0", vm);
            const Vec gp = spec.v_plus->gradient(pt.x);
            const Vec gm = spec.v_minus->gradient(pt.x);
            for (int h : pt.faces) {
                rep.add(pt.x, "gradV+.g>=0", gp[h]);
                rep.add(pt.x, "gradV-.g<=0", -gm[h]);
            }
            rep.add(pt.x, "AV+>=0", apply_generator(*spec.v_plus, pt.x, dp));
            rep.add(pt.x, "AV-<=0", -apply_generator(*spec.v_minus, pt.x, dp));
        }
    };

    for (int i = 0; i < cfg.n_boundary; ++i) {
        const double r = r_min * std::exp(log_span * rng.uniform());
        evaluate(random_cone_point(p, r, true, rng));
    }
    for (int i = 0; i < cfg.n_interior; ++i) {
        const double r = r_min * std::exp(log_span * rng.uniform());
        evaluate(random_cone_point(p, r, false, rng));
    }

    // Radius slices: blow-up / vanishing at the vertex and the uniform ratio infima.
    if (cfg.radius_slices >= 2 && cfg.per_slice >= 1 && cfg.n_boundary + cfg.n_interior > 0) {
        struct SliceStats {
            double inf_plus = std::numeric_limits<double>::infinity();
            double sup_plus = -std::numeric_limits<double>::infinity();
            double inf_minus = std::numeric_limits<double>::infinity();
            double sup_minus = -std::numeric_limits<double>::infinity();
        };
        std::vector<SliceStats> slices(static_cast<std::size_t>(cfg.radius_slices));
        std::vector<double> radii(slices.size());
        for (std::size_t s = 0; s < slices.size(); ++s) {
            radii[s] = r_min * std::exp(log_span * static_cast<double>(s) / (slices.size() - 1));
            for (int k = 0; k < cfg.per_slice; ++k) {
                const AuxPoint pt = random_cone_point(p, radii[s], k % 2 == 0, rng);
                const double a = spec.kind == LyapunovKind::PowerLaw ? v->value(pt.x) : spec.v_plus->value(pt.x);
                const double b = spec.kind == LyapunovKind::PowerLaw ? a : spec.v_minus->value(pt.x);
                auto& st = slices[s];
                st.inf_plus = std::min(st.inf_plus, a);
                st.sup_plus = std::max(st.sup_plus, a);
                st.inf_minus = std::min(st.inf_minus, b);
                st.sup_minus = std::max(st.sup_minus, b);
            }
        }
        const Vec inner = Vec::Constant(p.d, radii.front() / std::sqrt(static_cast<double>(p.d)));
        if (spec.kind == LyapunovKind::PowerLaw) {
            // V -> infinity at the vertex: the innermost slice dominates the outermost.
            rep.add(inner, "V->inf", slices.front().inf_plus - slices.back().sup_plus);
        } else {
            rep.add(inner, "V+->0", slices.back().inf_plus - slices.front().sup_plus);
            rep.add(inner, "V-->0", slices.back().inf_minus - slices.front().sup_minus);
            double ratio_pm = std::numeric_limits<double>::infinity();
            double ratio_mp = std::numeric_limits<double>::infinity();
            for (const auto& st : slices) {
                ratio_pm = std::min(ratio_pm, st.inf_plus / st.sup_minus);
                ratio_mp = std::min(ratio_mp, st.inf_minus / st.sup_plus);
            }
            rep.add(inner, "inf V+/sup V-", ratio_pm);
            rep.add(inner, "inf V-/sup V+", ratio_mp);
            rep.metadata["ratio_plus_minus"] = format_double(ratio_pm);
            rep.metadata["ratio_minus_plus"] = format_double(ratio_mp);
        }
        rep.metadata["radius_slices"] = std::to_string(cfg.radius_slices);
    }
    rep.finalize();
    return rep;
}

}  // namespace orbm
