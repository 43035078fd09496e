#include "orbm/sder.hpp"

#include "orbm/ensemble.hpp"
#include "orbm/report.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>

namespace orbm {

namespace {

constexpr int kMaxDim = 32;

using Buf = std::array<double, kMaxDim>;

double norm(const double* v, int d) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) s += v[j] * v[j];
    return std::sqrt(s);
}

// alpha = 2: on [y_(k+1), y_(k)] (descending order) the equation is the
// quadratic (k - mu^4) c^2 - 2 S1 c + S2 = 0 over the top k entries.
bool quadratic_level(const double* y, int d, const ConeParams& p, double& out) {
    Buf sorted;
    std::copy(y, y + d, sorted.begin());
    std::sort(sorted.begin(), sorted.begin() + d, std::greater<>());
    const double mu4 = p.mu * p.mu * p.mu * p.mu;
    double s1 = 0.0, s2 = 0.0;
    for (int k = 1; k <= d; ++k) {
        const double v = sorted[k - 1];
        if (v <= 0.0) break;
        s1 += v;
        s2 += v * v;
        const double a = k - mu4;
        const double disc = s1 * s1 - a * s2;
        if (disc < 0.0) continue;
        const double c = s2 / (s1 + std::sqrt(disc));
        const double below = k < d ? sorted[k] : -std::numeric_limits<double>::infinity();
        if (c <= v && c >= below) {
            out = c;
            return true;
        }
    }
    return false;
}

double general_level(const double* y, int d, const ConeParams& p) {
    const double a = p.alpha;
    const double m2 = p.mu * p.mu;
    double hi = *std::max_element(y, y + d);
    double lo = 0.0;
    auto eval = [&](double c, double& dpsi) {
        double psi = -std::pow(m2 * c, a);
        dpsi = -a * m2 * std::pow(m2 * c, a - 1.0);
        for (int j = 0; j < d; ++j) {
            const double t = y[j] - c;
            if (t > 0.0) {
                const double tp = std::pow(t, a - 1.0);
                psi += tp * t;
                dpsi -= a * tp;
            }
        }
        return psi;
    };
    double c = 0.5 * hi;
    for (int it = 0; it < p.max_iter; ++it) {
        double dpsi = 0.0;
        const double psi = eval(c, dpsi);
        if (psi == 0.0) return c;
        if (psi > 0.0) {
            lo = c;
        } else {
            hi = c;
        }
        double next = (dpsi < 0.0 && std::isfinite(dpsi)) ? c - psi / dpsi : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - c) <= p.invert_tol * next || hi - lo <= p.invert_tol * hi) return next;
        c = next;
    }
    throw NonConvergence("push_level: root-find exceeded max_iter");
}

}  // namespace

double push_level(const double* y, int d, const ConeParams& p) {
    if (*std::max_element(y, y + d) <= 0.0) return 0.0;
    if (p.alpha == 2.0) {
        double c = 0.0;
        if (quadratic_level(y, d, p, c)) return c;
    }
    return general_level(y, d, p);
}

int skorokhod_correct(double* y, double* push, int d, const ConeParams& p) {
    const double c = push_level(y, d, p);
    int pushed = 0;
    for (int j = 0; j < d; ++j) {
        if (y[j] < c) {
            push[j] = c - y[j];
            y[j] = c;
            ++pushed;
        } else {
            push[j] = 0.0;
        }
    }
    return pushed;
}

void SimConfig::validate() const {
    if (!(dt_max > 0.0)) throw InvalidArgument("SimConfig: dt_max must be > 0");
    if (!(origin_eps > 0.0)) throw InvalidArgument("SimConfig: origin_eps must be > 0");
    if (dt_rule == DtRule::RadiusScaled) {
        if (!(kappa > 0.0)) throw InvalidArgument("SimConfig: kappa must be > 0");
        if (!(dt_min > 0.0) || dt_min > dt_max) throw InvalidArgument("SimConfig: need 0 < dt_min <= dt_max");
    }
    if (max_steps < 1) throw InvalidArgument("SimConfig: max_steps must be >= 1");
    if (max_reflect_iter < 0) throw InvalidArgument("SimConfig: max_reflect_iter must be >= 0");
}

double SimConfig::step_size(double radius) const {
    if (dt_rule == DtRule::Fixed) return dt_max;
    return std::clamp(kappa * radius * radius, dt_min, dt_max);
}

namespace {

struct Kernel {
    int d;
    Buf b{};
    std::array<double, kMaxDim * kMaxDim> sigma{};  // row-major
    double drift_norm = 0.0;

    Kernel(const DiffusionParams& dp, int dim) : d(dim) {
        for (int i = 0; i < d; ++i) {
            b[i] = dp.b[i];
            for (int j = 0; j < d; ++j) sigma[i * d + j] = dp.sigma(i, j);
        }
        drift_norm = dp.b.norm();
    }

    // y = x + b dt + sigma dw
    void euler(const double* x, double dt, const double* dw, double* y) const {
        for (int i = 0; i < d; ++i) {
            double acc = x[i] + b[i] * dt;
            const double* row = &sigma[i * d];
            for (int j = 0; j < d; ++j) acc += row[j] * dw[j];
            y[i] = acc;
        }
    }
};

void check_inputs(const ConeParams& p, const DiffusionParams& dp) {
    p.validate();
    dp.validate(p.d);
}

}  // namespace

ReflectResult reflect_step(const Vec& x, double dt, const Vec& xi, const ConeParams& p, const DiffusionParams& dp) {
    check_inputs(p, dp);
    if (x.size() != p.d || xi.size() != p.d) throw InvalidArgument("reflect_step: dimension mismatch");
    if (!(dt > 0.0)) throw InvalidArgument("reflect_step: dt must be > 0");
    const Kernel k(dp, p.d);
    const Vec dw = std::sqrt(dt) * xi;
    ReflectResult out;
    out.y.resize(p.d);
    out.push.resize(p.d);
    k.euler(x.data(), dt, dw.data(), out.y.data());
    if (out.y.maxCoeff() <= 0.0 && x.norm() > p.vertex_tol) {
        throw ReflectionDiverged("reflect_step: step lands past the vertex; dt too large for |x|");
    }
    out.iterations = skorokhod_correct(out.y.data(), out.push.data(), p.d, p) > 0 ? 1 : 0;
    return out;
}

PathRecord simulate_path(const Vec& x0, const StopSpec& stop, const SimConfig& cfg, const ConeParams& p,
                         const DiffusionParams& dp, std::uint64_t path_index) {
    PathRng rng(cfg.seed, path_index);
    return simulate_path(x0, stop, cfg, p, dp, rng);
}

PathRecord simulate_path(const Vec& x0, const StopSpec& stop, const SimConfig& cfg, const ConeParams& p,
                         const DiffusionParams& dp, PathRng& rng) {
    check_inputs(p, dp);
    cfg.validate();
    const int d = p.d;
    if (x0.size() != d) throw InvalidArgument("simulate_path: x0 has wrong dimension");
    if (!in_cone(x0, p)) throw OutsideCone("simulate_path: x0 is outside the cone");
    for (double r : stop.radii) {
        if (!(r > 0.0)) throw InvalidArgument("simulate_path: stop radii must be > 0");
    }
    if (stop.radii.empty() && !stop.stop_on_origin && !std::isfinite(stop.t_max)) {
        throw InvalidArgument("simulate_path: no stopping rule");
    }

    const Kernel kern(dp, d);
    std::vector<double> radii = stop.radii;
    std::sort(radii.begin(), radii.end());
    radii.erase(std::unique(radii.begin(), radii.end()), radii.end());
    const std::size_t n_radii = radii.size();

    PathRecord rec;
    rec.drift_norm = kern.drift_norm;
    Buf x{}, y{}, dw{}, push{}, lt{};
    std::copy(x0.data(), x0.data() + d, x.begin());
    double r = norm(x.data(), d);
    double t = 0.0;

    std::vector<int> side(n_radii);  // -1 inside, +1 outside
    std::vector<bool> hit(n_radii, false);
    std::size_t remaining = n_radii;
    for (std::size_t i = 0; i < n_radii; ++i) {
        if (r == radii[i]) {
            hit[i] = true;
            --remaining;
            rec.tau_hits[radii[i]] = 0.0;
            rec.hit_points[radii[i]] = x0;
        }
        side[i] = r < radii[i] ? -1 : 1;
    }

    auto record_state = [&] {
        if (!stop.record_path) return;
        rec.times.push_back(t);
        rec.states.emplace_back(Eigen::Map<const Vec>(x.data(), d));
        rec.local_time.emplace_back(Eigen::Map<const Vec>(lt.data(), d));
    };
    record_state();

    bool inside_ball = r <= cfg.origin_eps;
    bool done = remaining == 0 && n_radii > 0;
    if (done) rec.reason = StopReason::AllRadiiHit;

    // Pending Brownian increments (dt, depth, dw) created by bridge splits.
    struct Pending {
        double dt;
        int depth;
        Buf dw;
    };
    std::vector<Pending> pending;

    while (!done) {
        if (t >= stop.t_max) {
            rec.reason = StopReason::TimeLimit;
            break;
        }
        if (rec.steps >= cfg.max_steps) throw MaxSteps("simulate_path: max_steps exceeded");

        double dt;
        int depth;
        if (!pending.empty()) {
            dt = pending.back().dt;
            depth = pending.back().depth;
            dw = pending.back().dw;
            pending.pop_back();
        } else {
            dt = cfg.step_size(r);
            if (t + dt > stop.t_max) dt = stop.t_max - t;
            depth = 0;
            const double sq = std::sqrt(dt);
            for (int j = 0; j < d; ++j) dw[j] = sq * rng.normal();
        }

        kern.euler(x.data(), dt, dw.data(), y.data());
        const bool past_vertex = *std::max_element(y.begin(), y.begin() + d) <= 0.0 && r > p.vertex_tol;
        if (past_vertex && depth >= cfg.max_reflect_iter) ++rec.vertex_snaps;
        if (past_vertex && depth < cfg.max_reflect_iter) {
            // W(dt/2) given W(dt) = dw is N(dw/2, dt/4).
            Pending second{0.5 * dt, depth + 1, {}};
            Pending first{0.5 * dt, depth + 1, {}};
            const double sd = 0.5 * std::sqrt(dt);
            for (int j = 0; j < d; ++j) {
                first.dw[j] = 0.5 * dw[j] + sd * rng.normal();
                second.dw[j] = dw[j] - first.dw[j];
            }
            pending.push_back(second);
            pending.push_back(first);
            ++rec.refinements;
            continue;
        }
        skorokhod_correct(y.data(), push.data(), d, p);
        for (int j = 0; j < d; ++j) lt[j] += push[j];

        if (remaining > 0 && inside_ball) {
            ++rec.vertex_steps;
            rec.vertex_time += dt;
        }
        ++rec.steps;
        const double r_new = norm(y.data(), d);
        const double t_new = t + dt;

        for (std::size_t i = 0; i < n_radii; ++i) {
            if (hit[i]) continue;
            const double R = radii[i];
            const bool crossed = side[i] < 0 ? r_new >= R : r_new <= R;
            if (!crossed) continue;
            hit[i] = true;
            --remaining;
            double theta = 1.0;
            Vec point = Eigen::Map<const Vec>(y.data(), d);
            if (cfg.interpolate_crossings && r_new != r) {
                theta = std::clamp((R - r) / (r_new - r), 0.0, 1.0);
                Vec z(d);
                for (int j = 0; j < d; ++j) z[j] = x[j] + theta * (y[j] - x[j]);
                const double zn = z.norm();
                if (zn > 0.0) {
                    z *= R / zn;
                    if (in_cone(z, p)) point = z;
                }
            }
            rec.tau_hits[R] = t + theta * dt;
            rec.hit_points[R] = point;
        }

        std::copy(y.begin(), y.begin() + d, x.begin());
        t = t_new;
        r = r_new;
        record_state();

        const bool now_inside = r <= cfg.origin_eps;
        if (now_inside && !inside_ball && !rec.theta_proxy) {
            rec.theta_proxy = t;
            if (stop.stop_on_origin) {
                rec.reason = StopReason::OriginProxy;
                break;
            }
        }
        inside_ball = now_inside;
        if (n_radii > 0 && remaining == 0) {
            rec.reason = StopReason::AllRadiiHit;
            done = true;
        }
    }

    rec.final_time = t;
    rec.final_state = Eigen::Map<const Vec>(x.data(), d);
    rec.total_local_time = Eigen::Map<const Vec>(lt.data(), d);
    return rec;
}

double exit_time_bound(double delta, const DiffusionParams& dp) {
    const Eigen::Index d = dp.sigma.rows();
    const Vec e = Vec::Ones(d) / std::sqrt(static_cast<double>(d));
    const double s = (dp.sigma.transpose() * e).squaredNorm();
    return 2.0 * delta * delta / s;
}

namespace {

struct PathOutcome {
    bool failed = false;
    bool flag = false;
    double value = 0.0;
};

void mean_and_stderr(const std::vector<double>& v, double& mean, double& se) {
    mean = 0.0;
    se = 0.0;
    if (v.empty()) return;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) return;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

}  // namespace

ExitEstimate mean_exit_from_origin(double delta, long n_paths, const SimConfig& cfg, const ConeParams& p,
                                   const DiffusionParams& dp, int threads) {
    if (!(delta > 0.0 && delta < 4.0)) throw InvalidArgument("mean_exit_from_origin: need 0 < delta < 4");
    if (n_paths < 1) throw InvalidArgument("mean_exit_from_origin: n_paths must be >= 1");
    StopSpec stop;
    stop.radii = {delta};
    stop.stop_on_origin = false;
    const Vec x0 = Vec::Zero(p.d);
    auto outcomes = parallel_map(static_cast<std::size_t>(n_paths), threads, [&](std::size_t i) {
        PathOutcome o;
        try {
            const PathRecord rec = simulate_path(x0, stop, cfg, p, dp, i);
            o.value = rec.tau_hits.at(delta);
        } catch (const NumericalError&) {
            o.failed = true;
        }
        return o;
    });
    ExitEstimate est;
    est.n_paths = n_paths;
    est.bound = exit_time_bound(delta, dp);
    for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].failed) {
            ++est.failed;
        } else {
            est.samples.push_back(outcomes[i].value);
            est.sample_paths.push_back(i);
        }
    }
    mean_and_stderr(est.samples, est.mean, est.std_error);
    return est;
}

SmallBallEstimate small_ball_probability(const Vec& x0, double eps, double delta, long n_paths,
                                         const SimConfig& cfg, const ConeParams& p, const DiffusionParams& dp,
                                         int threads) {
    const double r0 = x0.norm();
    if (!(eps > 0.0 && eps < r0 && r0 < delta)) {
        throw InvalidArgument("small_ball_probability: need 0 < eps < |x0| < delta");
    }
    if (n_paths < 1) throw InvalidArgument("small_ball_probability: n_paths must be >= 1");
    SimConfig c = cfg;
    c.origin_eps = eps;
    StopSpec stop;
    stop.radii = {delta};
    stop.stop_on_origin = true;
    auto outcomes = parallel_map(static_cast<std::size_t>(n_paths), threads, [&](std::size_t i) {
        PathOutcome o;
        try {
            const PathRecord rec = simulate_path(x0, stop, c, p, dp, i);
            o.flag = rec.reason == StopReason::OriginProxy;
        } catch (const NumericalError&) {
            o.failed = true;
        }
        return o;
    });
    SmallBallEstimate est;
    est.n_paths = n_paths;
    for (const auto& o : outcomes) {
        if (o.failed) {
            ++est.failed;
        } else if (o.flag) {
            ++est.hits;
        }
    }
    const double n = static_cast<double>(n_paths - est.failed);
    if (n > 0) {
        est.probability = static_cast<double>(est.hits) / n;
        est.std_error = std::sqrt(est.probability * (1.0 - est.probability) / n);
    }
    return est;
}

PathRecord rescale_path(const PathRecord& rec, int n) {
    if (rec.drift_norm != 0.0) throw DriftNotZero("rescale_path: the scaling law requires b = 0");
    const double space = std::ldexp(1.0, 2 * n);
    const double time = std::ldexp(1.0, 4 * n);
    PathRecord out = rec;
    for (auto& t : out.times) t *= time;
    for (auto& s : out.states) s *= space;
    for (auto& l : out.local_time) l *= space;
    out.tau_hits.clear();
    out.hit_points.clear();
    for (const auto& [radius, tau] : rec.tau_hits) out.tau_hits[radius * space] = tau * time;
    for (const auto& [radius, point] : rec.hit_points) out.hit_points[radius * space] = point * space;
    if (rec.theta_proxy) out.theta_proxy = *rec.theta_proxy * time;
    out.total_local_time = rec.total_local_time * space;
    out.final_state = rec.final_state * space;
    out.final_time = rec.final_time * time;
    out.vertex_time = rec.vertex_time * time;
    return out;
}

void write_path_csv(std::ostream& os, const PathRecord& rec) {
    const Eigen::Index d = rec.states.empty() ? rec.final_state.size() : rec.states.front().size();
    os << "t";
    for (Eigen::Index j = 1; j <= d; ++j) os << ",x" << j;
    for (Eigen::Index j = 1; j <= d; ++j) os << ",lt" << j;
    os << '\n';
    for (std::size_t i = 0; i < rec.times.size(); ++i) {
        os << format_double(rec.times[i]);
        for (Eigen::Index j = 0; j < d; ++j) os << ',' << format_double(rec.states[i][j]);
        for (Eigen::Index j = 0; j < d; ++j) os << ',' << format_double(rec.local_time[i][j]);
        os << '\n';
    }
}

}  // namespace orbm
