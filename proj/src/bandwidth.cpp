#include "orbm/bandwidth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace orbm {

void NetworkTopology::validate() const {
    const auto d = A.rows();
    const auto m = A.cols();
    if (d < 1 || m < d) throw InvalidArgument("NetworkTopology: need d >= 1 resources and m >= d routes");
    if (C.size() != d || k.size() != m || nu.size() != m || mu.size() != m) {
        throw InvalidArgument("NetworkTopology: vector sizes do not match the incidence matrix");
    }
    for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index i = 0; i < m; ++i) {
            if (A(j, i) != 0.0 && A(j, i) != 1.0) throw InvalidArgument("NetworkTopology: A must be 0/1");
        }
    }
    if ((k.array() <= 0.0).any()) throw InvalidArgument("NetworkTopology: weights must be positive");
    if ((mu.array() <= 0.0).any()) throw InvalidArgument("NetworkTopology: size rates must be positive");
    if ((nu.array() < 0.0).any()) throw InvalidArgument("NetworkTopology: arrival rates must be nonnegative");
    if (!(alpha > 0.0)) throw InvalidArgument("NetworkTopology: alpha must be positive");
    Eigen::FullPivLU<Mat> lu(A);
    if (lu.rank() != d) throw RankDeficient("NetworkTopology: incidence matrix does not have rank d");
    for (Eigen::Index j = 0; j < d; ++j) {
        for (Eigen::Index l = 0; l < d; ++l) {
            if (A(l, j) != (l == j ? 1.0 : 0.0)) {
                throw InvalidArgument("NetworkTopology: route j < d must be the dedicated route of resource j");
            }
        }
    }
}

double NetworkTopology::heavy_traffic_gap() const {
    return (A * rho() - C).cwiseAbs().maxCoeff();
}

NetworkTopology example_topology(int d, double mu, double alpha) {
    if (d < 1) throw InvalidArgument("example_topology: d must be >= 1");
    if (!(mu > 0.0)) throw InvalidArgument("example_topology: mu must be positive");
    NetworkTopology t;
    t.A = Mat::Zero(d, d + 1);
    for (int j = 0; j < d; ++j) {
        t.A(j, j) = 1.0;
        t.A(j, d) = 1.0;
    }
    t.k = Vec::Ones(d + 1);
    t.nu = Vec::Ones(d + 1);
    t.mu = Vec::Ones(d + 1);
    t.mu[d] = mu;
    t.alpha = alpha;
    t.C = t.A * t.rho();
    return t;
}

namespace {

Vec route_weights(const Vec& n, const NetworkTopology& topo) {
    Vec w = Vec::Zero(topo.routes());
    for (int i = 0; i < topo.routes(); ++i) {
        if (n[i] > 0.0) w[i] = topo.k[i] * std::pow(n[i], topo.alpha);
    }
    return w;
}

// Stationarity: w_i Lambda_i^{-alpha} = (A^T p)_i.
double lambda_from_price(double w, double y, double alpha) {
    if (w <= 0.0) return 0.0;
    if (y <= 0.0) return std::numeric_limits<double>::infinity();
    return std::pow(w / y, 1.0 / alpha);
}

bool is_example_shape(const NetworkTopology& topo) {
    const int d = topo.resources();
    if (topo.routes() != d + 1) return false;
    for (int j = 0; j < d; ++j) {
        if (topo.A(j, d) != 1.0) return false;
    }
    return true;
}

Allocation dual_coordinate(const Vec& n, const NetworkTopology& topo, double tol) {
    const int d = topo.resources();
    const int m = topo.routes();
    const double alpha = topo.alpha;
    const Vec w = route_weights(n, topo);

    std::vector<bool> used(static_cast<std::size_t>(d), false);
    for (int j = 0; j < d; ++j) {
        for (int i = 0; i < m; ++i) {
            if (w[i] > 0.0 && topo.A(j, i) != 0.0) used[static_cast<std::size_t>(j)] = true;
        }
    }
    Vec p = Vec::Zero(d);
    for (int j = 0; j < d; ++j) {
        if (used[static_cast<std::size_t>(j)]) p[j] = 1.0;
    }
    Vec y = topo.A.transpose() * p;

    auto load = [&](int j, double pj, double& dload) {
        double total = 0.0;
        dload = 0.0;
        for (int i = 0; i < m; ++i) {
            if (w[i] <= 0.0 || topo.A(j, i) == 0.0) continue;
            const double yi = y[i] - p[j] + pj;
            const double li = lambda_from_price(w[i], yi, alpha);
            total += li;
            dload -= li / (alpha * yi);
        }
        return total;
    };

    Allocation out;
    const int max_sweeps = 200000;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double worst = 0.0;
        for (int j = 0; j < d; ++j) {
            if (!used[static_cast<std::size_t>(j)]) continue;
            double dl = 0.0;
            double pj = p[j];
            if (load(j, 0.0, dl) <= topo.C[j]) {
                pj = 0.0;
            } else {
                // load(pj) is decreasing; Newton in log p with a bisection bracket.
                double lo = 0.0, hi = std::numeric_limits<double>::infinity();
                if (!(pj > 0.0)) pj = 1.0;
                for (int it = 0; it < 200; ++it) {
                    const double g = load(j, pj, dl) - topo.C[j];
                    if (g > 0.0) lo = pj; else hi = pj;
                    if (std::abs(g) <= 1e-15 * topo.C[j]) break;
                    double next = pj - g / dl;
                    if (!(next > lo && next < hi)) next = std::isinf(hi) ? 2.0 * pj + 1.0 : 0.5 * (lo + hi);
                    if (std::abs(next - pj) <= 1e-16 * pj) { pj = next; break; }
                    pj = next;
                }
            }
            if (pj != p[j]) {
                const double delta = pj - p[j];
                for (int i = 0; i < m; ++i) {
                    if (topo.A(j, i) != 0.0) y[i] += delta;
                }
                worst = std::max(worst, std::abs(delta) / std::max(pj, 1e-300));
                p[j] = pj;
            }
        }
        out.iterations = sweep + 1;
        Vec lambda = Vec::Zero(m);
        for (int i = 0; i < m; ++i) lambda[i] = lambda_from_price(w[i], y[i], alpha);
        const double res = kkt_residual(n, topo, lambda, p);
        if (res <= tol || worst <= 1e-15) {
            out.lambda = lambda;
            out.prices = p;
            out.kkt_residual = res;
            if (res > std::max(tol, 1e-8)) break;
            return out;
        }
    }
    throw NonConvergence("fair_allocation: dual coordinate descent did not reach the KKT tolerance");
}

Allocation example_bisection(const Vec& n, const NetworkTopology& topo, double tol) {
    const int d = topo.resources();
    const double alpha = topo.alpha;
    const Vec w = route_weights(n, topo);
    Allocation out;
    out.lambda = Vec::Zero(d + 1);
    out.prices = Vec::Zero(d);

    if (w[d] <= 0.0) {
        for (int j = 0; j < d; ++j) {
            if (w[j] > 0.0) {
                out.lambda[j] = topo.C[j];
                out.prices[j] = w[j] * std::pow(topo.C[j], -alpha);
            }
        }
        out.kkt_residual = kkt_residual(n, topo, out.lambda, out.prices);
        return out;
    }

    const double cmin = topo.C.minCoeff();
    // h(L) = w_L L^{-alpha} - sum_{active j} w_j (C_j - L)^{-alpha}, decreasing on (0, cmin).
    auto h = [&](double L) {
        double v = w[d] * std::pow(L, -alpha);
        for (int j = 0; j < d; ++j) {
            if (w[j] > 0.0) v -= w[j] * std::pow(topo.C[j] - L, -alpha);
        }
        return v;
    };
    double lo = 0.0, hi = cmin;
    double L = cmin;
    bool capped = true;
    bool min_active = false;
    for (int j = 0; j < d; ++j) {
        if (w[j] > 0.0 && topo.C[j] == cmin) min_active = true;
    }
    if (min_active || h(cmin) < 0.0) {
        capped = false;
        for (int it = 0; it < 2000 && hi - lo > 1e-17 * cmin; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (h(mid) > 0.0) lo = mid; else hi = mid;
        }
        L = 0.5 * (lo + hi);
    }
    out.lambda[d] = L;
    double active_price = 0.0;
    for (int j = 0; j < d; ++j) {
        if (w[j] > 0.0) {
            out.lambda[j] = topo.C[j] - L;
            out.prices[j] = w[j] * std::pow(out.lambda[j], -alpha);
            active_price += out.prices[j];
        }
    }
    if (capped) {
        const double leftover = w[d] * std::pow(L, -alpha) - active_price;
        for (int j = 0; j < d; ++j) {
            if (w[j] <= 0.0 && topo.C[j] == cmin) {
                out.prices[j] = std::max(leftover, 0.0);
                break;
            }
        }
    }
    out.iterations = 1;
    out.kkt_residual = kkt_residual(n, topo, out.lambda, out.prices);
    if (out.kkt_residual > std::max(tol, 1e-8)) {
        throw NonConvergence("fair_allocation: bisection did not reach the KKT tolerance");
    }
    return out;
}

}  // namespace

double kkt_residual(const Vec& n, const NetworkTopology& topo, const Vec& lambda, const Vec& prices) {
    const int d = topo.resources();
    const int m = topo.routes();
    const Vec w = route_weights(n, topo);
    const Vec loads = topo.A * lambda;
    const Vec y = topo.A.transpose() * prices;
    double res = 0.0;
    for (int j = 0; j < d; ++j) {
        res = std::max(res, (loads[j] - topo.C[j]) / topo.C[j]);
        res = std::max(res, -prices[j]);
        const double slack = (topo.C[j] - loads[j]) / topo.C[j];
        res = std::max(res, std::abs(prices[j] * slack) / std::max(1.0, prices[j]));
    }
    for (int i = 0; i < m; ++i) {
        if (w[i] > 0.0) {
            if (!(lambda[i] > 0.0)) return std::numeric_limits<double>::infinity();
            const double marginal = w[i] * std::pow(lambda[i], -topo.alpha);
            res = std::max(res, std::abs(marginal - y[i]) / std::max(marginal, y[i]));
        } else {
            res = std::max(res, std::abs(lambda[i]));
        }
    }
    return res;
}

double fair_reward(const Vec& n, const NetworkTopology& topo, const Vec& lambda) {
    double g = 0.0;
    for (int i = 0; i < topo.routes(); ++i) {
        if (!(n[i] > 0.0)) continue;
        if (!(lambda[i] > 0.0)) return -std::numeric_limits<double>::infinity();
        if (topo.alpha == 1.0) {
            g += topo.k[i] * n[i] * std::log(lambda[i]);
        } else {
            g += topo.k[i] * std::pow(n[i], topo.alpha) * std::pow(lambda[i], 1.0 - topo.alpha) /
                 (1.0 - topo.alpha);
        }
    }
    return g;
}

Allocation fair_allocation(const Vec& n, const NetworkTopology& topo, AllocationMethod method, double tol) {
    if (n.size() != topo.routes()) throw InvalidArgument("fair_allocation: n has wrong size");
    if ((n.array() < 0.0).any()) throw InvalidArgument("fair_allocation: counts must be nonnegative");
    if ((topo.C.array() <= 0.0).any()) throw Infeasible("fair_allocation: capacities must be positive");
    if (!(n.array() > 0.0).any()) {
        return {Vec::Zero(topo.routes()), Vec::Zero(topo.resources()), 0.0, 0};
    }
    if (method == AllocationMethod::ExampleBisection ||
        (method == AllocationMethod::Auto && is_example_shape(topo))) {
        if (!is_example_shape(topo)) {
            throw InvalidArgument("fair_allocation: bisection requires the single-long-route topology");
        }
        return example_bisection(n, topo, tol);
    }
    return dual_coordinate(n, topo, tol);
}

HeavyTrafficRates heavy_traffic_config(const NetworkTopology& topo, double r, const Vec& b, double htol) {
    if (!(r > 0.0)) throw InvalidArgument("heavy_traffic_config: r must be positive");
    if (b.size() != topo.resources()) throw InvalidArgument("heavy_traffic_config: b has wrong size");
    const double scale = std::max(1.0, topo.C.cwiseAbs().maxCoeff());
    if (topo.heavy_traffic_gap() > htol * scale) {
        throw InconsistentLimit("heavy_traffic_config: limiting rates violate A rho = C");
    }
    HeavyTrafficRates out;
    out.r = r;
    out.drift = b;
    out.mu_r = topo.mu;
    out.nu_r = topo.nu;
    for (int j = 0; j < topo.resources(); ++j) out.nu_r[j] += topo.mu[j] * b[j] / r;
    if ((out.nu_r.array() < 0.0).any()) {
        throw InvalidArgument("heavy_traffic_config: drift makes an arrival rate negative at this r");
    }
    return out;
}

NetworkTopology at_scale(const NetworkTopology& topo, const HeavyTrafficRates& rates) {
    NetworkTopology t = topo;
    t.nu = rates.nu_r;
    t.mu = rates.mu_r;
    return t;
}

Vec heavy_traffic_drift(const NetworkTopology& topo, const HeavyTrafficRates& rates) {
    const Vec rho_r = rates.nu_r.cwiseQuotient(rates.mu_r);
    return rates.r * (topo.A * rho_r - topo.C);
}

namespace {

template <class OnJump>
void run_ctmc(const NetworkTopology& topo, double horizon, long max_events, std::vector<long> state,
              std::uint64_t seed, OnJump&& on_jump) {
    const int m = topo.routes();
    PathRng rng(seed, 0);
    Vec counts(m);
    std::vector<double> rates(static_cast<std::size_t>(2 * m));
    double t = 0.0;
    long events = 0;
    while (max_events < 0 || events < max_events) {
        for (int i = 0; i < m; ++i) counts[i] = static_cast<double>(state[static_cast<std::size_t>(i)]);
        const Allocation alloc = fair_allocation(counts, topo);
        double total = 0.0;
        for (int i = 0; i < m; ++i) {
            rates[static_cast<std::size_t>(i)] = topo.nu[i];
            rates[static_cast<std::size_t>(m + i)] = state[static_cast<std::size_t>(i)] > 0 ? topo.mu[i] * alloc.lambda[i] : 0.0;
            total += rates[static_cast<std::size_t>(i)] + rates[static_cast<std::size_t>(m + i)];
        }
        if (!(total > 0.0)) break;
        const double dt = rng.exponential(total);
        if (t + dt > horizon) break;
        t += dt;
        double u = rng.uniform() * total;
        std::size_t ev = 0;
        for (; ev + 1 < rates.size(); ++ev) {
            if (u < rates[ev]) break;
            u -= rates[ev];
        }
        // Guard against round-off selecting a zero-rate event.
        while (rates[ev] <= 0.0 && ev > 0) --ev;
        const int route = static_cast<int>(ev % static_cast<std::size_t>(m));
        const bool arrival = ev < static_cast<std::size_t>(m);
        state[static_cast<std::size_t>(route)] += arrival ? 1 : -1;
        ++events;
        on_jump(t, route, arrival, state);
    }
}

}  // namespace

JumpPath ctmc_simulate(const NetworkTopology& topo, const CtmcOptions& opts, std::uint64_t seed) {
    topo.validate();
    const int m = topo.routes();
    std::vector<long> init = opts.initial.empty() ? std::vector<long>(static_cast<std::size_t>(m), 0) : opts.initial;
    if (static_cast<int>(init.size()) != m) throw InvalidArgument("ctmc_simulate: initial state has wrong size");
    JumpPath path;
    path.horizon = opts.horizon;
    path.arrivals_per_route.assign(static_cast<std::size_t>(m), 0);
    path.times.push_back(0.0);
    path.states.push_back(init);
    double last = 0.0;
    std::vector<long> last_state = init;
    run_ctmc(topo, opts.horizon, opts.max_events, init, seed,
             [&](double t, int route, bool arrival, const std::vector<long>& s) {
                 if (arrival) {
                     ++path.arrivals;
                     ++path.arrivals_per_route[static_cast<std::size_t>(route)];
                 } else {
                     ++path.departures;
                 }
                 last = t;
                 last_state = s;
                 if (opts.record) {
                     path.times.push_back(t);
                     path.states.push_back(s);
                 }
             });
    if (!opts.record && path.times.back() != last) {
        path.times.push_back(last);
        path.states.push_back(last_state);
    }
    if (opts.max_events >= 0 && path.arrivals + path.departures >= opts.max_events) path.horizon = last;
    return path;
}

Vec time_average_counts(const JumpPath& path) {
    if (path.states.empty()) return {};
    const auto m = static_cast<Eigen::Index>(path.states.front().size());
    Vec acc = Vec::Zero(m);
    for (std::size_t k = 0; k < path.times.size(); ++k) {
        const double end = k + 1 < path.times.size() ? path.times[k + 1] : path.horizon;
        const double dt = std::max(0.0, end - path.times[k]);
        for (Eigen::Index i = 0; i < m; ++i) acc[i] += dt * static_cast<double>(path.states[k][static_cast<std::size_t>(i)]);
    }
    return path.horizon > 0.0 ? Vec(acc / path.horizon) : acc;
}

Vec scaled_workload(const std::vector<long>& counts, double r, const NetworkTopology& topo_r) {
    Vec w(topo_r.routes());
    for (int i = 0; i < topo_r.routes(); ++i) w[i] = static_cast<double>(counts[static_cast<std::size_t>(i)]) / topo_r.mu[i];
    return topo_r.A * w / r;
}

ScaledWorkloadPath sample_scaled_workload(const NetworkTopology& topo_r, double r, double T, int grid_points,
                                          std::uint64_t seed) {
    topo_r.validate();
    if (grid_points < 2) throw InvalidArgument("sample_scaled_workload: need at least two grid points");
    ScaledWorkloadPath out;
    out.r = r;
    const int m = topo_r.routes();
    std::vector<long> state(static_cast<std::size_t>(m), 0);
    const double real_horizon = r * r * T;
    std::size_t next = 0;
    auto grid_time = [&](std::size_t g) { return T * static_cast<double>(g) / (grid_points - 1); };
    auto emit_until = [&](double real_t, const std::vector<long>& s) {
        while (next < static_cast<std::size_t>(grid_points) && r * r * grid_time(next) < real_t) {
            out.times.push_back(grid_time(next));
            out.values.push_back(scaled_workload(s, r, topo_r));
            out.counts.push_back(s);
            ++next;
        }
    };
    run_ctmc(topo_r, real_horizon, -1, state, seed,
             [&](double t, int, bool, const std::vector<long>& s) {
                 emit_until(t, state);
                 state = s;
             });
    emit_until(std::numeric_limits<double>::infinity(), state);
    return out;
}

}  // namespace orbm
