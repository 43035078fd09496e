#include "orbm/bandwidth.hpp"
#include "orbm/prelimit.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace orbm;

namespace {

NetworkTopology unit_example(double alpha) {
    NetworkTopology t = example_topology(3, 1.0, alpha);
    t.C = Vec::Ones(3);
    return t;
}

double reward(const Vec& n, const NetworkTopology& t, const Vec& lambda) {
    double g = 0.0;
    for (int i = 0; i < t.routes(); ++i) {
        if (n[i] <= 0) continue;
        const double w = t.k[i] * std::pow(n[i], t.alpha);
        g += t.alpha == 1.0 ? w * std::log(lambda[i]) : w * std::pow(lambda[i], 1.0 - t.alpha) / (1.0 - t.alpha);
    }
    return g;
}

// Single long route plus dedicated routes: at the optimum every resource
// used by an active dedicated route is saturated, so the allocation is a
// function of the long route's share t. Grid search followed by golden
// section on t.
Vec grid_oracle(const Vec& n, const NetworkTopology& t) {
    const int d = t.resources();
    const double tmax = t.C.minCoeff();
    auto alloc = [&](double s) {
        Vec l = Vec::Zero(d + 1);
        for (int j = 0; j < d; ++j) l[j] = n[j] > 0 ? t.C[j] - s : 0.0;
        l[d] = s;
        return l;
    };
    auto value = [&](double s) { return reward(n, t, alloc(s)); };
    const int grid = 20000;
    int best = 1;
    for (int i = 1; i < grid; ++i) {
        if (value(tmax * i / grid) > value(tmax * best / grid)) best = i;
    }
    double a = tmax * (best - 1) / grid, b = tmax * std::min(best + 1, grid) / grid;
    const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int it = 0; it < 200; ++it) {
        const double c = b - phi * (b - a), e = a + phi * (b - a);
        (value(c) > value(e) ? b : a) = (value(c) > value(e) ? e : c);
    }
    return alloc(0.5 * (a + b));
}

double bisect_symmetric() {
    // 3 / l^2 = 1 / (1 - l)^2 on (0, 1)
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (3.0 / (mid * mid) > 1.0 / ((1 - mid) * (1 - mid)) ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("symmetric example allocation") {
    const auto t = unit_example(2.0);
    const auto a = fair_allocation(Vec::Ones(4), t);
    const double l = bisect_symmetric();
    CHECK(l == doctest::Approx(0.633975).epsilon(1e-6));
    for (int j = 0; j < 3; ++j) CHECK(std::abs(a.lambda[j] - l) < 1e-6);
    CHECK(std::abs(a.lambda[3] - (1.0 - l)) < 1e-6);
    CHECK(a.kkt_residual <= 1e-8);
    for (auto m : {AllocationMethod::DualCoordinate, AllocationMethod::ExampleBisection}) {
        const auto b = fair_allocation(Vec::Ones(4), t, m);
        CHECK((b.lambda - a.lambda).norm() < 1e-8);
    }
}

TEST_CASE("sole user takes the capacity") {
    const auto t = unit_example(2.0);
    Vec n = Vec::Zero(4);
    n[0] = 1;
    const auto a = fair_allocation(n, t);
    CHECK(a.lambda[0] == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(a.lambda.tail(3).isZero());
}

TEST_CASE("proportional fairness on two routes") {
    NetworkTopology t;
    t.A = Mat::Ones(1, 2);
    t.C = Vec::Ones(1);
    t.k = Vec::Ones(2);
    t.k[1] = 2.0;
    t.nu = Vec::Ones(2);
    t.mu = Vec::Ones(2);
    t.alpha = 1.0;
    const Vec n = Vec::Ones(2);
    const auto a = fair_allocation(n, t);
    const Vec oracle = grid_oracle(n, t);
    CHECK((a.lambda - oracle).lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK(a.lambda[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-8));
}

TEST_CASE("random instances: KKT, feasibility, grid oracle and homogeneity") {
    PathRng rng(8, 0);
    for (int inst = 0; inst < 100; ++inst) {
        NetworkTopology t = example_topology(3, 1.0, inst % 3 == 0 ? 1.0 : 1.0 + 2.0 * rng.uniform());
        for (int j = 0; j < 3; ++j) t.C[j] = 0.5 + 1.5 * rng.uniform();
        for (int i = 0; i < 4; ++i) t.k[i] = 0.5 + rng.uniform();
        Vec n(4);
        for (int i = 0; i < 3; ++i) n[i] = std::floor(6.0 * rng.uniform());
        n[3] = 1.0 + std::floor(5.0 * rng.uniform());
        const auto a = fair_allocation(n, t);
        CHECK(a.kkt_residual <= 1e-8);
        CHECK(kkt_residual(n, t, a.lambda, a.prices) <= 1e-8);
        CHECK(a.lambda.minCoeff() >= 0.0);
        CHECK(((t.A * a.lambda - t.C).array() <= 1e-10).all());
        CHECK((a.lambda - grid_oracle(n, t)).lpNorm<Eigen::Infinity>() < 1e-4);
        const auto scaled = fair_allocation(3.5 * n, t);
        CHECK((scaled.lambda - a.lambda).lpNorm<Eigen::Infinity>() < 1e-8);
        CHECK(fair_reward(n, t, a.lambda) == doctest::Approx(reward(n, t, a.lambda)).epsilon(1e-12));
    }
}

TEST_CASE("allocation errors") {
    auto t = unit_example(2.0);
    t.C[1] = 0.0;
    CHECK_THROWS_AS(fair_allocation(Vec::Ones(4), t), Infeasible);
}

TEST_CASE("heavy-traffic parameterization") {
    const auto t = example_topology(3, 3.0, 2.0);
    CHECK((t.C - Vec::Constant(3, 1.0 + 1.0 / 3.0)).norm() < 1e-15);
    CHECK(t.heavy_traffic_gap() < 1e-15);

    const auto zero = heavy_traffic_config(t, 50.0, Vec::Zero(3));
    CHECK(zero.nu_r == t.nu);

    const Vec b = Vec::Ones(3);
    const auto rates = heavy_traffic_config(t, 100.0, b);
    CHECK((heavy_traffic_drift(t, rates) - b).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK(rates.mu_r == t.mu);

    auto off = t;
    off.C[0] += 0.1;
    CHECK_THROWS_AS(heavy_traffic_config(off, 10.0, b), InconsistentLimit);
}

TEST_CASE("CTMC basics") {
    auto t = unit_example(2.0);
    CtmcOptions opts;
    opts.horizon = 50.0;
    auto still = t;
    still.nu = Vec::Zero(4);
    const auto p0 = ctmc_simulate(still, opts, 1);
    CHECK(p0.states.size() == 1);
    CHECK(p0.states.back() == std::vector<long>(4, 0));

    opts.initial = {2, 1, 0, 3};

    const auto a = ctmc_simulate(t, opts, 3);
    const auto b = ctmc_simulate(t, opts, 3);
    CHECK(a.times == b.times);
    CHECK(a.states == b.states);
    for (std::size_t i = 1; i < a.times.size(); ++i) CHECK(a.times[i] > a.times[i - 1]);
}

TEST_CASE("Poisson arrival counts") {
    auto t = unit_example(2.0);
    t.nu << 0.5, 1.0, 2.0, 0.25;
    CtmcOptions opts;
    opts.horizon = 2000.0;
    opts.record = false;
    const auto path = ctmc_simulate(t, opts, 4);
    for (int i = 0; i < 4; ++i) {
        const double expect = t.nu[i] * opts.horizon;
        CHECK(std::abs(path.arrivals_per_route[static_cast<std::size_t>(i)] - expect) <= 3.0 * std::sqrt(expect));
    }
}

TEST_CASE("M/M/1 reduction") {
    NetworkTopology t;
    t.A = Mat::Ones(1, 1);
    t.C = Vec::Ones(1);
    t.k = Vec::Ones(1);
    t.nu = Vec::Constant(1, 0.5);
    t.mu = Vec::Ones(1);
    CtmcOptions opts;
    opts.horizon = std::numeric_limits<double>::infinity();
    opts.max_events = 100000;
    const auto path = ctmc_simulate(t, opts, 5);
    const double rho = 0.5;
    CHECK(std::abs(time_average_counts(path)[0] - rho / (1 - rho)) <= 0.05 * rho / (1 - rho));
}

TEST_CASE("scaled workload follows the scaling formula") {
    const auto t = example_topology(3, 3.0, 2.0);
    const auto rates = heavy_traffic_config(t, 10.0, Vec::Ones(3));
    const auto tr = at_scale(t, rates);
    const auto path = sample_scaled_workload(tr, 10.0, 0.5, 11, 6);
    REQUIRE(path.values.size() == 11);
    for (std::size_t i = 0; i < path.values.size(); ++i) {
        Vec w(4);
        for (int r = 0; r < 4; ++r) w[r] = static_cast<double>(path.counts[i][static_cast<std::size_t>(r)]) / tr.mu[r];
        CHECK((path.values[i] - tr.A * w / 10.0).norm() <= 1e-15 * (1.0 + path.values[i].norm()));
        CHECK(path.values[i] == scaled_workload(path.counts[i], 10.0, tr));
    }
}

TEST_CASE("compare report is reproducible") {
    const auto t = example_topology(3, 3.0, 2.0);
    CompareConfig cfg;
    cfg.r_list = {5.0, 10.0};
    cfg.b = Vec::Ones(3);
    cfg.horizon = 0.2;
    cfg.replications = 4;
    cfg.grid_points = 11;
    cfg.orbm_dt = 1e-3;
    std::ostringstream a, b;
    scaled_workload_compare(t, cfg, 1).write_csv(a);
    scaled_workload_compare(t, cfg, 3).write_csv(b);
    CHECK(a.str() == b.str());
    CHECK(a.str().find("orbm") != std::string::npos);
}
