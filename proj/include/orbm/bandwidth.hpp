#pragma once

// Flow-level model of a bandwidth-sharing network under weighted
// alpha-fair allocation, its heavy-traffic parameterization and the
// rescaled workload process X^r(t) = r^{-1} A (M^r)^{-1} N^r(r^2 t).

#include "orbm/common.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace orbm {

class Infeasible : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class InconsistentLimit : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class RankDeficient : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

struct NetworkTopology {
    Mat A;   ///< d x m incidence (0/1)
    Vec C;   ///< capacities, length d
    Vec k;   ///< weights, length m
    Vec nu;  ///< arrival rates, length m
    Vec mu;  ///< document-size rates, length m
    double alpha = 2.0;

    int resources() const { return static_cast<int>(A.rows()); }
    int routes() const { return static_cast<int>(A.cols()); }
    Vec rho() const { return nu.cwiseQuotient(mu); }

    /// Checks shapes, positivity, rank d and that route j (j < d) is the
    /// dedicated single-resource route of resource j.
    void validate() const;
    /// max_j |(A rho)_j - C_j|.
    double heavy_traffic_gap() const;
};

/// d single-resource routes plus one route through every resource, with
/// nu = k = 1, mu_i = 1 (i < d), mu_d = mu, and capacities C = A rho so the
/// heavy-traffic identity holds exactly.
NetworkTopology example_topology(int d, double mu, double alpha);

struct Allocation {
    Vec lambda;            ///< per-route bandwidth, 0 on idle routes
    Vec prices;            ///< per-resource Lagrange multipliers
    double kkt_residual = 0.0;
    int iterations = 0;
};

enum class AllocationMethod { Auto, DualCoordinate, ExampleBisection };

/// Maximizer of sum_{i: n_i > 0} k_i n_i^alpha Lambda_i^{1-alpha} / (1-alpha)
/// (log-reward for alpha = 1) over Lambda >= 0, A Lambda <= C. Throws
/// Infeasible when capacities are not positive, NonConvergence when the KKT
/// residual does not reach `tol`.
Allocation fair_allocation(const Vec& n, const NetworkTopology& topo,
                           AllocationMethod method = AllocationMethod::Auto, double tol = 1e-10);

/// Primal feasibility, complementary slackness and stationarity residual.
double kkt_residual(const Vec& n, const NetworkTopology& topo, const Vec& lambda, const Vec& prices);

/// Reward G_n(Lambda); -inf if an active route has zero bandwidth.
double fair_reward(const Vec& n, const NetworkTopology& topo, const Vec& lambda);

struct HeavyTrafficRates {
    double r = 1.0;
    Vec nu_r;
    Vec mu_r;
    Vec drift;  ///< the target b
};

/// nu^r = nu + a / r with A diag(1/mu) a = b carried by the d dedicated
/// routes, mu^r = mu. Throws InconsistentLimit unless A rho = C within htol.
HeavyTrafficRates heavy_traffic_config(const NetworkTopology& topo, double r, const Vec& b,
                                       double htol = 1e-12);
/// Topology with nu, mu replaced by the per-r rates.
NetworkTopology at_scale(const NetworkTopology& topo, const HeavyTrafficRates& rates);
/// r (A rho^r - C).
Vec heavy_traffic_drift(const NetworkTopology& topo, const HeavyTrafficRates& rates);

struct JumpPath {
    std::vector<double> times;               ///< jump times, strictly increasing; times[0] = 0
    std::vector<std::vector<long>> states;   ///< N after each jump; states[0] = initial
    long arrivals = 0;
    long departures = 0;
    std::vector<long> arrivals_per_route;
    double horizon = 0.0;
};

struct CtmcOptions {
    double horizon = 1.0;
    long max_events = -1;          ///< stop after this many jumps when >= 0
    bool record = true;            ///< keep every jump in the JumpPath
    std::vector<long> initial;     ///< defaults to the empty network
};

/// Exact event-driven simulation: arrivals at rate nu_i, departures at rate
/// mu_i Lambda_i(N), allocation recomputed after every jump.
JumpPath ctmc_simulate(const NetworkTopology& topo, const CtmcOptions& opts, std::uint64_t seed);

/// Time average of each N_i over the simulated horizon.
Vec time_average_counts(const JumpPath& path);

struct ScaledWorkloadPath {
    double r = 1.0;
    std::vector<double> times;   ///< diffusion-scale sample times t
    std::vector<Vec> values;     ///< X^r(t)
    std::vector<std::vector<long>> counts;  ///< N^r(r^2 t) at the sample times
};

/// X = r^{-1} A (M^r)^{-1} N.
Vec scaled_workload(const std::vector<long>& counts, double r, const NetworkTopology& topo_r);

/// Runs the CTMC to r^2 T and samples X^r on `grid_points` equally spaced
/// times in [0, T] (memory does not grow with the number of jumps).
ScaledWorkloadPath sample_scaled_workload(const NetworkTopology& topo_r, double r, double T,
                                          int grid_points, std::uint64_t seed);

}  // namespace orbm
