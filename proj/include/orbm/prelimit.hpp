#pragma once

// Side-by-side statistics of the rescaled flow-level workload X^r and of the
// simulated reflected diffusion. Nothing here asserts convergence: the
// output is a table with Monte Carlo error bars and trend flags.

#include "orbm/bandwidth.hpp"
#include "orbm/sder.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace orbm {

struct CompareConfig {
    std::vector<double> r_list{10.0, 20.0, 40.0};
    Vec b;                 ///< target drift; zero when empty
    double horizon = 1.0;  ///< diffusion-scale time T
    int replications = 50;
    int grid_points = 101;
    double delta = 0.5;    ///< sphere for the first-hit statistic
    double collar = 0.05;  ///< relative distance to the boundary counted as "near"
    std::uint64_t seed = 1;
    /// ORBM reference; dt_rule is forced to Fixed with this dt.
    double orbm_dt = 1e-4;
    bool include_orbm = true;
};

struct StatRow {
    std::string source;  ///< "r=<r>" or "orbm"
    double r = 0.0;      ///< 0 for the diffusion
    std::string statistic;
    double value = 0.0;
    double std_error = 0.0;
};

struct CompareReport {
    std::vector<StatRow> rows;
    /// statistic -> whether |stat_r - stat_orbm| decreases along r_list.
    std::vector<std::pair<std::string, bool>> trends;
    /// r -> largest relative distance of a sample outside the cone.
    std::vector<std::pair<double, double>> membership_band;
    std::vector<std::string> notes;

    void write_csv(std::ostream& os) const;
    void write_text(std::ostream& os) const;
};

/// Cone of the example family matching `topo` (d single routes plus one
/// long route with rate mu); throws InvalidArgument for other shapes.
ConeParams example_cone_for(const NetworkTopology& topo);

CompareReport scaled_workload_compare(const NetworkTopology& topo, const CompareConfig& cfg, int threads = 1);

}  // namespace orbm
