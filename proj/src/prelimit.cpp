#include "orbm/prelimit.hpp"

#include "orbm/ensemble.hpp"
#include "orbm/generator.hpp"
#include "orbm/report.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

namespace orbm {

ConeParams example_cone_for(const NetworkTopology& topo) {
    topo.validate();
    const int d = topo.resources();
    bool ok = topo.routes() == d + 1 && topo.A.col(d).isOnes();
    for (int i = 0; ok && i < d; ++i) ok = topo.mu[i] == 1.0 && topo.nu[i] == 1.0 && topo.k[i] == 1.0;
    ok = ok && topo.nu[d] == 1.0 && topo.k[d] == 1.0;
    if (!ok) throw InvalidArgument("example_cone_for: topology is not of the single-long-route example form");
    ConeParams p;
    p.d = d;
    p.alpha = topo.alpha;
    p.mu = topo.mu[d];
    return p;
}

namespace {

struct PathStats {
    Vec final_value;
    bool hit = false;
    double collar_fraction = 0.0;
    double outside = 0.0;
};

// Relative signed distance to the boundary along the coordinate floors:
// min_j (x_j - s/mu^2) / |x|, negative outside the cone.
double boundary_margin(const Vec& x, const ConeParams& p) {
    const double n = x.norm();
    if (n == 0.0) return 0.0;
    const double s = scale_root(x, p);
    return (x.array() - s * p.inv_mu2()).minCoeff() / n;
}

PathStats summarize(const std::vector<Vec>& values, const CompareConfig& cfg, const ConeParams& p) {
    PathStats st;
    st.final_value = values.back();
    long near = 0;
    for (const Vec& x : values) {
        if (x.norm() >= cfg.delta) st.hit = true;
        const double m = boundary_margin(x, p);
        if (m <= cfg.collar) ++near;
        st.outside = std::max(st.outside, -m);
    }
    st.collar_fraction = static_cast<double>(near) / static_cast<double>(values.size());
    return st;
}

void mean_se(const std::vector<double>& v, double& mean, double& se) {
    mean = 0.0;
    se = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    if (v.size() < 2) return;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

void add_rows(CompareReport& rep, const std::string& source, double r, const std::vector<PathStats>& stats, int d) {
    std::vector<double> v;
    double m = 0.0, se = 0.0;
    for (int j = 0; j < d; ++j) {
        v.clear();
        for (const auto& s : stats) v.push_back(s.final_value[j]);
        mean_se(v, m, se);
        rep.rows.push_back({source, r, "mean_x" + std::to_string(j + 1) + "_at_T", m, se});
    }
    v.clear();
    for (const auto& s : stats) v.push_back(s.hit ? 1.0 : 0.0);
    mean_se(v, m, se);
    rep.rows.push_back({source, r, "hit_fraction", m, se});
    v.clear();
    for (const auto& s : stats) v.push_back(s.collar_fraction);
    mean_se(v, m, se);
    rep.rows.push_back({source, r, "collar_occupation", m, se});
}

}  // namespace

CompareReport scaled_workload_compare(const NetworkTopology& topo, const CompareConfig& cfg, int threads) {
    topo.validate();
    if (cfg.r_list.empty()) throw InvalidArgument("compare: r_list is empty");
    if (cfg.replications < 1) throw InvalidArgument("compare: replications must be >= 1");
    if (!(cfg.horizon > 0.0)) throw InvalidArgument("compare: horizon must be > 0");
    const int d = topo.resources();
    const Vec b = cfg.b.size() == 0 ? Vec::Zero(d) : cfg.b;
    if (b.size() != d) throw InvalidArgument("compare: drift has wrong dimension");
    const ConeParams p = example_cone_for(topo);

    CompareReport rep;
    rep.notes.push_back("report only: convergence of X^r to the reflected diffusion is not asserted");
    std::vector<double> rs = cfg.r_list;
    std::sort(rs.begin(), rs.end());

    for (std::size_t ri = 0; ri < rs.size(); ++ri) {
        const double r = rs[ri];
        const NetworkTopology topo_r = at_scale(topo, heavy_traffic_config(topo, r, b));
        const std::uint64_t master = stream_seed(cfg.seed, 0x7072656cULL + ri);
        const auto stats = parallel_map(static_cast<std::size_t>(cfg.replications), threads, [&](std::size_t i) {
            const ScaledWorkloadPath path =
                sample_scaled_workload(topo_r, r, cfg.horizon, cfg.grid_points, stream_seed(master, i));
            return summarize(path.values, cfg, p);
        });
        add_rows(rep, "r=" + format_double(r), r, stats, d);
        double band = 0.0;
        for (const auto& s : stats) band = std::max(band, s.outside);
        rep.membership_band.emplace_back(r, band);
    }

    if (cfg.include_orbm) {
        const DiffusionParams dp{b, sigma_matrix(topo)};
        SimConfig sc;
        sc.dt_rule = DtRule::Fixed;
        sc.dt_max = cfg.orbm_dt;
        sc.seed = stream_seed(cfg.seed, 0x6f72626dULL);
        StopSpec stop;
        stop.stop_on_origin = false;
        stop.t_max = cfg.horizon;
        stop.record_path = true;
        const auto stats = parallel_map(static_cast<std::size_t>(cfg.replications), threads, [&](std::size_t i) {
            const PathRecord rec = simulate_path(Vec::Zero(d), stop, sc, p, dp, i);
            std::vector<Vec> values;
            std::size_t k = 0;
            for (int g = 0; g < cfg.grid_points; ++g) {
                const double t = cfg.horizon * g / (cfg.grid_points - 1);
                while (k + 1 < rec.times.size() && rec.times[k + 1] <= t * (1.0 + 1e-12)) ++k;
                values.push_back(rec.states[k]);
            }
            return summarize(values, cfg, p);
        });
        add_rows(rep, "orbm", 0.0, stats, d);

        std::map<std::string, double> reference;
        for (const auto& row : rep.rows) {
            if (row.source == "orbm") reference[row.statistic] = row.value;
        }
        for (const auto& [name, ref] : reference) {
            std::vector<double> gaps;
            for (const auto& row : rep.rows) {
                if (row.source != "orbm" && row.statistic == name) gaps.push_back(std::abs(row.value - ref));
            }
            bool monotone = true;
            for (std::size_t i = 1; i < gaps.size(); ++i) monotone = monotone && gaps[i] <= gaps[i - 1];
            rep.trends.emplace_back(name, monotone);
        }
    }
    return rep;
}

void CompareReport::write_csv(std::ostream& os) const {
    os << "source,r,statistic,value,std_error\n";
    for (const auto& row : rows) {
        os << row.source << ',' << format_double(row.r) << ',' << row.statistic << ',' << format_double(row.value)
           << ',' << format_double(row.std_error) << '\n';
    }
}

void CompareReport::write_text(std::ostream& os) const {
    for (const auto& n : notes) os << "note: " << n << '\n';
    for (const auto& row : rows) {
        os << row.source << ' ' << row.statistic << " = " << format_double(row.value) << " +- "
           << format_double(row.std_error) << '\n';
    }
    for (const auto& [name, mono] : trends) {
        os << "trend " << name << ": " << (mono ? "monotone" : "not monotone") << '\n';
    }
    for (const auto& [r, band] : membership_band) {
        os << "membership band r=" << format_double(r) << ": " << format_double(band) << '\n';
    }
}

}  // namespace orbm
