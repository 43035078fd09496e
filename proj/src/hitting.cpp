#include "orbm/hitting.hpp"

#include "orbm/ensemble.hpp"
#include "orbm/report.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <sstream>

namespace orbm {

Vec direction_coordinates(const Vec& x, const ConeParams& p) {
    const Inversion inv = invert(x, p);
    if (inv.faces.at_vertex) throw InvalidArgument("direction_coordinates: the vertex has no direction");
    const double floor = inv.scale * p.inv_mu2();
    Vec w(p.d);
    for (int j = 0; j < p.d; ++j) w[j] = std::max(x[j] - floor, 0.0);
    const double total = w.sum();
    if (!(total > 0.0)) throw InvalidArgument("direction_coordinates: degenerate direction");
    return w / total;
}

Vec point_from_coordinates(const Vec& w, double r, const ConeParams& p) {
    if (w.size() != p.d) throw InvalidArgument("point_from_coordinates: wrong dimension");
    Vec q(p.d);
    for (int j = 0; j < p.d; ++j) {
        if (!(w[j] >= 0.0)) throw InvalidArgument("point_from_coordinates: w must be nonnegative");
        q[j] = std::pow(w[j], p.alpha);
    }
    const Vec x = embed(q, p);
    const double n = x.norm();
    if (!(n > 0.0)) throw InvalidArgument("point_from_coordinates: w must be nonzero");
    return x * (r / n);
}

namespace {

int perfect_root(int k) {
    const int m = static_cast<int>(std::lround(std::sqrt(static_cast<double>(k))));
    return m * m == k ? m : 0;
}

double radical_inverse(std::uint64_t i, int base) {
    double inv = 1.0 / base, f = inv, out = 0.0;
    while (i > 0) {
        out += f * static_cast<double>(i % base);
        i /= base;
        f *= inv;
    }
    return out;
}

// Uniform-ish simplex sites: sorted Halton coordinates turned into spacings.
std::vector<Vec> voronoi_sites(int k, int d) {
    static const int primes[] = {2,  3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53,
                                 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107, 109, 113, 127};
    std::vector<Vec> sites;
    if (k == 1) {
        sites.push_back(Vec::Constant(d, 1.0 / d));
        return sites;
    }
    for (int i = 0; i < k; ++i) {
        std::vector<double> u(d - 1);
        for (int c = 0; c < d - 1; ++c) u[c] = radical_inverse(static_cast<std::uint64_t>(i) + 1, primes[c]);
        std::sort(u.begin(), u.end());
        Vec w(d);
        double prev = 0.0;
        for (int c = 0; c < d - 1; ++c) {
            w[c] = u[c] - prev;
            prev = u[c];
        }
        w[d - 1] = 1.0 - prev;
        sites.push_back(w);
    }
    return sites;
}

// Triangle (i, j, up) of the m-subdivision, in index order up(0,0), ...
struct TriangleIndex {
    int m;
    std::vector<int> up, down;

    explicit TriangleIndex(int m_) : m(m_), up(m_ * m_, -1), down(m_ * m_, -1) {
        int next = 0;
        for (int i = 0; i < m; ++i) {
            for (int j = 0; i + j <= m - 1; ++j) {
                up[i * m + j] = next++;
                if (i + j <= m - 2) down[i * m + j] = next++;
            }
        }
    }
};

int locate_triangle(const Vec& w, int m) {
    const double a = std::clamp(w[0] * m, 0.0, static_cast<double>(m));
    const double b = std::clamp(w[1] * m, 0.0, static_cast<double>(m));
    int i = std::min(static_cast<int>(std::floor(a)), m - 1);
    int j = std::min(static_cast<int>(std::floor(b)), m - 1);
    while (i + j > m - 1) {
        if (i > 0) {
            --i;
        } else {
            --j;
        }
    }
    const bool is_down = (a - i) + (b - j) >= 1.0 && i + j <= m - 2;
    // Same enumeration as TriangleIndex, computed without the table.
    int index = 0;
    for (int ii = 0; ii < i; ++ii) index += 2 * (m - ii) - 1;
    index += 2 * j + (is_down ? 1 : 0);
    return index;
}

}  // namespace

SphereMesh::SphereMesh(double radius, int cells, const ConeParams& p) : radius_(radius), k_(cells), p_(p) {
    p_.validate();
    if (!(radius > 0.0)) throw InvalidArgument("sphere_mesh: radius must be > 0");
    if (cells < 1) throw InvalidArgument("sphere_mesh: need at least one cell");
    m_ = p.d == 3 ? perfect_root(cells) : 0;
    layout_ = m_ > 0 ? Layout::Triangles : Layout::Voronoi;
    if (layout_ == Layout::Triangles) {
        centers_.resize(cells);
        const TriangleIndex idx(m_);
        for (int i = 0; i < m_; ++i) {
            for (int j = 0; i + j <= m_ - 1; ++j) {
                auto put = [&](int id, double a, double b) {
                    Vec w(3);
                    w << a / m_, b / m_, 1.0 - (a + b) / m_;
                    centers_[id] = w;
                };
                put(idx.up[i * m_ + j], i + 1.0 / 3.0, j + 1.0 / 3.0);
                if (idx.down[i * m_ + j] >= 0) put(idx.down[i * m_ + j], i + 2.0 / 3.0, j + 2.0 / 3.0);
            }
        }
    } else {
        centers_ = voronoi_sites(cells, p.d);
    }
    build_reps();
}

void SphereMesh::build_reps() {
    reps_.clear();
    int admitted = 0;
    for (const Vec& w : centers_) {
        reps_.push_back(point_from_coordinates(w, radius_, p_));
        if (in_cone(reps_.back(), p_)) ++admitted;
    }
    if (admitted == 0) throw EmptyCone("sphere_mesh: no direction meets the cone");
}

int SphereMesh::assign(const Vec& x) const {
    const Vec w = direction_coordinates(x, p_);
    if (layout_ == Layout::Triangles) return locate_triangle(w, m_);
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int i = 0; i < size(); ++i) {
        const double dist = (centers_[i] - w).squaredNorm();
        if (dist < best_d) {
            best_d = dist;
            best = i;
        }
    }
    return best;
}

SphereMesh SphereMesh::at_radius(double radius) const {
    return SphereMesh(radius, k_, p_);
}

Mat SphereMesh::cell_vertices(int i) const {
    if (layout_ != Layout::Triangles) throw InvalidArgument("cell_vertices: only defined for the triangle layout");
    const TriangleIndex idx(m_);
    for (int a = 0; a < m_; ++a) {
        for (int b = 0; a + b <= m_ - 1; ++b) {
            const bool up = idx.up[a * m_ + b] == i;
            const bool down = idx.down[a * m_ + b] == i;
            if (!up && !down) continue;
            Mat v(3, 3);
            auto row = [&](int r, double x, double y) { v.row(r) << x / m_, y / m_, 1.0 - (x + y) / m_; };
            if (up) {
                row(0, a, b);
                row(1, a + 1, b);
                row(2, a, b + 1);
            } else {
                row(0, a + 1, b);
                row(1, a, b + 1);
                row(2, a + 1, b + 1);
            }
            return v;
        }
    }
    throw InvalidArgument("cell_vertices: cell index out of range");
}

SphereMesh sphere_mesh(double radius, int cells, const ConeParams& p) {
    return SphereMesh(radius, cells, p);
}

long KilledKernel::total_failed() const {
    long n = 0;
    for (long f : failed) n += f;
    return n;
}

double level_radius(double delta, int level) {
    return std::ldexp(delta, -2 * level);
}

KilledKernel estimate_kernel(const SphereMesh& source, const SphereMesh& target, long n_paths,
                             const SimConfig& cfg, const ConeParams& p, const DiffusionParams& dp, int threads,
                             std::uint64_t stream) {
    if (n_paths < 1) throw InvalidArgument("estimate_kernel: n_paths must be >= 1");
    if (!(target.radius() > source.radius())) {
        throw InvalidArgument("estimate_kernel: target sphere must lie outside the source sphere");
    }
    cfg.validate();
    const int rows = source.size();
    const int cols = target.size();
    const std::uint64_t master = stream_seed(cfg.seed, 0x6b65726eULL + stream);
    StopSpec stop;
    stop.radii = {target.radius()};
    stop.stop_on_origin = true;

    constexpr int kKilled = -1;
    constexpr int kFailed = -2;
    const auto total = static_cast<std::size_t>(rows) * static_cast<std::size_t>(n_paths);
    const std::vector<int> outcome = parallel_map(total, threads, [&](std::size_t idx) {
        const int row = static_cast<int>(idx / static_cast<std::size_t>(n_paths));
        PathRng rng(master, idx);
        try {
            const PathRecord rec = simulate_path(source.representative(row), stop, cfg, p, dp, rng);
            if (rec.reason != StopReason::AllRadiiHit) return kKilled;
            return target.assign(rec.hit_points.at(target.radius()));
        } catch (const NumericalError&) {
            return kFailed;
        } catch (const OutsideCone&) {
            return kFailed;
        }
    });

    KilledKernel k;
    k.source_radius = source.radius();
    k.target_radius = target.radius();
    k.matrix = Mat::Zero(rows, cols);
    k.std_error = Mat::Zero(rows, cols);
    k.kill = Vec::Zero(rows);
    k.kill_std_error = Vec::Zero(rows);
    k.paths.assign(rows, 0);
    k.failed.assign(rows, 0);
    std::vector<long> kills(rows, 0);
    for (std::size_t idx = 0; idx < total; ++idx) {
        const int row = static_cast<int>(idx / static_cast<std::size_t>(n_paths));
        const int o = outcome[idx];
        if (o == kFailed) {
            ++k.failed[row];
            continue;
        }
        ++k.paths[row];
        if (o == kKilled) {
            ++kills[row];
        } else {
            k.matrix(row, o) += 1.0;
        }
    }
    for (int i = 0; i < rows; ++i) {
        const double n = static_cast<double>(k.paths[i]);
        if (n == 0.0) continue;
        for (int j = 0; j < cols; ++j) {
            const double f = k.matrix(i, j) / n;
            k.matrix(i, j) = f;
            k.std_error(i, j) = std::sqrt(f * (1.0 - f) / n);
        }
        const double kf = static_cast<double>(kills[i]) / n;
        k.kill[i] = kf;
        k.kill_std_error[i] = std::sqrt(kf * (1.0 - kf) / n);
    }
    return k;
}

KilledKernel estimate_level_kernel(int level, double delta, int cells, long n_paths, const SimConfig& cfg,
                                   const ConeParams& p, const DiffusionParams& dp, int threads) {
    if (level < 1) throw InvalidArgument("estimate_level_kernel: level must be >= 1");
    if (!(delta > 0.0)) throw InvalidArgument("estimate_level_kernel: delta must be > 0");
    const SphereMesh source(level_radius(delta, level), cells, p);
    const SphereMesh target = source.at_radius(level_radius(delta, level - 1));
    KilledKernel k = estimate_kernel(source, target, n_paths, cfg, p, dp, threads, static_cast<std::uint64_t>(level));
    k.level = level;
    return k;
}

namespace {

void check_chain(const std::vector<Mat>& kernels) {
    if (kernels.empty()) throw InvalidArgument("composition: need at least one kernel");
    for (std::size_t l = 1; l < kernels.size(); ++l) {
        if (kernels[l].cols() != kernels[l - 1].rows()) {
            throw InvalidArgument("composition: kernel " + std::to_string(l + 1) + " has " +
                                  std::to_string(kernels[l].cols()) + " columns but E_" + std::to_string(l) +
                                  " has " + std::to_string(kernels[l - 1].rows()) + " states");
        }
    }
}

}  // namespace

Composition backward_composition(const std::vector<Mat>& kernels, const Vec& nu, const Vec& f) {
    check_chain(kernels);
    if (f.size() != kernels.front().cols()) throw InvalidArgument("backward_composition: f has wrong size");
    if (nu.size() != kernels.back().rows()) throw InvalidArgument("backward_composition: nu has wrong size");
    Vec v = f;
    Vec u = Vec::Ones(f.size());
    Composition out;
    for (const Mat& q : kernels) {
        v = q * v;
        u = q * u;
        const double scale = u.maxCoeff();
        if (!(scale > 0.0) || !std::isfinite(scale)) throw MassExtinction("backward_composition: survival mass vanished");
        v /= scale;
        u /= scale;
        out.log_mass += std::log(scale);
    }
    const double den = nu.dot(u);
    if (!(den > 0.0)) throw MassExtinction("backward_composition: nu puts no mass on surviving states");
    out.value = nu.dot(v) / den;
    out.log_mass += std::log(den);
    return out;
}

Vec hitting_distribution(const std::vector<Mat>& kernels, const Vec& nu) {
    check_chain(kernels);
    if (nu.size() != kernels.back().rows()) throw InvalidArgument("hitting_distribution: nu has wrong size");
    Vec pi = nu;
    for (auto it = kernels.rbegin(); it != kernels.rend(); ++it) {
        pi = it->transpose() * pi;
        const double s = pi.sum();
        if (!(s > 0.0)) throw MassExtinction("hitting_distribution: all mass killed");
        pi /= s;
    }
    return pi;
}

std::vector<Vec> survival_vectors(const std::vector<Mat>& kernels) {
    check_chain(kernels);
    std::vector<Vec> out;
    Vec u = Vec::Ones(kernels.front().cols());
    for (const Mat& q : kernels) {
        u = q * u;
        const double scale = u.maxCoeff();
        if (!(scale > 0.0)) throw MassExtinction("survival_vectors: survival mass vanished");
        u /= scale;
        out.push_back(u);
    }
    return out;
}

double total_variation(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw InvalidArgument("total_variation: size mismatch");
    return 0.5 * (a - b).cwiseAbs().sum();
}

RatioBound ratio_bound_estimate(const std::vector<Mat>& kernels) {
    RatioBound rb;
    for (const Vec& s : survival_vectors(kernels)) {
        const double ratio = s.minCoeff() / s.maxCoeff();
        rb.per_level.push_back(ratio);
        rb.overall = std::min(rb.overall, ratio);
    }
    return rb;
}

Vec point_mass(int cells, int i) {
    if (i < 0 || i >= cells) throw InvalidArgument("point_mass: index out of range");
    Vec v = Vec::Zero(cells);
    v[i] = 1.0;
    return v;
}

namespace {

Mat pairwise_tv(const std::vector<Vec>& dists) {
    const auto n = static_cast<Eigen::Index>(dists.size());
    Mat tv = Mat::Zero(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
        for (Eigen::Index b = a + 1; b < n; ++b) tv(a, b) = tv(b, a) = total_variation(dists[a], dists[b]);
    }
    return tv;
}

// Multinomial redraw of every row with its own path count.
Mat resample_kernel(const KilledKernel& k, std::mt19937_64& eng) {
    Mat out = Mat::Zero(k.matrix.rows(), k.matrix.cols());
    for (Eigen::Index i = 0; i < k.matrix.rows(); ++i) {
        long left = k.paths[i];
        if (left == 0) continue;
        double mass_left = 1.0;
        for (Eigen::Index j = 0; j < k.matrix.cols() && left > 0; ++j) {
            const double pj = k.matrix(i, j);
            if (pj <= 0.0) continue;
            const double prob = std::clamp(pj / mass_left, 0.0, 1.0);
            std::binomial_distribution<long> bin(left, prob);
            const long draw = bin(eng);
            out(i, j) = static_cast<double>(draw) / static_cast<double>(k.paths[i]);
            left -= draw;
            mass_left -= pj;
            if (mass_left <= 0.0) break;
        }
    }
    return out;
}

}  // namespace

double cell_angular_radius(const SphereMesh& mesh, int samples, std::uint64_t seed) {
    const ConeParams& p = mesh.params();
    PathRng rng(seed, 0);
    double worst = 0.0;
    Vec w(p.d);
    for (int s = 0; s < samples; ++s) {
        for (int j = 0; j < p.d; ++j) w[j] = rng.exponential(1.0);
        w /= w.sum();
        const Vec x = point_from_coordinates(w, mesh.radius(), p);
        const Vec& r = mesh.representative(mesh.assign(x));
        const double c = std::clamp(x.dot(r) / (x.norm() * r.norm()), -1.0, 1.0);
        worst = std::max(worst, std::acos(c));
    }
    return worst;
}

UniquenessReport uniqueness_experiment(const UniquenessConfig& ucfg, const SimConfig& cfg, const ConeParams& p,
                                       const DiffusionParams& dp, int threads) {
    if (ucfg.levels < 1 || ucfg.levels > 5) throw InvalidArgument("uniqueness_experiment: levels must be in [1, 5]");
    if (!(ucfg.delta > 0.0)) throw InvalidArgument("uniqueness_experiment: delta must be > 0");
    const double inner = level_radius(ucfg.delta, ucfg.levels);
    if (inner < 100.0 * cfg.origin_eps) {
        throw InvalidArgument("uniqueness_experiment: innermost radius " + format_double(inner) +
                              " is below 100 * origin_eps; reduce levels or origin_eps");
    }
    UniquenessReport rep;
    if (ucfg.cells < 4) {
        rep.warnings.push_back("resolution: " + std::to_string(ucfg.cells) +
                               " cells is too coarse for a meaningful total-variation comparison");
    }
    std::vector<Vec> initial = ucfg.initial;
    if (initial.empty()) {
        for (int i : {0, ucfg.cells / 2, ucfg.cells - 1}) initial.push_back(point_mass(ucfg.cells, i));
    }
    for (const Vec& nu : initial) {
        if (nu.size() != ucfg.cells || (nu.array() < 0.0).any() || std::abs(nu.sum() - 1.0) > 1e-9) {
            throw InvalidArgument("uniqueness_experiment: initial laws must be probability vectors on the mesh");
        }
    }

    std::vector<Mat> mats;
    for (int l = 1; l <= ucfg.levels; ++l) {
        rep.kernels.push_back(estimate_level_kernel(l, ucfg.delta, ucfg.cells, ucfg.paths_per_cell, cfg, p, dp, threads));
        rep.failed_paths += rep.kernels.back().total_failed();
        mats.push_back(rep.kernels.back().matrix);
    }
    if (rep.failed_paths > 0) {
        rep.warnings.push_back(std::to_string(rep.failed_paths) + " paths failed and were excluded");
    }
    for (const Vec& nu : initial) rep.distributions.push_back(hitting_distribution(mats, nu));
    rep.tv = pairwise_tv(rep.distributions);
    rep.max_tv = rep.tv.size() > 0 ? rep.tv.maxCoeff() : 0.0;
    rep.ratio = ratio_bound_estimate(mats);
    rep.cell_angle = cell_angular_radius(sphere_mesh(ucfg.delta, ucfg.cells, p), 4096, cfg.seed);

    const auto n = static_cast<Eigen::Index>(initial.size());
    Mat sum = Mat::Zero(n, n), sumsq = Mat::Zero(n, n);
    std::mt19937_64 eng(stream_seed(cfg.seed, 0x626f6f74ULL));
    int done = 0;
    for (int b = 0; b < ucfg.bootstrap; ++b) {
        std::vector<Mat> boot;
        for (const auto& k : rep.kernels) boot.push_back(resample_kernel(k, eng));
        std::vector<Vec> dists;
        try {
            for (const Vec& nu : initial) dists.push_back(hitting_distribution(boot, nu));
        } catch (const MassExtinction&) {
            continue;
        }
        const Mat tv = pairwise_tv(dists);
        sum += tv;
        sumsq += tv.cwiseProduct(tv);
        ++done;
    }
    rep.tv_std_error = Mat::Zero(n, n);
    if (done > 1) {
        const Mat mean = sum / done;
        rep.tv_std_error = ((sumsq / done - mean.cwiseProduct(mean)) * (done / (done - 1.0))).cwiseMax(0.0).cwiseSqrt();
    }
    return rep;
}

void write_kernels_csv(std::ostream& os, const std::vector<KilledKernel>& kernels) {
    os << "level,source_radius,target_radius,row,col,value\n";
    for (const auto& k : kernels) {
        const std::string head = std::to_string(k.level) + ',' + format_double(k.source_radius) + ',' +
                                 format_double(k.target_radius) + ',';
        for (Eigen::Index i = 0; i < k.matrix.rows(); ++i) {
            for (Eigen::Index j = 0; j < k.matrix.cols(); ++j) {
                os << head << i << ',' << j << ',' << format_double(k.matrix(i, j)) << '\n';
            }
            os << head << i << ",-1," << format_double(k.kill[i]) << '\n';
        }
    }
}

std::vector<Mat> read_kernels_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("level,source_radius,target_radius,row,col,value", 0) != 0) {
        throw InvalidArgument("read_kernels_csv: missing header");
    }
    struct Entry {
        long row, col;
        double value;
    };
    std::map<int, std::vector<Entry>> by_level;
    long lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 6) throw InvalidArgument("read_kernels_csv: line " + std::to_string(lineno) + " needs 6 fields");
        try {
            const int level = std::stoi(fields[0]);
            const long row = std::stol(fields[3]);
            const long col = std::stol(fields[4]);
            const double value = std::stod(fields[5]);
            if (col >= 0) by_level[level].push_back({row, col, value});
        } catch (const std::logic_error&) {
            throw InvalidArgument("read_kernels_csv: malformed number on line " + std::to_string(lineno));
        }
    }
    std::vector<Mat> out;
    for (auto& [level, entries] : by_level) {
        long rows = 0, cols = 0;
        for (const auto& e : entries) {
            if (e.row < 0) throw InvalidArgument("read_kernels_csv: negative row index");
            rows = std::max(rows, e.row + 1);
            cols = std::max(cols, e.col + 1);
        }
        Mat m = Mat::Zero(rows, cols);
        for (const auto& e : entries) m(e.row, e.col) = e.value;
        out.push_back(std::move(m));
    }
    return out;
}

void write_uniqueness_report(std::ostream& os, const UniquenessReport& rep) {
    os << "levels: " << rep.kernels.size() << '\n';
    for (const auto& k : rep.kernels) {
        os << "kernel " << k.level << ": radius " << format_double(k.source_radius) << " -> "
           << format_double(k.target_radius) << ", max kill " << format_double(k.kill.maxCoeff())
           << ", failed " << k.total_failed() << '\n';
    }
    os << "survival ratio per level:";
    for (double r : rep.ratio.per_level) os << ' ' << format_double(r);
    os << "\nsurvival ratio overall: " << format_double(rep.ratio.overall) << '\n';
    os << "cell angular radius: " << format_double(rep.cell_angle) << '\n';
    os << "max pairwise tv: " << format_double(rep.max_tv) << '\n';
    for (Eigen::Index a = 0; a < rep.tv.rows(); ++a) {
        for (Eigen::Index b = a + 1; b < rep.tv.cols(); ++b) {
            os << "tv(" << a << ',' << b << ") = " << format_double(rep.tv(a, b)) << " +- "
               << format_double(rep.tv_std_error(a, b)) << '\n';
        }
    }
    for (const auto& w : rep.warnings) os << "warning: " << w << '\n';
}

}  // namespace orbm
