#pragma once

// Sphere meshes at radii 2^{-2l} delta, Monte Carlo estimates of the killed
// kernels between consecutive spheres, and normalized backward compositions
// of those kernels.

#include "orbm/cone_geometry.hpp"
#include "orbm/generator.hpp"
#include "orbm/sder.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace orbm {

class EmptyCone : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// Raised when every path was killed, i.e. the normalizing mass is zero.
class MassExtinction : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Directional cells on the cone's cross-section. A direction is described
/// by its barycentric w-coordinates w_j = q_j^{1/alpha} / sum_l q_l^{1/alpha}
/// on the simplex; for d = 3 and K = m^2 the simplex is cut into m^2 equal
/// triangles, otherwise cells are the Voronoi regions (in w) of K fixed
/// sites. Meshes at different radii share the same cells.
class SphereMesh {
public:
    enum class Layout { Triangles, Voronoi };

    SphereMesh(double radius, int cells, const ConeParams& p);

    double radius() const { return radius_; }
    int size() const { return static_cast<int>(centers_.size()); }
    Layout layout() const { return layout_; }
    const ConeParams& params() const { return p_; }

    /// Cell containing the direction of x (x in the closed cone, x != 0).
    int assign(const Vec& x) const;
    /// Representative of cell i on the sphere of this mesh's radius.
    const Vec& representative(int i) const { return reps_[i]; }
    /// Barycentric w-coordinates of the cell's center.
    const Vec& center(int i) const { return centers_[i]; }
    /// Same cells at another radius.
    SphereMesh at_radius(double radius) const;

    /// Triangles layout: w-simplex vertices of cell i (3 rows).
    Mat cell_vertices(int i) const;

private:
    double radius_;
    int k_;
    ConeParams p_;
    Layout layout_;
    int m_ = 0;
    std::vector<Vec> centers_;
    std::vector<Vec> reps_;

    void build_reps();
};

SphereMesh sphere_mesh(double radius, int cells, const ConeParams& p);

/// Largest angle (radians) between a direction and its cell's
/// representative, over `samples` directions drawn uniformly in w.
double cell_angular_radius(const SphereMesh& mesh, int samples = 4096, std::uint64_t seed = 1);

/// Barycentric w-coordinates of a direction in the closed cone.
Vec direction_coordinates(const Vec& x, const ConeParams& p);
/// Point on the sphere of radius r with barycentric w-coordinates w.
Vec point_from_coordinates(const Vec& w, double r, const ConeParams& p);

/// Empirical killed kernel between two sphere meshes.
struct KilledKernel {
    int level = 0;
    double source_radius = 0.0;
    double target_radius = 0.0;
    Mat matrix;         ///< source cells x target cells, empirical frequencies
    Mat std_error;      ///< binomial standard errors of the entries
    Vec kill;           ///< 1 - row sum
    Vec kill_std_error;
    std::vector<long> paths;   ///< successful paths per row
    std::vector<long> failed;  ///< paths lost to simulator errors per row

    long total_failed() const;
};

/// Launches n_paths from each source representative, stopping at the target
/// sphere or at entry into B(cfg.origin_eps). `stream` selects an independent
/// block of random streams.
KilledKernel estimate_kernel(const SphereMesh& source, const SphereMesh& target, long n_paths,
                             const SimConfig& cfg, const ConeParams& p, const DiffusionParams& dp,
                             int threads = 1, std::uint64_t stream = 0);

/// Q_l: from radius 2^{-2l} delta to 2^{-2(l-1)} delta with K cells.
KilledKernel estimate_level_kernel(int level, double delta, int cells, long n_paths, const SimConfig& cfg,
                                   const ConeParams& p, const DiffusionParams& dp, int threads = 1);

double level_radius(double delta, int level);

struct Composition {
    double value = 0.0;
    /// log of nu^T Q_n ... Q_1 1 (the normalizing mass).
    double log_mass = 0.0;
};

/// (nu^T Q_n ... Q_1 f) / (nu^T Q_n ... Q_1 1). `kernels[l-1]` is Q_l,
/// mapping E_l (rows) to E_{l-1} (columns); nu lives on E_n and f on E_0.
/// Vectors are renormalized every step and the scale is kept in log form.
Composition backward_composition(const std::vector<Mat>& kernels, const Vec& nu, const Vec& f);

/// Normalized law on E_0: nu^T Q_n ... Q_1 / (nu^T Q_n ... Q_1 1).
Vec hitting_distribution(const std::vector<Mat>& kernels, const Vec& nu);

/// Q_k ... Q_1 1 for k = 1..n, each scaled to unit maximum.
std::vector<Vec> survival_vectors(const std::vector<Mat>& kernels);

double total_variation(const Vec& a, const Vec& b);

struct RatioBound {
    std::vector<double> per_level;  ///< min(s) / max(s) of Q_k ... Q_1 1
    double overall = 1.0;
};

RatioBound ratio_bound_estimate(const std::vector<Mat>& kernels);

struct UniquenessConfig {
    double delta = 0.5;
    int levels = 3;
    int cells = 64;
    long paths_per_cell = 10000;
    /// Innermost initial laws; each a probability vector on the level-n mesh.
    std::vector<Vec> initial;
    int bootstrap = 20;
};

struct UniquenessReport {
    std::vector<KilledKernel> kernels;  ///< kernels[l-1] = Q_l
    std::vector<Vec> distributions;     ///< hitting law on the delta-mesh per initial law
    Mat tv;                             ///< pairwise total variation
    Mat tv_std_error;                   ///< parametric bootstrap over kernel rows
    double max_tv = 0.0;
    double cell_angle = 0.0;  ///< cell_angular_radius of the delta-mesh
    RatioBound ratio;
    long failed_paths = 0;
    std::vector<std::string> warnings;
};

/// Point mass on cell i of a K-cell mesh.
Vec point_mass(int cells, int i);

UniquenessReport uniqueness_experiment(const UniquenessConfig& ucfg, const SimConfig& cfg, const ConeParams& p,
                                       const DiffusionParams& dp, int threads = 1);

/// Long format: level,source_radius,target_radius,row,col,value with col in
/// 0..K-1 for the matrix and col = -1 for the kill mass.
void write_kernels_csv(std::ostream& os, const std::vector<KilledKernel>& kernels);
/// Reads the matrices back, ordered by level.
std::vector<Mat> read_kernels_csv(std::istream& is);

void write_uniqueness_report(std::ostream& os, const UniquenessReport& rep);

}  // namespace orbm
