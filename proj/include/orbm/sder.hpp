#pragma once

// Euler-Maruyama simulation of the reflected SDE
//     X(t) = X(0) + b t + sigma W(t) + int gamma dlambda,  gamma in G(X),
// with a discrete Skorokhod correction along the coordinate directions e_h,
// per-face local-time accounting and sphere first-passage detection.

#include "orbm/cone_geometry.hpp"
#include "orbm/generator.hpp"

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <map>
#include <optional>
#include <vector>

namespace orbm {

class ReflectionDiverged : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class MaxSteps : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DriftNotZero : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

enum class DtRule { Fixed, RadiusScaled };

struct SimConfig {
    double dt_max = 1e-3;
    DtRule dt_rule = DtRule::RadiusScaled;
    /// RadiusScaled: dt = clamp(kappa |x|^2, dt_min, dt_max).
    double kappa = 1e-2;
    double dt_min = 1e-12;
    /// Radius of the ball used as the origin-hit proxy.
    double origin_eps = 1e-6;
    std::uint64_t seed = 1;
    long max_steps = 50'000'000;
    bool interpolate_crossings = true;
    int max_reflect_iter = 20;

    void validate() const;
    double step_size(double radius) const;
};

struct StopSpec {
    /// Spheres whose first-passage times are recorded; the path stops once
    /// all have been hit.
    std::vector<double> radii;
    bool stop_on_origin = true;
    double t_max = std::numeric_limits<double>::infinity();
    bool record_path = false;
};

enum class StopReason { AllRadiiHit, OriginProxy, TimeLimit };

struct PathRecord {
    // Populated when StopSpec::record_path is set.
    std::vector<double> times;
    std::vector<Vec> states;
    std::vector<Vec> local_time;  ///< cumulative per-face pushes at each recorded state

    std::map<double, double> tau_hits;  ///< radius -> first-passage time
    std::map<double, Vec> hit_points;   ///< radius -> crossing point on the sphere
    std::optional<double> theta_proxy;  ///< first entry into B(origin_eps)

    Vec total_local_time;
    Vec final_state;
    double final_time = 0.0;
    long steps = 0;
    /// Steps started inside B(origin_eps) before the first recorded sphere
    /// hit, and the time they account for.
    long vertex_steps = 0;
    double vertex_time = 0.0;
    /// Steps split in two by a Brownian-bridge refinement.
    long refinements = 0;
    /// Steps still past the vertex at the refinement cap, projected onto it.
    long vertex_snaps = 0;
    StopReason reason = StopReason::TimeLimit;
    double drift_norm = 0.0;
};

struct ReflectResult {
    Vec y;
    Vec push;  ///< u_h >= 0: local-time increment on face h
    int iterations = 0;
};

/// Level c >= 0 solving (mu^2 c)^alpha = sum_j max(y_j - c, 0)^alpha. The
/// right side minus the left is strictly decreasing in c, so c is unique.
/// For y in the closed cone c equals scale_root(y) / mu^2.
double push_level(const double* y, int d, const ConeParams& p);

/// Coordinate push y_h -> max(y_h, c), c = push_level(y): the pushed point
/// lies in the closed cone with exactly the pushed coordinates on their
/// faces, and points already in the cone are left unchanged. Writes the push
/// magnitudes to `push` and returns the number of faces pushed.
int skorokhod_correct(double* y, double* push, int d, const ConeParams& p);

/// One Euler step y = x + b dt + sigma sqrt(dt) xi followed by the
/// correction. Throws ReflectionDiverged when y lands past the vertex
/// (max_j y_j <= 0) from a point that is not itself the vertex: the step is
/// too large for the local geometry.
ReflectResult reflect_step(const Vec& x, double dt, const Vec& xi, const ConeParams& p, const DiffusionParams& dp);

/// Simulates one path from x0. The noise stream is PathRng(cfg.seed, path_index).
/// A step that would land past the vertex is split at its midpoint with a
/// Brownian-bridge draw, up to cfg.max_reflect_iter nested times; a piece
/// still past the vertex at that depth is projected onto the vertex.
PathRecord simulate_path(const Vec& x0, const StopSpec& stop, const SimConfig& cfg, const ConeParams& p,
                         const DiffusionParams& dp, std::uint64_t path_index = 0);

/// Same, with an explicit random stream.
PathRecord simulate_path(const Vec& x0, const StopSpec& stop, const SimConfig& cfg, const ConeParams& p,
                         const DiffusionParams& dp, PathRng& rng);

struct ExitEstimate {
    double mean = 0.0;
    double std_error = 0.0;
    double bound = 0.0;  ///< 2 delta^2 / |sigma^T e|^2
    long n_paths = 0;
    long failed = 0;
    std::vector<double> samples;
    std::vector<std::uint64_t> sample_paths;  ///< path index of each sample
};

/// 2 delta^2 / |sigma^T e|^2 with e = (1, ..., 1)/sqrt(d).
double exit_time_bound(double delta, const DiffusionParams& dp);

/// Monte Carlo estimate of E[tau^delta] from the vertex. Requires delta < 4.
ExitEstimate mean_exit_from_origin(double delta, long n_paths, const SimConfig& cfg, const ConeParams& p,
                                   const DiffusionParams& dp, int threads = 1);

struct SmallBallEstimate {
    double probability = 0.0;
    double std_error = 0.0;
    long hits = 0;
    long n_paths = 0;
    long failed = 0;
};

/// Fraction of paths from x0 that enter B(eps) before reaching |x| = delta.
SmallBallEstimate small_ball_probability(const Vec& x0, double eps, double delta, long n_paths,
                                         const SimConfig& cfg, const ConeParams& p, const DiffusionParams& dp,
                                         int threads = 1);

/// t -> 2^{2n} X(2^{-4n} t) with local times and first-passage marks
/// rescaled consistently. Requires a zero-drift record.
PathRecord rescale_path(const PathRecord& rec, int n);

/// CSV: t, x1..xd, lt1..ltd.
void write_path_csv(std::ostream& os, const PathRecord& rec);

}  // namespace orbm
