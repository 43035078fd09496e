#pragma once

// Geometry of the alpha-fair example cone
//
//     x_j = q_j^{1/alpha} + mu^{-2} (q_1 + ... + q_d)^{1/alpha},   q >= 0,
//
// its faces {q_h = 0}, unit inward normals, and the coordinate reflection
// directions e_h. Face indices are 0-based throughout the C++ API.

#include "orbm/common.hpp"
#include "orbm/report.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace orbm {

class NotOnFace : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class InteriorPoint : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

struct ConeParams {
    int d = 3;
    double alpha = 2.0;
    double mu = 1.0;
    /// Relative threshold for face activity: q_h <= face_tol * |q|_1.
    double face_tol = 1e-9;
    /// Relative tolerance of the scale root-find.
    double invert_tol = 1e-14;
    /// |x| <= vertex_tol is classified as the vertex.
    double vertex_tol = 1e-12;
    int max_iter = 200;

    void validate() const;
    /// Faces are C^2 iff alpha >= 2.
    bool c2_certified() const { return alpha >= 2.0; }
    double inv_mu2() const { return 1.0 / (mu * mu); }
};

struct FaceSet {
    std::vector<int> active;
    bool at_vertex = false;
    double classification_radius = 0.0;

    bool contains(int h) const;
    bool interior() const { return !at_vertex && active.empty(); }
};

struct Inversion {
    Vec q;
    FaceSet faces;
    /// s = (sum_j q_j)^{1/alpha}; every x_j - s / mu^2 equals q_j^{1/alpha}.
    double scale = 0.0;
};

Vec embed(const Vec& q, const ConeParams& p);

/// Root s >= 0 of s^alpha = sum_{j not excluded} max(x_j - s/mu^2, 0)^alpha.
/// The left side increases and the right side decreases in s, so the root
/// is unique; it is bracketed in [0, mu^2 max_j x_j] and refined by Newton
/// steps that fall back to bisection whenever they leave the bracket.
double scale_root(const Vec& x, const std::vector<bool>& excluded, const ConeParams& p);
double scale_root(const Vec& x, const ConeParams& p);
/// Raw form; bit j of `excluded` drops coordinate j. Requires d <= 32.
double scale_root_masked(const double* x, int d, std::uint32_t excluded, const ConeParams& p);

/// Inverse of `embed` with face classification. Throws OutsideCone when x
/// is not in the closed cone (up to face_tol, relative to |x|_inf).
Inversion invert(const Vec& x, const ConeParams& p);
std::optional<Inversion> try_invert(const Vec& x, const ConeParams& p);
bool in_cone(const Vec& x, const ConeParams& p);

/// Unit inward normal to face h at x. Radially constant.
Vec inward_normal(int h, const Vec& x, const ConeParams& p);
/// Same, evaluated directly from q-coordinates (q_h is treated as 0).
Vec inward_normal_q(int h, const Vec& q, const ConeParams& p);

/// Generators e_h of G(x) for the active faces; all d of them at the vertex.
/// Throws InteriorPoint when no face is active.
std::vector<Vec> reflection_cone(const Vec& x, const ConeParams& p);

/// Matrix |g^{h_i} . n^{h_j}| / (g^{h_i} . n^{h_i}) - delta_ij over the
/// active faces of x.
Mat reflection_matrix(const Vec& x, const ConeParams& p);
double spectral_radius(const Mat& m);

struct BoundarySamplerConfig {
    int n_samples = 2000;
    std::vector<double> radii{1e-3, 1e-1, 1.0, 10.0};
    /// log10 range for the free q-coordinates.
    double log_q_min = -4.0;
    double log_q_max = 2.0;
    std::uint64_t seed = 1;
    double report_tol = 1e-10;
};

struct BoundarySample {
    Vec x;
    std::vector<int> faces;
};

/// Deterministic boundary samples cycling through every nonempty face set of
/// size <= d-1 and through the configured radii.
std::vector<BoundarySample> sample_boundary(const ConeParams& p, const BoundarySamplerConfig& cfg);

/// Sampled verification of the reflection-field condition: g.n > 0 on every
/// face, linear independence of the active normals, spectral radius < 1 and
/// the vertex direction e = (1,...,1)/sqrt(d).
ConditionReport check_condition_G(const ConeParams& p, const BoundarySamplerConfig& cfg);

}  // namespace orbm
