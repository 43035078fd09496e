#pragma once

// Diffusion data of the reflected SDE, the generator
//     A f(x) = b . grad f(x) + 1/2 tr(sigma sigma^T D^2 f(x)),
// the power-law Lyapunov family V(x) = |x|^beta and sampled checks of the
// Lyapunov-type conditions near the vertex.

#include "orbm/bandwidth.hpp"
#include "orbm/cone_geometry.hpp"
#include "orbm/common.hpp"
#include "orbm/report.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>

namespace orbm {

class BetaOutOfWindow : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

struct DiffusionParams {
    Vec b;
    Mat sigma;

    void validate(int d) const;
    double condition_number() const;
};

/// 2 A M^{-1} diag(nu) M^{-1} A^T. Throws RankDeficient if A is not rank d.
Mat sigma_matrix(const NetworkTopology& topo);
/// The example network: 2 (I + J / mu^2), J the all-ones matrix.
Mat sigma_matrix(int d, double mu);
DiffusionParams example_diffusion(int d, double mu, const Vec& b);

/// Twice differentiable scalar field. Gradient and Hessian default to
/// central finite differences with step eps^{1/3} * max(1, |x|).
class ScalarField {
public:
    virtual ~ScalarField() = default;
    virtual double value(const Vec& x) const = 0;
    virtual Vec gradient(const Vec& x) const;
    virtual Mat hessian(const Vec& x) const;
    virtual std::string name() const { return "field"; }
};

Vec fd_gradient(const ScalarField& f, const Vec& x);
Mat fd_hessian(const ScalarField& f, const Vec& x);

/// V(x) = |x|^beta.
class PowerLawField final : public ScalarField {
public:
    explicit PowerLawField(double beta) : beta_(beta) {}
    double value(const Vec& x) const override;
    Vec gradient(const Vec& x) const override;
    Mat hessian(const Vec& x) const override;
    std::string name() const override { return "power_law"; }
    double beta() const { return beta_; }

private:
    double beta_;
};

/// f(x) = 1/2 (e . x)^2.
class HalfSquaredProjection final : public ScalarField {
public:
    explicit HalfSquaredProjection(Vec e) : e_(std::move(e)) {}
    double value(const Vec& x) const override;
    Vec gradient(const Vec& x) const override;
    Mat hessian(const Vec& x) const override;
    std::string name() const override { return "half_squared_projection"; }

private:
    Vec e_;
};

/// f(x) = c . x + c0.
class LinearField final : public ScalarField {
public:
    LinearField(Vec c, double c0 = 0.0) : c_(std::move(c)), c0_(c0) {}
    double value(const Vec& x) const override { return c_.dot(x) + c0_; }
    Vec gradient(const Vec&) const override { return c_; }
    Mat hessian(const Vec& x) const override { return Mat::Zero(x.size(), x.size()); }
    std::string name() const override { return "linear"; }

private:
    Vec c_;
    double c0_;
};

/// Field defined by callables; missing derivatives fall back to finite
/// differences.
class FunctionField final : public ScalarField {
public:
    using ValueFn = std::function<double(const Vec&)>;
    using GradFn = std::function<Vec(const Vec&)>;
    using HessFn = std::function<Mat(const Vec&)>;

    FunctionField(std::string name, ValueFn v, GradFn g = {}, HessFn h = {})
        : name_(std::move(name)), v_(std::move(v)), g_(std::move(g)), h_(std::move(h)) {}
    double value(const Vec& x) const override { return v_(x); }
    Vec gradient(const Vec& x) const override { return g_ ? g_(x) : fd_gradient(*this, x); }
    Mat hessian(const Vec& x) const override { return h_ ? h_(x) : fd_hessian(*this, x); }
    std::string name() const override { return name_; }
    bool analytic() const { return g_ && h_; }

private:
    std::string name_;
    ValueFn v_;
    GradFn g_;
    HessFn h_;
};

double apply_generator(const ScalarField& f, const Vec& x, const DiffusionParams& dp);

/// Closed form of A|x|^beta.
double power_law_generator(double beta, const Vec& x, const DiffusionParams& dp);

struct BetaWindow {
    double lo = 0.0;  ///< exclusive lower end beta_min
    double hi = 0.0;  ///< exclusive upper end (always 0)
    bool contains(double beta) const { return beta > lo && beta < hi; }
};

/// beta_min = 1 - (d-1) / (1 + d/mu^2)^2; for d = 3 this is
/// 1 - 2 / (1 + 3/mu^2)^2.
double beta_min(double mu, int d = 3);
/// The open interval (beta_min, 0), empty iff beta_min >= 0.
std::optional<BetaWindow> beta_window(double mu, int d = 3);
/// Smallest mu with a nonempty window: sqrt(d / (sqrt(d-1) - 1)); infinite
/// for d = 2.
double mu_threshold(int d = 3);

/// c_V = 2(d-1) + 2(beta - 1)(1 + d/mu^2)^2 (= 4 + 2(beta-1)(1+3/mu^2)^2 for
/// d = 3). Throws BetaOutOfWindow.
double lyapunov_constant(double mu, double beta, int d = 3);
/// Radius c_V / (|b| + 1) below which A V <= 0.
double lyapunov_validity_radius(double c_v, const Vec& b);

/// tr(sigma sigma^T) = 4((d-1) + (1 + d/mu^2)^2) for the example.
double example_trace(double mu, int d = 3);
/// Largest eigenvalue of sigma sigma^T for the example: 4 (1 + d/mu^2)^2.
double example_max_eig(double mu, int d = 3);

enum class LyapunovKind { PowerLaw, UserPair };

struct LyapunovSpec {
    LyapunovKind kind = LyapunovKind::PowerLaw;
    double beta = -0.5;
    double delta_w = 0.1;
    /// Case (i) field (PowerLaw builds it from beta).
    std::shared_ptr<const ScalarField> v;
    /// Case (ii) pair.
    std::shared_ptr<const ScalarField> v_plus;
    std::shared_ptr<const ScalarField> v_minus;

    static LyapunovSpec power_law(double beta, double delta_w);
    static LyapunovSpec user_pair(std::shared_ptr<const ScalarField> v_plus,
                                  std::shared_ptr<const ScalarField> v_minus, double delta_w);
};

struct AuxSamplerConfig {
    int n_boundary = 1000;
    int n_interior = 1000;
    /// Radii are log-uniform in [radius_min_fraction * delta_w, delta_w].
    double radius_min_fraction = 1e-4;
    int radius_slices = 32;
    int per_slice = 32;
    std::uint64_t seed = 7;
    /// Defaults to 1e-10 when every field is analytic, 1e-6 otherwise.
    std::optional<double> report_tol;
};

/// Sampled check of the Lyapunov condition. Case (i): -grad V . g at
/// boundary samples and -A V at all samples. Case (ii): the sign conditions
/// on V+, V-, their boundary derivatives and generators, plus the two
/// radius-slice ratio infima. PowerLaw specs are rejected (report fails with
/// a diagnostic) when the beta-window of mu is empty or excludes beta.
ConditionReport check_auxfunc(const LyapunovSpec& spec, const ConeParams& p, const DiffusionParams& dp,
                              const AuxSamplerConfig& cfg);

}  // namespace orbm
