#include "orbm/cone_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace orbm {

void ConeParams::validate() const {
    if (d < 2 || d > 32) throw InvalidArgument("ConeParams: d must be in [2, 32]");
    if (!(mu > 0.0) || !std::isfinite(mu)) throw InvalidArgument("ConeParams: mu must be > 0");
    if (!(alpha > 1.0) || !std::isfinite(alpha)) throw InvalidArgument("ConeParams: alpha must be > 1");
    if (!(face_tol > 0.0) || !(invert_tol > 0.0) || !(vertex_tol > 0.0)) {
        throw InvalidArgument("ConeParams: tolerances must be > 0");
    }
    if (max_iter < 1) throw InvalidArgument("ConeParams: max_iter must be >= 1");
}

bool FaceSet::contains(int h) const {
    return std::find(active.begin(), active.end(), h) != active.end();
}

Vec embed(const Vec& q, const ConeParams& p) {
    if (q.size() != p.d) throw InvalidArgument("embed: q has wrong dimension");
    const double inv_alpha = 1.0 / p.alpha;
    double total = 0.0;
    for (Eigen::Index j = 0; j < q.size(); ++j) {
        if (!(q[j] >= 0.0)) throw InvalidArgument("embed: q must be nonnegative");
        total += q[j];
    }
    const double common = p.inv_mu2() * std::pow(total, inv_alpha);
    Vec x(q.size());
    for (Eigen::Index j = 0; j < q.size(); ++j) x[j] = std::pow(q[j], inv_alpha) + common;
    return x;
}

namespace {

bool is_excluded(std::uint32_t mask, Eigen::Index j) { return (mask >> j) & 1u; }

// alpha = 2: on the set P of terms that stay positive at the root the
// equation is the quadratic (1 - |P|/mu^4) s^2 + (2/mu^2) sum_P x_j s
// - sum_P x_j^2 = 0. Returns false if the candidate root leaves some term
// of P negative, in which case the caller falls back to the general solver.
bool quadratic_root(const double* x, int d, std::uint32_t excluded, const ConeParams& p, double& out) {
    const double k = p.inv_mu2();
    double count = 0.0, sum = 0.0, sumsq = 0.0;
    for (int j = 0; j < d; ++j) {
        if (is_excluded(excluded, j) || x[j] <= 0.0) continue;
        count += 1.0;
        sum += x[j];
        sumsq += x[j] * x[j];
    }
    if (count == 0.0) {
        out = 0.0;
        return true;
    }
    const double a = 1.0 - count * k * k;
    const double b = 2.0 * k * sum;
    const double disc = b * b + 4.0 * a * sumsq;
    if (disc < 0.0) return false;
    const double s = 2.0 * sumsq / (b + std::sqrt(disc));
    const double floor = s * k;
    for (int j = 0; j < d; ++j) {
        if (is_excluded(excluded, j)) continue;
        if (x[j] > 0.0 && x[j] < floor) return false;
    }
    out = s;
    return true;
}

double general_root(const double* x, int d, std::uint32_t excluded, const ConeParams& p) {
    const double a = p.alpha;
    const double k = p.inv_mu2();
    double hi = 0.0;
    for (int j = 0; j < d; ++j) {
        if (!is_excluded(excluded, j)) hi = std::max(hi, x[j]);
    }
    hi *= p.mu * p.mu;
    if (hi <= 0.0) return 0.0;
    double lo = 0.0;

    auto eval = [&](double s, double& dphi) {
        double phi = std::pow(s, a);
        dphi = a * std::pow(s, a - 1.0);
        for (int j = 0; j < d; ++j) {
            if (is_excluded(excluded, j)) continue;
            const double t = x[j] - s * k;
            if (t > 0.0) {
                const double tp = std::pow(t, a - 1.0);
                phi -= tp * t;
                dphi += a * k * tp;
            }
        }
        return phi;
    };

    double s = 0.5 * hi;
    for (int it = 0; it < p.max_iter; ++it) {
        double dphi = 0.0;
        const double phi = eval(s, dphi);
        if (phi == 0.0) return s;
        if (phi < 0.0) {
            lo = s;
        } else {
            hi = s;
        }
        double next = (dphi > 0.0 && std::isfinite(dphi)) ? s - phi / dphi : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - s) <= p.invert_tol * next || hi - lo <= p.invert_tol * hi) return next;
        s = next;
    }
    throw NonConvergence("scale_root: root-find exceeded max_iter (check invert_tol)");
}

}  // namespace

double scale_root_masked(const double* x, int d, std::uint32_t excluded, const ConeParams& p) {
    if (p.alpha == 2.0) {
        double s = 0.0;
        if (quadratic_root(x, d, excluded, p, s)) return s;
    }
    return general_root(x, d, excluded, p);
}

double scale_root(const Vec& x, const std::vector<bool>& excluded, const ConeParams& p) {
    std::uint32_t mask = 0;
    for (std::size_t j = 0; j < excluded.size(); ++j) {
        if (excluded[j]) mask |= 1u << j;
    }
    return scale_root_masked(x.data(), static_cast<int>(x.size()), mask, p);
}

double scale_root(const Vec& x, const ConeParams& p) {
    return scale_root_masked(x.data(), static_cast<int>(x.size()), 0u, p);
}

std::optional<Inversion> try_invert(const Vec& x, const ConeParams& p) {
    if (x.size() != p.d) throw InvalidArgument("invert: x has wrong dimension");
    if (!x.allFinite()) throw InvalidArgument("invert: x must be finite");
    Inversion out;
    out.q = Vec::Zero(p.d);
    const double norm = x.norm();
    out.faces.classification_radius = norm;
    if (norm <= p.vertex_tol) {
        out.faces.at_vertex = true;
        return out;
    }
    const double s = scale_root(x, p);
    out.scale = s;
    const double floor = s * p.inv_mu2();
    const double tol = p.face_tol * x.cwiseAbs().maxCoeff();
    double total = 0.0;
    for (Eigen::Index j = 0; j < x.size(); ++j) {
        const double t = x[j] - floor;
        if (t < -tol) return std::nullopt;
        out.q[j] = t > 0.0 ? std::pow(t, p.alpha) : 0.0;
        total += out.q[j];
    }
    const double threshold = p.face_tol * total;
    for (int h = 0; h < p.d; ++h) {
        if (out.q[h] <= threshold) out.faces.active.push_back(h);
    }
    if (static_cast<int>(out.faces.active.size()) == p.d) {
        out.faces.active.clear();
        out.faces.at_vertex = true;
    }
    return out;
}

Inversion invert(const Vec& x, const ConeParams& p) {
    auto inv = try_invert(x, p);
    if (!inv) {
        std::ostringstream msg;
        msg << "invert: point (" << x.transpose() << ") is outside the cone";
        throw OutsideCone(msg.str());
    }
    return *inv;
}

bool in_cone(const Vec& x, const ConeParams& p) {
    return try_invert(x, p).has_value();
}

Vec inward_normal_q(int h, const Vec& q, const ConeParams& p) {
    if (h < 0 || h >= p.d) throw InvalidArgument("inward_normal: face index out of range");
    const double e = (p.alpha - 1.0) / p.alpha;
    double others = 0.0;
    for (int l = 0; l < p.d; ++l) {
        if (l != h) others += q[l];
    }
    if (!(others > 0.0)) throw InvalidArgument("inward_normal: undefined at the vertex");
    const double a = p.inv_mu2() * std::pow(others, -e);
    Vec n(p.d);
    double tsum = 0.0;
    for (int j = 0; j < p.d; ++j) {
        if (j == h) continue;
        const double qe = q[j] > 0.0 ? std::pow(q[j], e) : 0.0;
        n[j] = -a * qe;
        tsum += qe;
    }
    n[h] = 1.0 + a * tsum;
    return n / n.norm();
}

Vec inward_normal(int h, const Vec& x, const ConeParams& p) {
    const Inversion inv = invert(x, p);
    if (inv.faces.at_vertex) throw InvalidArgument("inward_normal: undefined at the vertex");
    if (!inv.faces.contains(h)) {
        throw NotOnFace("inward_normal: point is not on face " + std::to_string(h));
    }
    return inward_normal_q(h, inv.q, p);
}

std::vector<Vec> reflection_cone(const Vec& x, const ConeParams& p) {
    const Inversion inv = invert(x, p);
    std::vector<Vec> gens;
    if (inv.faces.at_vertex) {
        for (int h = 0; h < p.d; ++h) gens.push_back(Vec::Unit(p.d, h));
        return gens;
    }
    if (inv.faces.active.empty()) throw InteriorPoint("reflection_cone: point is interior");
    for (int h : inv.faces.active) gens.push_back(Vec::Unit(p.d, h));
    return gens;
}

Mat reflection_matrix(const Vec& x, const ConeParams& p) {
    const Inversion inv = invert(x, p);
    if (inv.faces.at_vertex) throw InvalidArgument("reflection_matrix: undefined at the vertex");
    const auto& faces = inv.faces.active;
    const auto k = static_cast<Eigen::Index>(faces.size());
    std::vector<Vec> normals;
    normals.reserve(faces.size());
    for (int h : faces) normals.push_back(inward_normal_q(h, inv.q, p));
    Mat m(k, k);
    for (Eigen::Index i = 0; i < k; ++i) {
        const double gn = normals[i][faces[i]];
        for (Eigen::Index j = 0; j < k; ++j) {
            m(i, j) = std::abs(normals[j][faces[i]]) / gn - (i == j ? 1.0 : 0.0);
        }
    }
    return m;
}

double spectral_radius(const Mat& m) {
    if (m.size() == 0) return 0.0;
    Eigen::EigenSolver<Mat> es(m, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

std::vector<BoundarySample> sample_boundary(const ConeParams& p, const BoundarySamplerConfig& cfg) {
    p.validate();
    std::vector<std::vector<int>> face_sets;
    for (unsigned mask = 1; mask + 1 < (1u << p.d); ++mask) {
        std::vector<int> hs;
        for (int h = 0; h < p.d; ++h) {
            if (mask & (1u << h)) hs.push_back(h);
        }
        face_sets.push_back(std::move(hs));
    }
    const std::vector<double> radii = cfg.radii.empty() ? std::vector<double>{1.0} : cfg.radii;
    std::vector<BoundarySample> out;
    out.reserve(static_cast<std::size_t>(std::max(cfg.n_samples, 0)));
    for (int i = 0; i < cfg.n_samples; ++i) {
        const auto& hs = face_sets[static_cast<std::size_t>(i) % face_sets.size()];
        const double r = radii[(static_cast<std::size_t>(i) / face_sets.size()) % radii.size()];
        PathRng rng(cfg.seed, static_cast<std::uint64_t>(i));
        Vec q(p.d);
        for (int j = 0; j < p.d; ++j) {
            const double u = cfg.log_q_min + (cfg.log_q_max - cfg.log_q_min) * rng.uniform();
            q[j] = std::pow(10.0, u);
        }
        for (int h : hs) q[h] = 0.0;
        Vec x = embed(q, p);
        x *= r / x.norm();
        out.push_back({x, hs});
    }
    return out;
}

ConditionReport check_condition_G(const ConeParams& p, const BoundarySamplerConfig& cfg) {
    ConditionReport rep;
    rep.condition_id = "G";
    rep.report_tol = cfg.report_tol;
    rep.metadata["d"] = std::to_string(p.d);
    rep.metadata["alpha"] = format_double(p.alpha);
    rep.metadata["mu"] = format_double(p.mu);
    rep.metadata["seed"] = std::to_string(cfg.seed);
    rep.metadata["face_tol"] = format_double(p.face_tol);
    if (!p.c2_certified()) {
        rep.warnings.emplace_back("alpha < 2: faces are not C^2; results are not C2-certified");
    }

    const Vec e = Vec::Constant(p.d, 1.0 / std::sqrt(static_cast<double>(p.d)));
    double vertex_margin = std::numeric_limits<double>::infinity();
    for (int h = 0; h < p.d; ++h) vertex_margin = std::min(vertex_margin, e[h]);
    rep.add(Vec::Zero(p.d), "G(iv)", vertex_margin);

    double max_rho = 0.0;
    const auto samples = sample_boundary(p, cfg);
    for (const auto& s : samples) {
        auto inv = try_invert(s.x, p);
        if (!inv) {
            rep.add(s.x, "membership", -1.0);
            rep.diagnostics.emplace_back("sampled boundary point failed inversion");
            continue;
        }
        const auto& faces = inv->faces.active;
        if (faces != s.faces) {
            rep.add(s.x, "classification", -1.0);
            rep.diagnostics.emplace_back("face classification disagrees with sampled face set");
            continue;
        }
        Mat normals(p.d, static_cast<Eigen::Index>(faces.size()));
        for (std::size_t i = 0; i < faces.size(); ++i) {
            normals.col(static_cast<Eigen::Index>(i)) = inward_normal_q(faces[i], inv->q, p);
        }
        for (std::size_t i = 0; i < faces.size(); ++i) {
            rep.add(s.x, "G(i)", normals(faces[i], static_cast<Eigen::Index>(i)));
        }
        Eigen::JacobiSVD<Mat> svd(normals);
        rep.add(s.x, "G(ii)", svd.singularValues().minCoeff());

        Mat m(normals.cols(), normals.cols());
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            const double gn = normals(faces[i], i);
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                m(i, j) = std::abs(normals(faces[i], j)) / gn - (i == j ? 1.0 : 0.0);
            }
        }
        const double rho = spectral_radius(m);
        max_rho = std::max(max_rho, rho);
        rep.add(s.x, "G(iii)", 1.0 - rho);
        rep.add(s.x, "G(iv).N0", e.dot(s.x) / s.x.norm());
    }
    rep.metadata["n_boundary_samples"] = std::to_string(samples.size());
    rep.metadata["max_spectral_radius"] = format_double(max_rho);
    rep.finalize();
    return rep;
}

}  // namespace orbm
