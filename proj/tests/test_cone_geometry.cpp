#include "orbm/cone_geometry.hpp"

#include <doctest.h>

#include <cmath>

using namespace orbm;

namespace {

ConeParams cone(double mu, double alpha = 2.0) {
    ConeParams p;
    p.mu = mu;
    p.alpha = alpha;
    return p;
}

// Tangent of the face along q_k, normalized; e_k in the limit q_k -> 0.
Vec tangent(int k, const Vec& q, double mu, double alpha) {
    const int d = static_cast<int>(q.size());
    Vec t = Vec::Zero(d);
    if (q[k] <= 0.0) {
        t[k] = 1.0;
        return t;
    }
    const double s = q.sum();
    t.setConstant(std::pow(s, 1.0 / alpha - 1.0) / (mu * mu));
    t[k] += std::pow(q[k], 1.0 / alpha - 1.0);
    return t.normalized();
}

// Normal to face h for d = 3: cross product of the two other tangents,
// oriented so the h-component is positive.
Vec normal_oracle(int h, const Vec& q, double mu, double alpha) {
    const int a = (h + 1) % 3;
    const int b = (h + 2) % 3;
    const Eigen::Vector3d ta = tangent(a, q, mu, alpha);
    const Eigen::Vector3d tb = tangent(b, q, mu, alpha);
    Vec n = ta.cross(tb).normalized();
    if (n[h] < 0) n = -n;
    return n;
}

Vec random_q(PathRng& rng, int d, double lo = -4.0, double hi = 2.0) {
    Vec q(d);
    for (int j = 0; j < d; ++j) q[j] = std::pow(10.0, lo + (hi - lo) * rng.uniform());
    return q;
}

}  // namespace

TEST_CASE("embed matches the defining formula") {
    const auto p = cone(3.0);
    Vec q(3);
    q << 0.0, 4.0, 9.0;
    const Vec x = embed(q, p);
    const double tail = std::sqrt(13.0) / 9.0;
    CHECK(x[0] == doctest::Approx(tail).epsilon(1e-15));
    CHECK(x[1] == doctest::Approx(2.0 + tail).epsilon(1e-15));
    CHECK(x[2] == doctest::Approx(3.0 + tail).epsilon(1e-15));
}

TEST_CASE("inversion round trip on a log grid") {
    for (double mu : {1.0, 3.0, 10.0}) {
        for (double alpha : {1.5, 2.0, 3.0}) {
            const auto p = cone(mu, alpha);
            for (int i = 0; i < 7; ++i) {
                for (int j = 0; j < 7; ++j) {
                    for (int k = 0; k < 7; ++k) {
                        Vec q(3);
                        q << std::pow(10.0, -4 + i), std::pow(10.0, -4 + j), std::pow(10.0, -4 + k);
                        const auto inv = invert(embed(q, p), p);
                        CHECK((inv.q - q).lpNorm<Eigen::Infinity>() <= 1e-8 * (1.0 + q.lpNorm<Eigen::Infinity>()));
                    }
                }
            }
        }
    }
}

TEST_CASE("face classification and membership") {
    const auto p = cone(1.0);
    Vec q(3);
    q << 0.0, 1.0, 1.0;
    const auto inv = invert(embed(q, p), p);
    REQUIRE(inv.faces.active.size() == 1);
    CHECK(inv.faces.active[0] == 0);

    CHECK(invert(Vec::Zero(3), p).faces.at_vertex);
    CHECK(in_cone(Vec::Ones(3), p));
    Vec out(3);
    out << 1.0, 0.0, 0.0;
    CHECK_FALSE(in_cone(out, p));
    CHECK_THROWS_AS(invert(out, p), OutsideCone);
    CHECK_FALSE(try_invert(out, p).has_value());
}

TEST_CASE("inward normal of the documented example") {
    const auto p = cone(1.0);
    Vec q(3);
    q << 0.0, 1.0, 1.0;
    const Vec x = embed(q, p);
    const Vec n = inward_normal(0, x, p);
    CHECK(n[0] == doctest::Approx(0.923880).epsilon(1e-6));
    CHECK(n[1] == doctest::Approx(-0.270598).epsilon(1e-6));
    CHECK(n[2] == doctest::Approx(-0.270598).epsilon(1e-6));
    CHECK((n - normal_oracle(0, q, 1.0, 2.0)).norm() < 1e-12);
    CHECK((inward_normal(0, 3.0 * x, p) - n).norm() < 1e-14);
}

TEST_CASE("normal on a two-face intersection has a zero cross component") {
    const auto p = cone(1.0);
    Vec q(3);
    q << 0.0, 0.0, 1.0;
    const Vec x = embed(q, p);
    const Vec n0 = inward_normal(0, x, p);
    const Vec n1 = inward_normal(1, x, p);
    CHECK(std::abs(n0[1]) < 1e-12);
    CHECK(std::abs(n1[0]) < 1e-12);
    CHECK(n0[0] > 0);
    CHECK(n1[1] > 0);
}

TEST_CASE("normal off the face is rejected") {
    const auto p = cone(1.0);
    CHECK_THROWS_AS(inward_normal(0, Vec::Ones(3), p), NotOnFace);
}

TEST_CASE("reflection cone generators") {
    const auto p = cone(1.0);
    Vec q(3);
    q << 1.0, 0.0, 2.0;
    const auto g = reflection_cone(embed(q, p), p);
    REQUIRE(g.size() == 1);
    CHECK(g[0] == Vec::Unit(3, 1));

    const auto g0 = reflection_cone(Vec::Zero(3), p);
    REQUIRE(g0.size() == 3);
    for (int h = 0; h < 3; ++h) CHECK(g0[static_cast<std::size_t>(h)] == Vec::Unit(3, h));

    CHECK_THROWS_AS(reflection_cone(embed(Vec::Ones(3), p), p), InteriorPoint);
}

TEST_CASE("normals agree with the tangent-space oracle at random face points") {
    for (double mu : {1.0, 3.0, 10.0}) {
        for (double alpha : {1.5, 2.0, 4.0}) {
            const auto p = cone(mu, alpha);
            for (int i = 0; i < 300; ++i) {
                PathRng rng(17, static_cast<std::uint64_t>(i));
                Vec q = random_q(rng, 3);
                const int h = i % 3;
                q[h] = 0.0;
                const Vec n = inward_normal_q(h, q, p);
                CHECK((n - normal_oracle(h, q, mu, alpha)).norm() < 1e-9);
            }
        }
    }
}

TEST_CASE("sampled boundary invariants") {
    for (double mu : {1.0, 3.0, 10.0}) {
        const auto p = cone(mu);
        BoundarySamplerConfig cfg;
        cfg.n_samples = 600;
        cfg.seed = 5;
        for (const auto& s : sample_boundary(p, cfg)) {
            const auto inv = invert(s.x, p);
            REQUIRE(inv.faces.active == s.faces);
            const Vec radial = s.x.normalized();
            for (int h : s.faces) {
                const Vec n = inward_normal(h, s.x, p);
                CHECK(std::abs(n.norm() - 1.0) <= 1e-10);
                CHECK(std::abs(radial.dot(n)) <= 1e-10);
                CHECK(n[h] > 0.0);
                for (double r : {0.1, 10.0}) {
                    CHECK((inward_normal(h, r * s.x, p) - n).norm() <= 1e-10);
                    CHECK(invert(r * s.x, p).faces.active == s.faces);
                }
                for (int k : s.faces) {
                    if (k != h) CHECK(std::abs(n[k]) <= 1e-10);
                }
            }
            CHECK(spectral_radius(reflection_matrix(s.x, p)) <= 1e-8);
        }
    }
}

TEST_CASE("condition G report for the example") {
    BoundarySamplerConfig cfg;
    cfg.n_samples = 300;
    const auto rep = check_condition_G(cone(1.0), cfg);
    CHECK(rep.pass);
    bool saw_vertex = false;
    for (const auto& s : rep.samples) {
        if (s.condition == "G(iv)") {
            saw_vertex = true;
            CHECK(s.margin == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-12));
        }
    }
    CHECK(saw_vertex);

    const auto rough = check_condition_G(cone(3.0, 1.5), cfg);
    CHECK(rough.pass);
    CHECK_FALSE(rough.warnings.empty());
}
