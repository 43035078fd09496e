#include "orbm/hitting.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace orbm;

namespace {

ConeParams cone(double mu) {
    ConeParams p;
    p.mu = mu;
    return p;
}

SimConfig sim(std::uint64_t seed, double origin_eps = 1e-5) {
    SimConfig c;
    c.kappa = 0.01;
    c.dt_max = 1.0;
    c.origin_eps = origin_eps;
    c.seed = seed;
    return c;
}

Mat two_state() {
    Mat q(2, 2);
    q << 0.5, 0.3, 0.2, 0.4;
    return q;
}

// Left and right Perron vectors of the 2x2 kernel by the characteristic polynomial.
struct Perron {
    double lambda;
    Vec left;
    Vec right;
};

Perron perron(const Mat& q) {
    const double tr = q.trace(), det = q.determinant();
    const double lambda = 0.5 * (tr + std::sqrt(tr * tr - 4.0 * det));
    Vec right(2), left(2);
    right << q(0, 1), lambda - q(0, 0);
    left << q(1, 0), lambda - q(0, 0);
    return {lambda, left / left.sum(), right / right.maxCoeff()};
}

}  // namespace

TEST_CASE("single-cell mesh is the central direction") {
    const auto mesh = sphere_mesh(2.0, 1, cone(1.0));
    REQUIRE(mesh.size() == 1);
    CHECK((mesh.center(0) - Vec::Constant(3, 1.0 / 3.0)).norm() < 1e-15);
    const Vec r = mesh.representative(0);
    CHECK(r.norm() == doctest::Approx(2.0));
    CHECK((r.normalized() - Vec::Ones(3) / std::sqrt(3.0)).norm() < 1e-12);
}

TEST_CASE("mesh representatives and radial consistency") {
    for (int cells : {4, 16, 64, 10, 30}) {
        for (double mu : {1.0, 10.0}) {
            const auto p = cone(mu);
            const auto mesh = sphere_mesh(0.5, cells, p);
            CHECK(mesh.size() == cells);
            CHECK((mesh.layout() == SphereMesh::Layout::Triangles) == (cells == 4 || cells == 16 || cells == 64));
            const auto inner = mesh.at_radius(0.5 / 4.0);
            for (int i = 0; i < cells; ++i) {
                const Vec& r = mesh.representative(i);
                CHECK(try_invert(r, p).has_value());
                CHECK(r.norm() == doctest::Approx(0.5).epsilon(1e-12));
                CHECK(mesh.assign(r) == i);
                CHECK(inner.center(i) == mesh.center(i));
                CHECK((inner.representative(i) * 4.0 - r).norm() < 1e-12);
            }
        }
    }
}

TEST_CASE("cell angular radius shrinks with refinement") {
    const auto p = cone(10.0);
    double previous = 4.0;
    for (int cells : {1, 4, 16, 64}) {
        const auto mesh = sphere_mesh(0.5, cells, p);
        const double a = cell_angular_radius(mesh);
        CHECK(a > 0.0);
        CHECK(a < previous);
        CHECK(cell_angular_radius(mesh.at_radius(2.0)) == doctest::Approx(a).epsilon(1e-12));
        previous = a;
    }
    // a single cell reaches out to the cross-section's corners
    const auto one = sphere_mesh(1.0, 1, p);
    const Vec corner = embed(Vec::Unit(3, 0), p).normalized();
    const double corner_angle = std::acos(corner.dot(one.representative(0).normalized()));
    CHECK(cell_angular_radius(one) <= corner_angle + 1e-12);
    CHECK(cell_angular_radius(one) > 0.8 * corner_angle);
}

TEST_CASE("triangle cells cover the simplex") {
    const auto mesh = sphere_mesh(1.0, 16, cone(3.0));
    PathRng rng(2, 0);
    std::vector<int> seen(16, 0);
    for (int i = 0; i < 4000; ++i) {
        Vec w(3);
        for (int j = 0; j < 3; ++j) w[j] = rng.exponential(1.0);
        w /= w.sum();
        const int c = mesh.assign(point_from_coordinates(w, 1.0, mesh.params()));
        REQUIRE(c >= 0);
        REQUIRE(c < 16);
        ++seen[static_cast<std::size_t>(c)];
        const Mat v = mesh.cell_vertices(c);
        // w is a convex combination of the cell's corners
        Mat a(3, 3);
        a << v.transpose();
        const Vec lam = a.colPivHouseholderQr().solve(w);
        CHECK(lam.minCoeff() >= -1e-9);
    }
    for (int s : seen) CHECK(s > 0);
}

TEST_CASE("direction coordinates round trip") {
    const auto p = cone(2.0);
    PathRng rng(3, 0);
    for (int i = 0; i < 200; ++i) {
        Vec w(3);
        for (int j = 0; j < 3; ++j) w[j] = rng.uniform();
        w /= w.sum();
        const Vec x = point_from_coordinates(w, 0.7, p);
        CHECK(x.norm() == doctest::Approx(0.7).epsilon(1e-12));
        CHECK((direction_coordinates(x, p) - w).norm() < 1e-9);
    }
}

TEST_CASE("composition oracles") {
    Mat stochastic(2, 3);
    stochastic << 0.2, 0.3, 0.5, 0.6, 0.4, 0.0;
    Vec nu(2), f(3);
    nu << 0.25, 0.75;
    f << 1.0, -2.0, 5.0;
    CHECK(backward_composition({stochastic}, nu, f).value == doctest::Approx(nu.dot(stochastic * f)).epsilon(1e-14));
    CHECK(backward_composition({stochastic}, nu, Vec::Ones(3)).value == 1.0);

    const Mat q = two_state();
    const auto pv = perron(q);
    Vec g(2);
    g << 3.0, -1.0;
    const double limit = pv.left.dot(g);
    CHECK(limit == doctest::Approx(1.0));
    for (const Vec& start : {Vec(Vec::Unit(2, 0)), Vec(Vec::Unit(2, 1)), Vec(Vec::Constant(2, 0.5))}) {
        const auto c = backward_composition(std::vector<Mat>(200, q), start, g);
        CHECK(c.value == doctest::Approx(limit).epsilon(1e-12));
    }
    const auto rb = ratio_bound_estimate(std::vector<Mat>(200, q));
    CHECK(rb.per_level.back() == doctest::Approx(pv.right.minCoeff()).epsilon(1e-12));
    CHECK(rb.per_level.back() == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

    Mat full(2, 2);
    full << 0.5, 0.5, 0.1, 0.9;
    CHECK(ratio_bound_estimate({full, full}).overall == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("composition is invariant under scaling a kernel") {
    PathRng rng(4, 0);
    std::vector<Mat> ks;
    for (int l = 0; l < 4; ++l) {
        Mat q(5, 5);
        for (int i = 0; i < 5; ++i) {
            for (int j = 0; j < 5; ++j) q(i, j) = 0.2 * rng.uniform();
        }
        ks.push_back(q);
    }
    Vec nu = Vec::Constant(5, 0.2), f(5);
    f << 1, 2, 3, 4, 5;
    const double base = backward_composition(ks, nu, f).value;
    for (std::size_t l = 0; l < ks.size(); ++l) {
        auto scaled = ks;
        scaled[l] *= 1e-3 + 7.0 * static_cast<double>(l);
        CHECK(std::abs(backward_composition(scaled, nu, f).value - base) <= 1e-12 * std::abs(base));
    }
    // raw product oracle
    Vec v = f, u = Vec::Ones(5);
    for (const Mat& q : ks) {
        v = q * v;
        u = q * u;
    }
    CHECK(base == doctest::Approx(nu.dot(v) / nu.dot(u)).epsilon(1e-12));
    const Vec dist = hitting_distribution(ks, nu);
    CHECK(dist.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(dist.dot(f) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("extinction and shape errors") {
    Mat dead = Mat::Zero(2, 2);
    CHECK_THROWS_AS(backward_composition({dead}, Vec::Constant(2, 0.5), Vec::Ones(2)), MassExtinction);
    Mat half(2, 2);
    half << 0.5, 0.5, 0.0, 0.0;
    CHECK_THROWS_AS(backward_composition({half}, Vec::Unit(2, 1), Vec::Ones(2)), MassExtinction);
    CHECK_THROWS_AS(backward_composition({Mat::Identity(2, 3), Mat::Identity(3, 3)}, Vec::Ones(3), Vec::Ones(3)),
                    InvalidArgument);
}

TEST_CASE("total variation") {
    Vec a(3), b(3);
    a << 0.5, 0.5, 0.0;
    b << 0.0, 0.5, 0.5;
    CHECK(total_variation(a, b) == doctest::Approx(0.5));
    CHECK(total_variation(a, a) == 0.0);
}

TEST_CASE("estimated kernels are substochastic with binomial errors") {
    const auto p = cone(10.0);
    const auto dp = example_diffusion(3, 10.0, Vec::Zero(3));
    const auto src = sphere_mesh(0.125, 4, p);
    const auto tgt = src.at_radius(0.5);
    const auto k1 = estimate_kernel(src, tgt, 1000, sim(5), p, dp);
    const auto k2 = estimate_kernel(src, tgt, 4000, sim(5), p, dp, 1, 1);
    CHECK(k1.total_failed() == 0);
    for (int i = 0; i < 4; ++i) {
        CHECK(k1.matrix.row(i).sum() <= 1.0 + 1e-12);
        CHECK(k1.kill[i] == doctest::Approx(1.0 - k1.matrix.row(i).sum()).epsilon(1e-12));
        // proxy leak bound at the source radius
        CHECK(k1.kill[i] <= std::pow(1e-5 / 0.125, 0.8) + 3.0 * k1.kill_std_error[i] + 1e-12);
        for (int j = 0; j < 4; ++j) {
            const double pij = k1.matrix(i, j);
            CHECK(k1.std_error(i, j) == doctest::Approx(std::sqrt(pij * (1 - pij) / 1000.0)).epsilon(1e-12));
            if (pij > 0.05) CHECK(k1.std_error(i, j) / k2.std_error(i, j) == doctest::Approx(2.0).epsilon(0.2));
        }
    }
}

TEST_CASE("consecutive kernels compose to the two-level kernel") {
    const auto p = cone(10.0);
    const auto dp = example_diffusion(3, 10.0, Vec::Zero(3));
    const int cells = 4;
    const long n = 4000;
    const auto q1 = estimate_level_kernel(1, 0.5, cells, n, sim(6), p, dp);
    const auto q2 = estimate_level_kernel(2, 0.5, cells, n, sim(7), p, dp);
    const auto src = sphere_mesh(level_radius(0.5, 2), cells, p);
    const auto direct = estimate_kernel(src, src.at_radius(0.5), n, sim(8), p, dp);
    const Mat comp = q2.matrix * q1.matrix;
    for (int i = 0; i < cells; ++i) {
        for (int j = 0; j < cells; ++j) {
            double var = direct.std_error(i, j) * direct.std_error(i, j);
            for (int k = 0; k < cells; ++k) {
                var += std::pow(q2.matrix(i, k) * q1.std_error(k, j), 2) + std::pow(q2.std_error(i, k) * q1.matrix(k, j), 2);
            }
            CHECK(std::abs(comp(i, j) - direct.matrix(i, j)) <= 3.0 * std::sqrt(var));
        }
    }
}

TEST_CASE("kernels at consecutive levels agree for zero drift") {
    const auto p = cone(10.0);
    const auto dp = example_diffusion(3, 10.0, Vec::Zero(3));
    const auto a = estimate_level_kernel(1, 0.5, 4, 4000, sim(9, 1e-7), p, dp);
    const auto b = estimate_level_kernel(2, 0.5, 4, 4000, sim(10, 1e-7), p, dp);
    for (int i = 0; i < 4; ++i) {
        for (int j = 0; j < 4; ++j) {
            CHECK(std::abs(a.matrix(i, j) - b.matrix(i, j)) <= 3.0 * std::hypot(a.std_error(i, j), b.std_error(i, j)));
        }
    }
}

TEST_CASE("uniqueness experiment plumbing") {
    const auto p = cone(10.0);
    const auto dp = example_diffusion(3, 10.0, Vec::Zero(3));
    UniquenessConfig u;
    u.delta = 0.5;
    u.levels = 1;
    u.cells = 2;
    u.paths_per_cell = 200;
    u.initial = {point_mass(2, 0), point_mass(2, 0)};
    u.bootstrap = 5;
    const auto rep = uniqueness_experiment(u, sim(11), p, dp);
    CHECK(rep.tv(0, 1) == 0.0);
    CHECK(rep.max_tv == 0.0);
    CHECK_FALSE(rep.warnings.empty());

    u.levels = 6;
    CHECK_THROWS_AS(uniqueness_experiment(u, sim(11), p, dp), InvalidArgument);
    u.levels = 3;
    CHECK_THROWS_AS(uniqueness_experiment(u, sim(11, 1e-3), p, dp), InvalidArgument);
}

TEST_CASE("kernel csv round trip") {
    const auto p = cone(10.0);
    const auto dp = example_diffusion(3, 10.0, Vec::Zero(3));
    std::vector<KilledKernel> ks{estimate_level_kernel(1, 0.5, 4, 50, sim(12), p, dp),
                                 estimate_level_kernel(2, 0.5, 4, 50, sim(12), p, dp)};
    std::stringstream ss;
    write_kernels_csv(ss, ks);
    CHECK(ss.str().rfind("level,source_radius,target_radius,row,col,value\n", 0) == 0);
    const auto back = read_kernels_csv(ss);
    REQUIRE(back.size() == 2);
    CHECK(back[0] == ks[0].matrix);
    CHECK(back[1] == ks[1].matrix);
}
