#include "orbm/ergodic.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace orbm;

namespace {

Mat two_state() {
    Mat q(2, 2);
    q << 0.5, 0.3, 0.2, 0.4;
    return q;
}

// Overlap in density form: integrate min of the two Radon-Nikodym
// derivatives against Q(x, .) + Q(xt, .).
double overlap_density(const Mat& q, int x, int xt) {
    double s = 0.0;
    for (int y = 0; y < q.cols(); ++y) {
        const double m = q(x, y) + q(xt, y);
        if (m == 0.0) continue;
        s += std::min(q(x, y) / m, q(xt, y) / m) * m;
    }
    return s;
}

Mat random_kernel(PathRng& rng, int rows, int cols, double eta, double mass) {
    Mat q(rows, cols);
    for (int i = 0; i < rows; ++i) {
        for (int j = 0; j < cols; ++j) q(i, j) = eta + rng.uniform();
        q.row(i) *= mass / q.row(i).sum();
    }
    return q;
}

}  // namespace

TEST_CASE("overlap") {
    const Mat q = two_state();
    CHECK(overlap(q, 0, 1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(overlap(q, 0, 1) == doctest::Approx(overlap_density(q, 0, 1)).epsilon(1e-15));
    CHECK(overlap(q, 0, 0) == doctest::Approx(0.8));
    CHECK(overlap(Mat::Identity(2, 2), 0, 1) == 0.0);

    PathRng rng(1, 0);
    for (int i = 0; i < 100; ++i) {
        Mat k = random_kernel(rng, 4, 5, 0.0, 0.3 + 0.7 * rng.uniform());
        k(0, 2) = 0.0;
        const int x = i % 4, xt = (i / 4) % 4;
        CHECK(overlap(k, x, xt) == doctest::Approx(overlap_density(k, x, xt)).epsilon(1e-14));
        CHECK(overlap(k, x, xt) == overlap(k, xt, x));
        CHECK(overlap(k, x, xt) <= std::min(k.row(x).sum(), k.row(xt).sum()) + 1e-15);
    }
}

TEST_CASE("assumptions of the constant two-state chain") {
    const auto seq = KernelSequence::constant(two_state(), 200);
    const auto rep = check_assumptions(seq);
    CHECK(rep.ok());
    CHECK(std::abs(rep.c0 - 2.0 / 3.0) < 1e-6);
    CHECK(rep.eps0 == 0.5);
    CHECK(rep.c0_trace.size() == 200);
    CHECK(rep.eps_trace.size() == 200);
}

TEST_CASE("identity kernels violate the overlap assumption") {
    const auto rep = check_assumptions(KernelSequence::constant(Mat::Identity(2, 2), 10));
    REQUIRE_FALSE(rep.ok());
    const auto& v = rep.violations.front();
    CHECK(v.kind == Violation::Kind::Overlap);
    CHECK(v.x == 0);
    CHECK(v.xt == 1);
    CHECK(v.value == 0.0);
    CHECK(v.describe().rfind("Violation(ii)", 0) == 0);
}

TEST_CASE("kernel sequence validation") {
    CHECK_THROWS_AS(KernelSequence({two_state(), Mat::Zero(2, 2)}), InvalidArgument);
    Mat heavy = two_state();
    heavy(0, 0) = 0.9;
    CHECK_THROWS_AS(KernelSequence({heavy}), InvalidArgument);
    Mat neg = two_state();
    neg(1, 1) = -0.1;
    CHECK_THROWS_AS(KernelSequence({neg}), InvalidArgument);
    CHECK_THROWS_AS(KernelSequence({Mat::Constant(2, 3, 0.1), Mat::Constant(3, 3, 0.1)}), InvalidArgument);
    CHECK_NOTHROW(KernelSequence({Mat::Constant(2, 3, 0.1), Mat::Constant(4, 2, 0.1)}));
}

TEST_CASE("normalized limit of the two-state chain") {
    const auto seq = KernelSequence::constant(two_state(), 200);
    const auto nus = random_nu_sequences(seq, 3, 42);
    const auto diag = normalized_limit(seq, {Vec::Unit(2, 0), Vec::Ones(2)}, nus);
    CHECK(diag.converged);
    CHECK_NOTHROW(diag.require_converged());
    CHECK(std::abs(diag.c_f[0] - 0.5) < 1e-10);
    for (const auto& trace : diag.ratio_trace[0]) CHECK(std::abs(trace.back() - 0.5) < 1e-10);
    for (const auto& trace : diag.ratio_trace[1]) {
        for (double v : trace) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("random nu sequences are probability vectors") {
    const auto seq = KernelSequence({Mat::Constant(3, 2, 0.2), Mat::Constant(4, 3, 0.1)});
    const auto nus = random_nu_sequences(seq, 2, 7);
    REQUIRE(nus.size() == 2);
    for (const auto& s : nus) {
        REQUIRE(s.size() == 2);
        CHECK(s[0].size() == 3);
        CHECK(s[1].size() == 4);
        for (const auto& v : s) {
            CHECK(v.minCoeff() >= 0.0);
            CHECK(v.sum() == doctest::Approx(1.0).epsilon(1e-14));
        }
    }
    CHECK(random_nu_sequences(seq, 2, 7)[1][1] == nus[1][1]);
}

TEST_CASE("identity kernels with alternating laws do not converge") {
    const auto seq = KernelSequence::constant(Mat::Identity(2, 2), 50);
    NuSequence alt;
    for (int n = 1; n <= 50; ++n) alt.push_back(Vec::Unit(2, n % 2));
    LimitOptions opts;
    const auto diag = normalized_limit(seq, {Vec::Unit(2, 0)}, {alt}, opts);
    CHECK_FALSE(diag.converged);
    CHECK_THROWS_AS(diag.require_converged(), HorizonExceeded);
    try {
        diag.require_converged();
    } catch (const HorizonExceeded& e) {
        CHECK(std::string(e.what()).find("Violation(ii)") != std::string::npos);
    }
}

TEST_CASE("renormalization does not change the ratios") {
    PathRng rng(3, 0);
    std::vector<Mat> ks;
    for (int l = 0; l < 40; ++l) ks.push_back(random_kernel(rng, 3, 3, 0.05, 0.5));
    const KernelSequence seq(ks);
    const auto nus = random_nu_sequences(seq, 2, 5);
    Vec f(3);
    f << 1.0, -1.0, 2.0;
    LimitOptions raw;
    raw.renormalize = false;
    const auto a = normalized_limit(seq, {f}, nus);
    const auto b = normalized_limit(seq, {f}, nus, raw);
    for (std::size_t s = 0; s < nus.size(); ++s) {
        for (std::size_t n = 0; n < a.ratio_trace[0][s].size(); ++n) {
            CHECK(a.ratio_trace[0][s][n] == doctest::Approx(b.ratio_trace[0][s][n]).epsilon(1e-12));
        }
    }
}

TEST_CASE("positive stochastic kernels contract geometrically") {
    PathRng rng(4, 0);
    const int states = 4;
    const double eta = 0.05;
    std::vector<Mat> ks;
    for (int l = 0; l < 500; ++l) {
        Mat q = random_kernel(rng, states, states, 0.0, 1.0 - states * eta);
        q.array() += eta;
        ks.push_back(q);
    }
    const KernelSequence seq(ks);
    const auto rep = check_assumptions(seq);
    CHECK(rep.eps0 >= states * eta - 1e-12);
    LimitOptions opts;
    opts.tol = 1e-10;
    const auto diag = normalized_limit(seq, {Vec::Unit(states, 0)}, random_nu_sequences(seq, 3, 9), opts);
    REQUIRE(diag.converged);
    const int bound = static_cast<int>(std::ceil(std::log(opts.tol) / std::log(1.0 - rep.eps0 / 2.0)));
    CHECK(*diag.converged_at <= bound);
}

TEST_CASE("the limit is linear in f") {
    PathRng rng(5, 0);
    std::vector<Mat> ks;
    for (int l = 0; l < 200; ++l) ks.push_back(random_kernel(rng, 3, 3, 0.1, 0.7));
    const KernelSequence seq(ks);
    Vec f(3), g(3);
    f << 1.0, 0.0, 2.0;
    g << -1.0, 3.0, 0.5;
    const auto nus = random_nu_sequences(seq, 2, 11);
    const auto diag = normalized_limit(seq, {f, g, 2.0 * f - 3.0 * g}, nus);
    REQUIRE(diag.converged);
    CHECK(std::abs(diag.c_f[2] - (2.0 * diag.c_f[0] - 3.0 * diag.c_f[1])) < 1e-10);
}

TEST_CASE("diagnostics output") {
    const auto seq = KernelSequence::constant(two_state(), 60);
    const auto diag = normalized_limit(seq, {Vec::Unit(2, 0)}, {constant_nu(seq, Vec::Unit(2, 1))});
    std::ostringstream text, csv;
    diag.write_text(text);
    diag.write_trace_csv(csv);
    CHECK(text.str().find("converged") != std::string::npos);
    CHECK(csv.str().rfind("n,f,nu,value\n", 0) == 0);
}
