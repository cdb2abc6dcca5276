#include <doctest.h>

#include "ggps/kernel.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace ggps;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

KernelParams params(double sigma, double l, double jitter = 1e-10, int ngrad = 0, double lam = 0.0) {
    KernelParams p;
    p.sigma = sigma;
    p.length_scale = l;
    p.jitter = jitter;
    p.grad_noise = Eigen::VectorXd::Constant(std::max(ngrad, 1), lam);
    return p;
}

// Central finite differences of rbf_eval, the independent oracle for
// deriv_kernel_eval. Index convention matches: 0 means the value itself.
double fd_first(const KernelParams& p, int n, bool wrt_second,
                VectorXd x, VectorXd x2, double h) {
    VectorXd& target = wrt_second ? x2 : x;
    target[n - 1] += h;
    const double up = rbf_eval(p, x, x2);
    target[n - 1] -= 2.0 * h;
    const double dn = rbf_eval(p, x, x2);
    return (up - dn) / (2.0 * h);
}

double fd_second(const KernelParams& p, int n, int m,
                 const VectorXd& x, const VectorXd& x2, double h) {
    auto k = [&](double a, double b) {
        VectorXd xa = x, xb = x2;
        xa[n - 1] += a;
        xb[m - 1] += b;
        return rbf_eval(p, xa, xb);
    };
    return (k(h, h) - k(h, -h) - k(-h, h) + k(-h, -h)) / (4.0 * h * h);
}

} // namespace

TEST_CASE("rbf_eval frozen values and symmetry") {
    auto p = params(1.0, 1.0);
    VectorXd x = VectorXd::Zero(3), x2 = VectorXd::Zero(3);
    CHECK(rbf_eval(p, x, x) == doctest::Approx(1.0).epsilon(1e-15));

    x2[0] = 1.0; // unit offset: k = exp(-0.5)
    CHECK(rbf_eval(p, x, x2) == doctest::Approx(0.6065306597126334).epsilon(1e-14));
    CHECK(rbf_eval(p, x, x2) == doctest::Approx(rbf_eval(p, x2, x)).epsilon(1e-16));

    auto p2 = params(2.5, 0.5);
    CHECK(rbf_eval(p2, x, x) == doctest::Approx(2.5).epsilon(1e-15));
    // sigma*exp(-1/(2*0.25)) = 2.5*exp(-2)
    CHECK(rbf_eval(p2, x, x2) == doctest::Approx(2.5 * std::exp(-2.0)).epsilon(1e-14));
}

TEST_CASE("rbf_eval rejects bad input") {
    auto p = params(1.0, 1.0);
    VectorXd x = VectorXd::Zero(3);
    VectorXd bad = x;
    bad[1] = std::nan("");
    CHECK_THROWS_AS((void)rbf_eval(p, x, bad), std::invalid_argument);
    CHECK_THROWS_AS((void)rbf_eval(p, x, VectorXd::Zero(2)), std::invalid_argument);

    auto neg = params(-1.0, 1.0);
    CHECK_THROWS_AS(neg.validate(0), std::invalid_argument);
    auto negl = params(1.0, 0.0);
    CHECK_THROWS_AS(negl.validate(0), std::invalid_argument);
}

TEST_CASE("deriv_kernel_eval frozen values") {
    auto p = params(1.0, 1.0);
    VectorXd x = VectorXd::Zero(4);

    // same point: second derivative diagonal is sigma/l^2, first derivative 0
    for (int n = 1; n <= 4; ++n) {
        CHECK(deriv_kernel_eval(p, n, n, x, x) == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(deriv_kernel_eval(p, n, 0, x, x) == doctest::Approx(0.0));
    }
    auto p2 = params(3.0, 0.5);
    CHECK(deriv_kernel_eval(p2, 2, 2, x, x) == doctest::Approx(3.0 / 0.25).epsilon(1e-15));

    // mixed second derivative at offset (1,1,0,0): -1*exp(-1)
    VectorXd x2 = VectorXd::Zero(4);
    x2[0] = -1.0;
    x2[1] = -1.0;
    CHECK(deriv_kernel_eval(p, 1, 2, x, x2) == doctest::Approx(-std::exp(-1.0)).epsilon(1e-14));

    CHECK(deriv_kernel_eval(p, 0, 0, x, x2) == doctest::Approx(rbf_eval(p, x, x2)).epsilon(1e-16));

    CHECK_THROWS_AS((void)deriv_kernel_eval(p, 5, 0, x, x2), std::invalid_argument);
    CHECK_THROWS_AS((void)deriv_kernel_eval(p, 0, -1, x, x2), std::invalid_argument);
}

TEST_CASE("deriv_kernel_eval matches finite differences") {
    auto p = params(1.3, 0.7);
    std::mt19937_64 rng(314159);
    const int d = 4;
    const double h = 1e-5;

    for (int trial = 0; trial < 300; ++trial) {
        VectorXd x = tu::rand_vec(rng, d, -1.0, 1.0);
        // per-dimension offsets of magnitude [0.25, 0.75]*l keep every first and
        // second derivative bounded away from zero, so the relative comparison
        // is not dominated by the oracle's eps/h^2 roundoff
        VectorXd x2 = x;
        for (int c = 0; c < d; ++c) {
            const double mag = tu::uniform(rng, 0.25 * 0.7, 0.75 * 0.7);
            x2[c] += (rng() & 1) ? mag : -mag;
        }
        const int n = 1 + static_cast<int>(rng() % d);
        const int m = 1 + static_cast<int>(rng() % d);

        CHECK(tu::rel_err(deriv_kernel_eval(p, n, 0, x, x2), fd_first(p, n, false, x, x2, h)) < 1e-6);
        CHECK(tu::rel_err(deriv_kernel_eval(p, 0, m, x, x2), fd_first(p, m, true, x, x2, h)) < 1e-6);
        CHECK(tu::rel_err(deriv_kernel_eval(p, n, m, x, x2), fd_second(p, n, m, x, x2, h)) < 1e-4);
    }
}

TEST_CASE("derivative kernel index identities") {
    auto p = params(0.8, 0.6);
    std::mt19937_64 rng(2718);
    for (int trial = 0; trial < 50; ++trial) {
        VectorXd x = tu::rand_vec(rng, 6, -1.5, 1.5);
        VectorXd x2 = tu::rand_vec(rng, 6, -1.5, 1.5);
        const int n = 1 + static_cast<int>(rng() % 6);
        const int m = 1 + static_cast<int>(rng() % 6);
        // moving the derivative to the other argument swaps the sign pattern
        CHECK(deriv_kernel_eval(p, n, 0, x, x2)
              == doctest::Approx(deriv_kernel_eval(p, 0, n, x2, x)).epsilon(1e-14));
        // cross symmetry of the full extended kernel
        CHECK(deriv_kernel_eval(p, n, m, x, x2)
              == doctest::Approx(deriv_kernel_eval(p, m, n, x2, x)).epsilon(1e-14));
    }
}

TEST_CASE("assemble_training_cov single point block") {
    // d=1, one value point and one gradient point at the same location:
    // [[sigma + jitter, 0], [0, sigma/l^2 + lambda^2]]
    auto p = params(2.0, 0.5, 1e-8, 1, 0.3);
    MatrixXd X(1, 1);
    X(0, 0) = 0.7;
    MatrixXd K = assemble_training_cov(p, X, X, {1});
    REQUIRE(K.rows() == 2);
    CHECK(K(0, 0) == doctest::Approx(2.0 + 1e-8).epsilon(1e-15));
    CHECK(K(0, 1) == doctest::Approx(0.0));
    CHECK(K(1, 0) == doctest::Approx(0.0));
    CHECK(K(1, 1) == doctest::Approx(2.0 / 0.25 + 0.3).epsilon(1e-15));
}

TEST_CASE("assembled covariance is symmetric PSD with jitter") {
    std::mt19937_64 rng(99);
    auto p = params(1.0, 0.5, 1e-10, 3, 0.2);
    for (int trial = 0; trial < 100; ++trial) {
        MatrixXd X = tu::rand_mat(rng, 20, 4, -1.0, 1.0);
        MatrixXd K = assemble_training_cov(p, X, X, {1, 3, 4});
        REQUIRE(K.rows() == 20 + 3 * 20);
        CHECK((K - K.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(K, Eigen::EigenvaluesOnly);
        CHECK(es.eigenvalues().minCoeff() > -1e-10);
        // value-row diagonal keeps at least sigma after jitter
        CHECK(K.diagonal().head(20).minCoeff() >= p.sigma);
    }
}

TEST_CASE("assemble_training_cov equals entry-wise deriv_kernel_eval") {
    std::mt19937_64 rng(4242);
    auto p = params(1.7, 0.8, 1e-9, 2, 0.15);
    MatrixXd Xd = tu::rand_mat(rng, 5, 3, -1.0, 1.0);
    MatrixXd Xg = tu::rand_mat(rng, 4, 3, -1.0, 1.0);
    std::vector<int> dims{2, 3};
    MatrixXd K = assemble_training_cov(p, Xd, Xg, dims);
    StackedLayout lay{5, 4, dims};
    REQUIRE(K.rows() == lay.total_rows());

    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 4; ++j)
            for (int g = 0; g < 2; ++g)
                CHECK(K(lay.value_row(i), lay.grad_row(g, j))
                      == doctest::Approx(deriv_kernel_eval(p, 0, dims[g], Xd.row(i), Xg.row(j)))
                             .epsilon(1e-14));

    for (int ga = 0; ga < 2; ++ga)
        for (int gb = 0; gb < 2; ++gb)
            for (int i = 0; i < 4; ++i)
                for (int j = 0; j < 4; ++j) {
                    double want = deriv_kernel_eval(p, dims[ga], dims[gb], Xg.row(i), Xg.row(j));
                    if (ga == gb && i == j) want += p.grad_noise[ga];
                    CHECK(K(lay.grad_row(ga, i), lay.grad_row(gb, j))
                          == doctest::Approx(want).epsilon(1e-14));
                }
}

TEST_CASE("assemble_query_cross shape and content") {
    std::mt19937_64 rng(7);
    auto p = params(1.0, 0.5, 1e-10, 2, 0.1);
    MatrixXd Xq = tu::rand_mat(rng, 2, 3, -1.0, 1.0);
    MatrixXd Xd = tu::rand_mat(rng, 3, 3, -1.0, 1.0);
    MatrixXd Xg = tu::rand_mat(rng, 3, 3, -1.0, 1.0);
    std::vector<int> dims{1, 3};

    MatrixXd C = assemble_query_cross(p, Xq, Xd, Xg, dims);
    REQUIRE(C.rows() == 2);
    REQUIRE(C.cols() == 9); // 3 value + 2 dims * 3 gradient points

    StackedLayout lay{3, 3, dims};
    for (int q = 0; q < 2; ++q) {
        for (int j = 0; j < 3; ++j)
            CHECK(C(q, j) == doctest::Approx(rbf_eval(p, Xq.row(q), Xd.row(j))).epsilon(1e-14));
        for (int g = 0; g < 2; ++g)
            for (int j = 0; j < 3; ++j)
                CHECK(C(q, lay.grad_row(g, j))
                      == doctest::Approx(deriv_kernel_eval(p, 0, dims[g], Xq.row(q), Xg.row(j)))
                             .epsilon(1e-14));
    }
}

TEST_CASE("fill_cross_row matches assemble_query_cross") {
    std::mt19937_64 rng(11);
    auto p = params(1.2, 0.6, 1e-10, 3, 0.1);
    MatrixXd pts = tu::rand_mat(rng, 7, 8, -1.0, 1.0);
    std::vector<int> dims{1, 4, 7};
    VectorXd x = tu::rand_vec(rng, 8, -1.0, 1.0);

    VectorXd row;
    fill_cross_row(p, x, pts, dims, true, row);
    MatrixXd ref = assemble_query_cross(p, x.transpose(), pts, pts, dims);
    REQUIRE(row.size() == ref.cols());
    CHECK((row.transpose() - ref.row(0)).cwiseAbs().maxCoeff() < 1e-14);

    fill_cross_row(p, x, pts, dims, false, row);
    MatrixXd refv = assemble_query_cross(p, x.transpose(), pts, MatrixXd(0, 8), {});
    REQUIRE(row.size() == 7);
    CHECK((row.transpose() - refv.row(0)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("assembly input validation") {
    auto p = params(1.0, 0.5, 1e-10, 2, 0.1);
    MatrixXd X = MatrixXd::Zero(3, 4);
    CHECK_THROWS_AS((void)assemble_training_cov(p, X, X, {3, 2}), std::invalid_argument);
    CHECK_THROWS_AS((void)assemble_training_cov(p, X, X, {0}), std::invalid_argument);
    CHECK_THROWS_AS((void)assemble_training_cov(p, X, X, {1, 5}), std::invalid_argument);
    CHECK_THROWS_AS((void)assemble_training_cov(p, X, MatrixXd::Zero(2, 3), {1}),
                    std::invalid_argument);
}
