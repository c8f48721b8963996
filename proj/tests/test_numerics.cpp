#include <doctest.h>

#include <cmath>

#include "geoprobe/error.hpp"
#include "geoprobe/numerics.hpp"
#include "helpers.hpp"

using namespace geoprobe;

TEST_CASE("centering") {
    Eigen::MatrixXd X(2, 1);
    X << 1, 3;
    const Eigen::MatrixXd Y = Eigen::MatrixXd::Zero(2, 1);
    const CenteredDesign c = center(X, Y);
    CHECK(c.x(0, 0) == -1.0);
    CHECK(c.x(1, 0) == 1.0);
    CHECK(c.x_mean(0) == 2.0);

    const CenteredDesign again = center(c.x, Y);
    CHECK(again.x == c.x);
    CHECK(again.x_mean.cwiseAbs().maxCoeff() == 0.0);

    const Eigen::MatrixXd R = testing::gaussian(50, 7, 1) * 10 + Eigen::MatrixXd::Constant(50, 7, 3.0);
    const CenteredDesign r = center(R, testing::gaussian(50, 2, 2));
    for (Eigen::Index j = 0; j < 7; ++j) {
        const double sd = std::sqrt(r.x.col(j).squaredNorm() / 49);
        CHECK(std::abs(r.x.col(j).mean()) < 1e-12 * sd);
    }

    try {
        center(Eigen::MatrixXd::Ones(1, 3), Eigen::MatrixXd::Ones(1, 1));
        FAIL("expected insufficient_data");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::insufficient_data);
    }
}

TEST_CASE("ridge on exact linear data") {
    Eigen::MatrixXd X(3, 1);
    X << 1, 2, 3;
    Eigen::MatrixXd Y(3, 1);
    Y << 2, 4, 6;
    const RidgeSolution s0 = ridge_solve(center(X, Y), 0.0);
    CHECK(s0.W(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
    CHECK(std::abs(s0.b(0)) < 1e-14);
    const RidgeSolution s1 = ridge_solve(center(X, Y), 1.0);
    CHECK(s1.W(0, 0) == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
    CHECK(s1.b(0) == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("ridge satisfies the normal equations") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Eigen::MatrixXd X = testing::gaussian(80, 12, seed);
        const Eigen::MatrixXd Y = testing::gaussian(80, 4, seed + 100);
        const CenteredDesign c = center(X, Y);
        for (double alpha : {0.0, 0.5, 10.0}) {
            const RidgeSolution s = ridge_solve(c, alpha);
            const Eigen::MatrixXd g = c.x.transpose() * c.x * s.W.transpose() + alpha * s.W.transpose() - c.x.transpose() * c.y;
            CHECK(g.norm() < 1e-8 * (c.x.transpose() * c.y).norm());
            CHECK((s.b - (c.y_mean - s.W * c.x_mean)).norm() < 1e-12);
        }
    }
}

TEST_CASE("dual and primal ridge agree when d exceeds n") {
    const Eigen::MatrixXd X = testing::gaussian(15, 40, 3);
    const Eigen::MatrixXd Y = testing::gaussian(15, 3, 4);
    const CenteredDesign c = center(X, Y);
    const double alpha = 2.0;
    const RidgeSolution s = ridge_solve(c, alpha);
    const Eigen::MatrixXd primal =
        ((c.x.transpose() * c.x + alpha * Eigen::MatrixXd::Identity(40, 40)).ldlt().solve(c.x.transpose() * c.y))
            .transpose();
    CHECK((s.W - primal).norm() < 1e-10 * primal.norm());
}

TEST_CASE("training loss does not increase as alpha shrinks") {
    const Eigen::MatrixXd X = testing::gaussian(40, 10, 5);
    const Eigen::MatrixXd Y = testing::gaussian(40, 2, 6);
    const CenteredDesign c = center(X, Y);
    double prev = INFINITY;
    for (double alpha : {1000.0, 100.0, 10.0, 1.0, 0.1, 0.0}) {
        const RidgeSolution s = ridge_solve(c, alpha);
        const double loss = (c.x * s.W.transpose() - c.y).squaredNorm();
        CHECK(loss <= prev + 1e-9);
        prev = loss;
    }
}

TEST_CASE("singular system at alpha zero") {
    Eigen::MatrixXd X(4, 2);
    X << 1, 2, 2, 4, 3, 6, 4, 8;
    try {
        ridge_solve(center(X, testing::gaussian(4, 1, 1)), 0.0);
        FAIL("expected singular");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::singular);
        CHECK(std::string(e.what()).find("alpha") != std::string::npos);
    }
    CHECK_NOTHROW(ridge_solve(center(X, testing::gaussian(4, 1, 1)), 1.0));
}

TEST_CASE("svd of a diagonal matrix") {
    Eigen::MatrixXd M(2, 2);
    M << 3, 0, 0, 1;
    const SvdResult s = svd(M);
    CHECK(s.S(0) == doctest::Approx(3.0));
    CHECK(s.S(1) == doctest::Approx(1.0));
    Eigen::MatrixXd N(2, 2);
    N << 1, 0, 0, 3;
    CHECK(svd(N).S(0) == doctest::Approx(3.0));
}

namespace {

void check_svd(const Eigen::MatrixXd& M) {
    const SvdResult s = svd(M);
    const Eigen::Index r0 = std::min(M.rows(), M.cols());
    REQUIRE(s.S.size() == r0);
    REQUIRE(s.U.rows() == M.rows());
    REQUIRE(s.V.rows() == M.cols());
    const Eigen::MatrixXd R = s.U * s.S.asDiagonal() * s.V.transpose();
    CHECK((R - M).norm() <= 1e-10 * std::max(1.0, M.norm()));
    CHECK((s.U.transpose() * s.U - Eigen::MatrixXd::Identity(r0, r0)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((s.V.transpose() * s.V - Eigen::MatrixXd::Identity(r0, r0)).cwiseAbs().maxCoeff() < 1e-10);
    for (Eigen::Index i = 0; i < r0; ++i) {
        CHECK(s.S(i) >= 0.0);
        if (i > 0) CHECK(s.S(i) <= s.S(i - 1));
    }
    const Eigen::JacobiSVD<Eigen::MatrixXd> ref(M);
    CHECK((ref.singularValues() - s.S).norm() < 1e-10 * std::max(1.0, M.norm()));
}

}  // namespace

TEST_CASE("svd reconstruction and orthonormality") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        check_svd(testing::gaussian(5, 64, seed));
        check_svd(testing::gaussian(64, 5, seed));
        check_svd(testing::gaussian(7, 7, seed));
    }
    // Rank-deficient and zero matrices still give orthonormal factors.
    const Eigen::MatrixXd low = testing::gaussian(5, 2, 1) * testing::gaussian(2, 30, 2);
    check_svd(low);
    check_svd(Eigen::MatrixXd::Zero(3, 8));
}

TEST_CASE("singular values are square roots of eigenvalues of M M^T") {
    // 2x2: eigenvalues of a symmetric 2x2 from the characteristic polynomial.
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Eigen::MatrixXd M = testing::gaussian(2, 5, seed);
        const Eigen::Matrix2d G = M * M.transpose();
        const double tr = G.trace();
        const double det = G.determinant();
        const double disc = std::sqrt(tr * tr / 4 - det);
        const SvdResult s = svd(M);
        CHECK(s.S(0) == doctest::Approx(std::sqrt(tr / 2 + disc)).epsilon(1e-10));
        CHECK(s.S(1) == doctest::Approx(std::sqrt(std::max(0.0, tr / 2 - disc))).epsilon(1e-9));
    }
    // 3x3: trigonometric roots of the depressed cubic.
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const Eigen::MatrixXd M = testing::gaussian(3, 6, seed + 50);
        const Eigen::Matrix3d G = M * M.transpose();
        const double q = G.trace() / 3;
        const Eigen::Matrix3d D = G - q * Eigen::Matrix3d::Identity();
        const double p = std::sqrt((D * D).trace() / 6);
        const double r = std::clamp((D / p).determinant() / 2, -1.0, 1.0);
        const double phi = std::acos(r) / 3;
        const double e1 = q + 2 * p * std::cos(phi);
        const double e3 = q + 2 * p * std::cos(phi + 2 * M_PI / 3);
        const double e2 = 3 * q - e1 - e3;
        const SvdResult s = svd(M);
        CHECK(s.S(0) == doctest::Approx(std::sqrt(e1)).epsilon(1e-9));
        CHECK(s.S(1) == doctest::Approx(std::sqrt(e2)).epsilon(1e-9));
        CHECK(s.S(2) == doctest::Approx(std::sqrt(e3)).epsilon(1e-9));
    }
}

TEST_CASE("svd rejects non-finite input") {
    Eigen::MatrixXd M = Eigen::MatrixXd::Ones(2, 3);
    M(1, 1) = std::nan("");
    try {
        svd(M);
        FAIL("expected numeric error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::numeric);
    }
}
