#include <doctest.h>

#include <cmath>

#include "geoprobe/error.hpp"
#include "geoprobe/metrics.hpp"
#include "helpers.hpp"

using namespace geoprobe;

TEST_CASE("perfect and mean predictions") {
    const Eigen::MatrixXd Y = testing::gaussian(20, 3, 1);
    for (const auto& r : r2_per_target(Y, Y)) CHECK(*r == 1.0);
    const Eigen::MatrixXd mean = Y.colwise().mean().replicate(20, 1);
    for (const auto& r : r2_per_target(Y, mean)) CHECK(std::abs(*r) < 1e-14);
}

TEST_CASE("worse than the mean, three-sample hand case") {
    Eigen::MatrixXd Y(3, 1);
    Y << 1, 2, 3;
    const Eigen::MatrixXd Yhat = Eigen::MatrixXd::Constant(3, 1, 5.0);
    // ss_res = 16 + 9 + 4 = 29, ss_tot = 2
    CHECK(*r2_per_target(Y, Yhat)[0] == doctest::Approx(1.0 - 29.0 / 2.0));
}

TEST_CASE("zero-variance column is undefined and left out of the mean") {
    Eigen::MatrixXd Y(4, 2);
    Y << 1, 7, 2, 7, 3, 7, 4, 7;
    Eigen::MatrixXd Yhat = Y;
    Yhat(0, 0) = 2;
    const EvalReport r = evaluate(Y, Yhat, {"a", "b"});
    CHECK(r.r2_per_target[0].has_value());
    CHECK_FALSE(r.r2_per_target[1].has_value());
    CHECK(*r.r2_uniform_mean == doctest::Approx(*r.r2_per_target[0]));
    CHECK(r.n_test == 4);
    CHECK(r.target_names == std::vector<std::string>{"a", "b"});
}

TEST_CASE("n < 2 is insufficient data") {
    try {
        r2_per_target(Eigen::MatrixXd::Ones(1, 2), Eigen::MatrixXd::Ones(1, 2));
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::insufficient_data);
    }
}

TEST_CASE("mae") {
    const Eigen::MatrixXd Y = testing::gaussian(15, 4, 2);
    CHECK(mae(Y, Y) == 0.0);
    CHECK(mae(Y, (Y.array() + 2.0).matrix()) == doctest::Approx(2.0));
    const Eigen::MatrixXd Z = testing::gaussian(15, 4, 3);
    double s = 0.0;
    for (Eigen::Index i = 0; i < 15; ++i)
        for (Eigen::Index k = 0; k < 4; ++k) s += std::abs(Y(i, k) - Z(i, k));
    CHECK(mae(Y, Z) == doctest::Approx(s / 60.0).epsilon(1e-14));
    CHECK(mae((3.0 * Y).eval(), (3.0 * Z).eval()) == doctest::Approx(3.0 * mae(Y, Z)));
}

TEST_CASE("translation invariance") {
    const Eigen::MatrixXd Y = testing::gaussian(30, 3, 4);
    const Eigen::MatrixXd Z = Y + 0.3 * testing::gaussian(30, 3, 5);
    Eigen::RowVectorXd shift(3);
    shift << 10, -4, 1e3;
    const auto a = r2_per_target(Y, Z);
    const auto b = r2_per_target(Y.rowwise() + shift, Z.rowwise() + shift);
    for (int k = 0; k < 3; ++k) CHECK(*a[k] == doctest::Approx(*b[k]).epsilon(1e-9));
    CHECK(mae(Y, Z) == doctest::Approx(mae(Y.rowwise() + shift, Z.rowwise() + shift)).epsilon(1e-9));
}

TEST_CASE("uniform mean is the arithmetic mean") {
    CHECK(*uniform_mean({0.2, std::nullopt, 0.6}) == doctest::Approx(0.4));
    CHECK_FALSE(uniform_mean({std::nullopt}).has_value());
}
