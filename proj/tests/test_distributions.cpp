#include <doctest.h>

#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "geoprobe/distributions.hpp"

using namespace geoprobe::dist;
namespace bm = boost::math;

TEST_CASE("incomplete beta against Boost") {
    for (double a : {0.5, 1.0, 2.5, 4.5, 10.0, 60.0})
        for (double b : {0.5, 1.0, 3.0, 7.5, 40.0})
            for (double x : {0.0, 1e-6, 0.05, 0.3, 0.5, 0.77, 0.99, 1.0}) {
                CHECK(std::abs(incomplete_beta(a, b, x) - bm::ibeta(a, b, x)) < 1e-12);
            }
}

TEST_CASE("incomplete gamma against Boost") {
    for (double a : {0.5, 1.0, 2.0, 4.5, 9.5, 30.0})
        for (double x : {0.0, 1e-4, 0.3, 1.0, 3.7, 12.0, 50.0}) {
            CHECK(std::abs(gamma_p(a, x) - bm::gamma_p(a, x)) < 1e-12);
            CHECK(std::abs(gamma_q(a, x) - bm::gamma_q(a, x)) < 1e-12);
        }
}

TEST_CASE("student t against Boost") {
    for (double df : {1.0, 2.0, 5.0, 9.0, 26.0, 120.0}) {
        const bm::students_t_distribution<double> ref(df);
        for (double t : {-40.0, -6.0, -2.1, -0.3, 0.0, 0.7, 1.96, 5.5, 30.0}) {
            CHECK(std::abs(student_t_cdf(t, df) - bm::cdf(ref, t)) < 1e-12);
            CHECK(std::abs(student_t_sf(t, df) - bm::cdf(bm::complement(ref, t))) < 1e-12);
        }
    }
}

TEST_CASE("chi-square tail against Boost") {
    for (double df : {1.0, 2.0, 3.0, 10.0, 44.0}) {
        const bm::chi_squared_distribution<double> ref(df);
        for (double x : {0.0, 0.1, 1.0, 6.0, 20.0, 94.3}) {
            CHECK(std::abs(chi2_sf(x, df) - bm::cdf(bm::complement(ref, x))) < 1e-12);
        }
    }
    CHECK(chi2_sf(6.0, 2.0) == doctest::Approx(std::exp(-3.0)).epsilon(1e-14));
}

TEST_CASE("normal cdf and quantile against Boost") {
    const bm::normal_distribution<double> ref;
    for (double z : {-9.0, -3.3, -1.0, 0.0, 0.4, 1.96, 5.0}) {
        CHECK(std::abs(normal_cdf(z) - bm::cdf(ref, z)) < 1e-14);
    }
    for (double p : {1e-12, 1e-6, 0.001, 0.025, 0.3, 0.5, 0.8, 0.975, 0.999999}) {
        const double q = bm::quantile(ref, p);
        CHECK(std::abs(normal_quantile(p) - q) < 1e-10 * std::max(1.0, std::abs(q)));
    }
    CHECK(std::isinf(normal_quantile(0.0)));
    CHECK(std::isinf(normal_quantile(1.0)));
}
