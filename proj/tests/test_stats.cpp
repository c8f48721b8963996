#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>

#include "geoprobe/error.hpp"
#include "geoprobe/reference.hpp"
#include "geoprobe/rng.hpp"
#include "geoprobe/stats.hpp"
#include "helpers.hpp"

using namespace geoprobe;

namespace {

FoldTable table_of(std::vector<std::vector<double>> rows) {
    FoldTable t;
    t.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        t.model_names.push_back("m" + std::to_string(i));
        for (std::size_t j = 0; j < rows[i].size(); ++j)
            t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return t;
}

std::vector<std::vector<std::string>> read_csv(const std::string& path) {
    std::ifstream in(path);
    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(cells);
    }
    return rows;
}

double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2 * M_PI); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// P(range of M iid standard normals <= w) by Simpson quadrature.
double range_cdf(std::size_t M, double w) {
    const int steps = 4000;
    const double lo = -9.0;
    const double hi = 9.0;
    const double h = (hi - lo) / steps;
    double s = 0.0;
    for (int i = 0; i <= steps; ++i) {
        const double z = lo + i * h;
        const double f = static_cast<double>(M) * normal_pdf(z) *
                         std::pow(normal_cdf(z) - normal_cdf(z - w), static_cast<double>(M - 1));
        s += f * (i == 0 || i == steps ? 1 : (i % 2 ? 4 : 2));
    }
    return s * h / 3;
}

// Studentized range quantile at infinite df, divided by sqrt(2).
double q_oracle(std::size_t M, double level) {
    double lo = 0.0;
    double hi = 10.0;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (range_cdf(M, mid) < 1.0 - level ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi) / std::sqrt(2.0);
}

}  // namespace

// ------------------------------------------------------------------ TOST

TEST_CASE("TOST degenerate and out-of-margin cases") {
    const std::vector<double> a{0.5, 0.5, 0.5, 0.5};
    const TostResult same = paired_tost(a, a, 0.03);
    CHECK(same.equivalent);
    CHECK(same.p_tost == 0.0);

    const std::vector<double> shifted{0.6, 0.6, 0.6, 0.6};
    CHECK(paired_tost(shifted, a, 0.03).p_tost == 1.0);

    const std::vector<double> x{0.70, 0.62, 0.68, 0.71, 0.64};
    const std::vector<double> y{0.60, 0.53, 0.57, 0.60, 0.55};
    const TostResult far = paired_tost(x, y, 0.03);
    CHECK_FALSE(far.equivalent);
    CHECK(far.p_upper >= 0.5);
}

TEST_CASE("TOST matches the t-distribution by hand") {
    const std::vector<double> d{0.012, -0.004, 0.009, 0.001, 0.018, -0.006, 0.011, 0.004, -0.002, 0.007};
    const std::vector<double> zero(10, 0.0);
    const TostResult r = paired_tost(d, zero, 0.03);
    double m = 0.0;
    for (double v : d) m += v;
    m /= 10;
    double ss = 0.0;
    for (double v : d) ss += (v - m) * (v - m);
    const double se = std::sqrt(ss / 9) / std::sqrt(10.0);
    const boost::math::students_t_distribution<double> t9(9);
    const double p_lower = boost::math::cdf(boost::math::complement(t9, (m + 0.03) / se));
    const double p_upper = boost::math::cdf(t9, (m - 0.03) / se);
    CHECK(std::abs(r.p_lower - p_lower) < 1e-8);
    CHECK(std::abs(r.p_upper - p_upper) < 1e-8);
    CHECK(r.p_tost == std::max(r.p_lower, r.p_upper));
    CHECK(r.df == 9);
    CHECK(r.equivalent);
    CHECK(r.mean_diff == doctest::Approx(0.005));
    // Values from scipy.stats.t for the same folds.
    CHECK(std::abs(r.p_lower - 8.733569167346893e-08) < 1e-12);
    CHECK(std::abs(r.p_upper - 1.5326583573521484e-06) < 1e-12);
}

TEST_CASE("TOST decision is symmetric in its arguments") {
    for (std::uint64_t s = 0; s < 20; ++s) {
        const Eigen::MatrixXd g = testing::gaussian(2, 10, s) * 0.02;
        std::vector<double> x(10);
        std::vector<double> y(10);
        for (int i = 0; i < 10; ++i) {
            x[static_cast<std::size_t>(i)] = 0.5 + g(0, i);
            y[static_cast<std::size_t>(i)] = 0.5 + g(1, i) + 0.01 * static_cast<double>(s % 4);
        }
        const TostResult ab = paired_tost(x, y, 0.03);
        const TostResult ba = paired_tost(y, x, 0.03);
        CHECK(ab.equivalent == ba.equivalent);
        CHECK(ab.p_tost == doctest::Approx(ba.p_tost).epsilon(1e-12));
    }
}

TEST_CASE("TOST argument checks") {
    const std::vector<double> a{1, 2, 3};
    const std::vector<double> b{1, 2};
    CHECK_THROWS_AS(paired_tost(a, b, 0.03), Error);
    CHECK_THROWS_AS(paired_tost(a, a, 0.0), Error);
}

// ------------------------------------------------------------------ Holm

TEST_CASE("Holm step-down") {
    CHECK(holm_bonferroni(std::vector<double>{0.2}) == std::vector<double>{0.2});
    CHECK(holm_bonferroni(std::vector<double>{0.01, 0.04}) == std::vector<double>{0.02, 0.04});
    CHECK(holm_bonferroni(std::vector<double>{0.03, 0.04}) == std::vector<double>{0.06, 0.06});
    CHECK(holm_bonferroni(std::vector<double>{0.04, 0.03}) == std::vector<double>{0.06, 0.06});
    CHECK(holm_bonferroni(std::vector<double>{0.5, 0.01, 0.9}) == std::vector<double>{1.0, 0.03, 1.0});
    CHECK_THROWS_AS(holm_bonferroni(std::vector<double>{1.2}), Error);
}

TEST_CASE("Holm output is monotone in sorted order and dominates raw p") {
    CounterRng rng(4);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> p(12);
        for (auto& v : p) v = rng.uniform() * 0.2;
        const auto adj = holm_bonferroni(p);
        std::vector<std::size_t> order(p.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](auto a, auto b) { return p[a] < p[b]; });
        for (std::size_t i = 0; i < p.size(); ++i) CHECK(adj[i] >= p[i]);
        for (std::size_t i = 1; i < order.size(); ++i) CHECK(adj[order[i]] >= adj[order[i - 1]]);
    }
}

// ------------------------------------------------------------------ Friedman

TEST_CASE("Friedman hand cases") {
    const FriedmanResult tied = friedman(table_of({{0.5, 0.4, 0.3}, {0.5, 0.4, 0.3}, {0.5, 0.4, 0.3}}));
    CHECK(tied.chi2 == 0.0);
    CHECK(tied.p == 1.0);

    const FriedmanResult r = friedman(table_of({{0.1, 0.2, 0.3}, {0.2, 0.3, 0.4}, {0.3, 0.4, 0.5}}));
    CHECK(std::abs(r.chi2 - 6.0) < 1e-9);
    CHECK(r.df == 2);
    CHECK(std::abs(r.p - 0.0498) < 1e-4);
    CHECK(r.p == doctest::Approx(std::exp(-3.0)).epsilon(1e-12));
    CHECK(r.mean_ranks == std::vector<double>{3.0, 2.0, 1.0});
}

TEST_CASE("Friedman with ties matches scipy") {
    const FoldTable t = table_of({{0.5, 0.6, 0.7, 0.4, 0.5},
                                  {0.5, 0.55, 0.71, 0.45, 0.52},
                                  {0.45, 0.6, 0.6, 0.45, 0.3},
                                  {0.2, 0.1, 0.7, 0.45, 0.5}});
    const FriedmanResult r = friedman(t);
    CHECK(r.chi2 == doctest::Approx(3.785714285714277).epsilon(1e-12));
    CHECK(r.p == doctest::Approx(0.28555217748340306).epsilon(1e-10));
}

TEST_CASE("Friedman matches a brute-force loop and is rank-invariant") {
    for (std::uint64_t s = 0; s < 10; ++s) {
        const std::size_t M = 4 + s % 4;
        const std::size_t F = 6;
        FoldTable t;
        t.values = testing::gaussian(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(F), s);
        for (std::size_t i = 0; i < M; ++i) t.model_names.push_back("m" + std::to_string(i));

        std::vector<double> R(M, 0.0);
        for (std::size_t f = 0; f < F; ++f)
            for (std::size_t i = 0; i < M; ++i) {
                double rank = 1.0;
                for (std::size_t j = 0; j < M; ++j)
                    if (t.values(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(f)) >
                        t.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(f)))
                        rank += 1.0;
                R[i] += rank / static_cast<double>(F);
            }
        double ss = 0.0;
        for (double r : R) ss += (r - (M + 1) / 2.0) * (r - (M + 1) / 2.0);
        const double chi2 = 12.0 * F / (M * (M + 1.0)) * ss;
        const FriedmanResult got = friedman(t);
        CHECK(std::abs(got.chi2 - chi2) < 1e-10);

        FoldTable u = t;
        for (Eigen::Index f = 0; f < u.values.cols(); ++f)
            u.values.col(f) = (u.values.col(f).array() * (1.0 + static_cast<double>(f))).exp().matrix();
        CHECK(std::abs(friedman(u).chi2 - got.chi2) < 1e-10);
    }
}

TEST_CASE("Friedman needs three models") {
    CHECK_THROWS_AS(friedman(table_of({{0.1, 0.2}, {0.2, 0.3}})), Error);
}

// ------------------------------------------------------------------ Nemenyi

TEST_CASE("Nemenyi critical difference") {
    CHECK(nemenyi_cd(2, 1) == doctest::Approx(1.959964).epsilon(1e-6));
    CHECK(nemenyi_cd(2, 16) == doctest::Approx(1.959964 / 4.0).epsilon(1e-6));
    double prev = INFINITY;
    for (std::size_t F : {2, 5, 10, 100, 10000}) {
        const double cd = nemenyi_cd(11, F);
        CHECK(cd < prev);
        prev = cd;
    }
    CHECK(prev < 0.2);
    CHECK(nemenyi_cd(11, 10) == doctest::Approx(4.774035).epsilon(1e-6));

    try {
        nemenyi_cd(21, 10);
        FAIL("expected unsupported");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::unsupported);
    }
    CHECK_THROWS_AS(nemenyi_cd(1, 10), Error);
    CHECK_THROWS_AS(nemenyi_cd(5, 10, 0.01), Error);
}

TEST_CASE("embedded q table matches the fixture and a quadrature oracle") {
    const auto rows = read_csv(std::string(GEOPROBE_FIXTURES) + "/nemenyi_q.csv");
    REQUIRE(rows.size() == 19);
    for (const auto& row : rows) {
        const auto M = static_cast<std::size_t>(std::stoul(row[0]));
        CHECK(nemenyi_q(M, 0.05) == doctest::Approx(std::stod(row[1])).epsilon(1e-12));
        CHECK(nemenyi_q(M, 0.10) == doctest::Approx(std::stod(row[2])).epsilon(1e-12));
        CHECK(std::abs(q_oracle(M, 0.05) - nemenyi_q(M, 0.05)) < 2e-6);
        CHECK(std::abs(q_oracle(M, 0.10) - nemenyi_q(M, 0.10)) < 2e-6);
    }
}

TEST_CASE("reported CD for 11 models over 10 folds is not reproduced by the standard table") {
    std::ifstream in(std::string(GEOPROBE_FIXTURES) + "/nemenyi_m11_f10.json");
    std::stringstream ss;
    ss << in.rdbuf();
    const std::string text = ss.str();
    CHECK(text.find("\"discrepancy\": true") != std::string::npos);
    const double cd = nemenyi_cd(11, 10);
    CHECK(cd == doctest::Approx(4.774035).epsilon(1e-6));
    CHECK(std::abs(cd - 4.45) > 0.3);
}

// ------------------------------------------------------------------ bootstrap

namespace {

Statistic mean_of(const std::vector<double>& x) {
    return [&x](std::span<const std::size_t> idx) {
        double s = 0.0;
        for (auto i : idx) s += x[i];
        return s / static_cast<double>(idx.size());
    };
}

}  // namespace

TEST_CASE("BCa on constant data has zero width") {
    const std::vector<double> x(30, 2.5);
    const BootstrapCI ci = bca_ci(x.size(), mean_of(x), 1000, 0.95, 1);
    CHECK(ci.lower == 2.5);
    CHECK(ci.upper == 2.5);
    CHECK(ci.point == 2.5);
}

TEST_CASE("BCa on symmetric data is close to the percentile interval") {
    std::vector<double> x(400);
    CounterRng rng(12);
    for (auto& v : x) v = rng.normal();
    const auto stat = mean_of(x);
    const BootstrapCI ci = bca_ci(x.size(), stat, 4000, 0.95, 3);
    auto reps = bootstrap_replicates(x.size(), stat, 4000, 3);
    std::sort(reps.begin(), reps.end());
    auto pct = [&](double q) {
        const double pos = q * static_cast<double>(reps.size() - 1);
        const auto lo = static_cast<std::size_t>(pos);
        return reps[lo] + (pos - static_cast<double>(lo)) * (reps[lo + 1] - reps[lo]);
    };
    const double width = pct(0.975) - pct(0.025);
    CHECK(std::abs(ci.lower - pct(0.025)) < 0.1 * width);
    CHECK(std::abs(ci.upper - pct(0.975)) < 0.1 * width);
    CHECK(ci.lower <= ci.point);
    CHECK(ci.point <= ci.upper);
}

TEST_CASE("BCa on skewed data is asymmetric") {
    std::vector<double> x(40);
    CounterRng rng(21);
    for (auto& v : x) v = -std::log(rng.uniform_open());
    const BootstrapCI ci = bca_ci(x.size(), mean_of(x), 4000, 0.95, 5);
    CHECK(ci.z0 != 0.0);
    CHECK(ci.accel > 0.0);
    CHECK(ci.upper - ci.point > ci.point - ci.lower);
}

TEST_CASE("BCa reproducibility and schedule independence") {
    std::vector<double> x(60);
    CounterRng rng(2);
    for (auto& v : x) v = rng.normal();
    const auto stat = mean_of(x);
    const BootstrapCI a = bca_ci(x.size(), stat, 500, 0.9, 8);
    const BootstrapCI b = bca_ci(x.size(), stat, 500, 0.9, 8);
    CHECK(a.lower == b.lower);
    CHECK(a.upper == b.upper);
    CHECK(bootstrap_replicates(x.size(), stat, 300, 4) == reference::bootstrap_replicates(x.size(), stat, 300, 4));
}

TEST_CASE("BCa excludes a few non-finite resamples and rejects many") {
    std::vector<double> x(50, 1.0);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += 0.01 * static_cast<double>(i);
    // Non-finite whenever item 0 appears five or more times: rare.
    const Statistic rare = [&](std::span<const std::size_t> idx) {
        const auto c = std::count(idx.begin(), idx.end(), std::size_t{0});
        if (c >= 5) return std::nan("");
        double s = 0.0;
        for (auto i : idx) s += x[i];
        return s / static_cast<double>(idx.size());
    };
    const BootstrapCI ok = bca_ci(x.size(), rare, 2000, 0.95, 1);
    CHECK(ok.excluded > 0);
    CHECK(ok.excluded <= 20);

    // Non-finite whenever item 0 appears at all: most resamples.
    const Statistic often = [&](std::span<const std::size_t> idx) {
        return std::count(idx.begin(), idx.end(), std::size_t{0}) > 0 ? std::nan("") : 1.0;
    };
    try {
        bca_ci(x.size(), often, 200, 0.95, 1);
        FAIL("expected bootstrap error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::bootstrap);
    }
    CHECK_THROWS_AS(bca_ci(x.size(), mean_of(x), 50, 0.95, 1), Error);
}

// ------------------------------------------------------------------ Spearman

TEST_CASE("Spearman basics") {
    const std::vector<double> x{1, 2, 3, 4, 5};
    const std::vector<double> up{2, 4, 8, 16, 32};
    const std::vector<double> down{5, 4, 3, 2, 1};
    CHECK(*spearman(x, up).rho == doctest::Approx(1.0));
    CHECK(*spearman(x, down).rho == doctest::Approx(-1.0));
    const std::vector<double> flat{3, 3, 3, 3, 3};
    CHECK_FALSE(spearman(x, flat).rho.has_value());
    CHECK_FALSE(spearman(x, flat).p.has_value());
}

TEST_CASE("Spearman with ties matches scipy") {
    std::vector<double> x(12);
    for (std::size_t i = 0; i < 12; ++i) x[i] = static_cast<double>(i);
    const std::vector<double> y{3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5, 8};
    const SpearmanResult r = spearman(x, y);
    CHECK(*r.rho == doctest::Approx(0.5265313520914635).epsilon(1e-12));
    CHECK(*r.p == doctest::Approx(0.07863046813632459).epsilon(1e-9));
    CHECK(average_ranks(std::vector<double>{10, 20, 10, 5}) == std::vector<double>{2.5, 4, 2.5, 1});
}

TEST_CASE("Spearman is invariant to monotone transforms") {
    const Eigen::MatrixXd g = testing::gaussian(2, 30, 6);
    std::vector<double> x(30);
    std::vector<double> y(30);
    std::vector<double> tx(30);
    for (int i = 0; i < 30; ++i) {
        x[static_cast<std::size_t>(i)] = g(0, i);
        y[static_cast<std::size_t>(i)] = g(0, i) + g(1, i);
        tx[static_cast<std::size_t>(i)] = std::exp(3 * g(0, i)) - 7;
    }
    CHECK(*spearman(x, y).rho == doctest::Approx(*spearman(tx, y).rho).epsilon(1e-14));
}

TEST_CASE("CKA versus R2 gap pairs") {
    const auto rows = read_csv(std::string(GEOPROBE_FIXTURES) + "/cka_gap_pairs.csv");
    REQUIRE(rows.size() == 28);
    std::vector<double> cka;
    std::vector<double> gap;
    for (const auto& r : rows) {
        cka.push_back(std::stod(r[0]));
        gap.push_back(std::stod(r[1]));
    }
    const SpearmanResult s = spearman(cka, gap);
    CHECK(std::abs(*s.rho - 0.03) <= 0.01);
    CHECK(std::abs(*s.p - 0.88) <= 0.02);
    CHECK(*s.rho == doctest::Approx(0.02863014665683481).epsilon(1e-10));
    CHECK(*s.p == doctest::Approx(0.8850118715200322).epsilon(1e-8));
}
