#include "geoprobe/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

#include "geoprobe/distributions.hpp"
#include "geoprobe/error.hpp"
#include "geoprobe/reference.hpp"
#include "geoprobe/rng.hpp"

namespace geoprobe {

void FoldTable::validate() const {
    if (values.cols() < 2) throw Error(ErrorKind::invalid_argument, "fold table needs F >= 2 folds");
    if (model_names.size() != models()) throw Error(ErrorKind::dimension, "model name count != table rows");
    if (!values.allFinite()) throw Error(ErrorKind::numeric, "fold table has non-finite entries");
}

TostResult paired_tost(std::span<const double> a, std::span<const double> b, double delta, double level) {
    if (a.size() != b.size()) {
        throw Error(ErrorKind::dimension, "paired TOST needs equal lengths, got " + std::to_string(a.size()) + " and " +
                                              std::to_string(b.size()));
    }
    if (a.size() < 2) throw Error(ErrorKind::insufficient_data, "paired TOST needs at least 2 pairs");
    if (!(delta > 0.0)) throw Error(ErrorKind::invalid_argument, "equivalence margin must be positive");

    const std::size_t F = a.size();
    double mean = 0.0;
    for (std::size_t i = 0; i < F; ++i) mean += a[i] - b[i];
    mean /= static_cast<double>(F);
    double ss = 0.0;
    for (std::size_t i = 0; i < F; ++i) {
        const double dev = (a[i] - b[i]) - mean;
        ss += dev * dev;
    }
    const double sd = std::sqrt(ss / static_cast<double>(F - 1));

    TostResult r;
    r.mean_diff = mean;
    r.equivalent_at = delta;
    r.df = static_cast<int>(F) - 1;
    // Differences that are constant up to rounding.
    if (sd <= 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(mean))) {
        const bool inside = std::abs(mean) < delta;
        r.p_lower = r.p_upper = r.p_tost = inside ? 0.0 : 1.0;
        r.equivalent = inside;
        return r;
    }
    const double se = sd / std::sqrt(static_cast<double>(F));
    const double df = static_cast<double>(r.df);
    r.p_lower = dist::student_t_sf((mean + delta) / se, df);
    r.p_upper = dist::student_t_cdf((mean - delta) / se, df);
    r.p_tost = std::max(r.p_lower, r.p_upper);
    r.equivalent = r.p_tost < level;
    return r;
}

std::vector<double> holm_bonferroni(std::span<const double> pvals) {
    const std::size_t m = pvals.size();
    for (double p : pvals) {
        if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::invalid_argument, "p-values must lie in [0, 1]");
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return pvals[i] < pvals[j]; });
    std::vector<double> adjusted(m);
    double running = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double scaled = std::min(1.0, static_cast<double>(m - j) * pvals[order[j]]);
        running = std::max(running, scaled);
        adjusted[order[j]] = running;
    }
    return adjusted;
}

std::vector<double> average_ranks(std::span<const double> values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}

FriedmanResult friedman(const FoldTable& table) {
    table.validate();
    const std::size_t M = table.models();
    const std::size_t F = table.folds();
    if (M < 3) throw Error(ErrorKind::insufficient_data, "Friedman test needs at least 3 models");

    FriedmanResult r;
    r.df = static_cast<int>(M) - 1;
    r.mean_ranks.assign(M, 0.0);
    double tie_sum = 0.0;
    std::vector<double> col(M);
    for (std::size_t f = 0; f < F; ++f) {
        // Negate so the best (highest) model gets rank 1.
        for (std::size_t m = 0; m < M; ++m) col[m] = -table.values(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(f));
        const auto ranks = average_ranks(col);
        for (std::size_t m = 0; m < M; ++m) r.mean_ranks[m] += ranks[m];
        std::vector<double> sorted = col;
        std::sort(sorted.begin(), sorted.end());
        for (std::size_t i = 0; i < M;) {
            std::size_t j = i;
            while (j + 1 < M && sorted[j + 1] == sorted[i]) ++j;
            const double t = static_cast<double>(j - i + 1);
            tie_sum += t * t * t - t;
            i = j + 1;
        }
    }
    for (auto& rk : r.mean_ranks) rk /= static_cast<double>(F);

    const double Md = static_cast<double>(M);
    const double Fd = static_cast<double>(F);
    const double correction = 1.0 - tie_sum / (Fd * Md * (Md * Md - 1.0));
    if (correction <= 1e-12) {
        r.chi2 = 0.0;
        r.p = 1.0;
        return r;
    }
    double ss = 0.0;
    for (double rk : r.mean_ranks) ss += (rk - 0.5 * (Md + 1.0)) * (rk - 0.5 * (Md + 1.0));
    r.chi2 = 12.0 * Fd / (Md * (Md + 1.0)) * ss / correction;
    r.p = dist::chi2_sf(r.chi2, static_cast<double>(r.df));
    return r;
}

namespace {

// q_inf(M) / sqrt(2) for M = 2..20, from quadrature of the studentized
// range distribution at infinite degrees of freedom.
constexpr std::array<double, 19> kQ05 = {1.959964, 2.343701, 2.569032, 2.727774, 2.849705, 2.948320, 3.030878,
                                         3.101730, 3.163684, 3.218654, 3.268004, 3.312739, 3.353618, 3.391230,
                                         3.426041, 3.458425, 3.488685, 3.517073, 3.543799};
constexpr std::array<double, 19> kQ10 = {1.644854, 2.052293, 2.291341, 2.459516, 2.588521, 2.692732, 2.779884,
                                         2.854606, 2.919889, 2.977768, 3.029694, 3.076733, 3.119693, 3.159199,
                                         3.195743, 3.229723, 3.261461, 3.291224, 3.319233};

}  // namespace

double nemenyi_q(std::size_t M, double level) {
    if (M < 2 || M > 20) {
        throw Error(ErrorKind::unsupported, "Nemenyi table covers 2 <= M <= 20, got M=" + std::to_string(M));
    }
    if (std::abs(level - 0.05) < 1e-12) return kQ05[M - 2];
    if (std::abs(level - 0.10) < 1e-12) return kQ10[M - 2];
    throw Error(ErrorKind::unsupported, "Nemenyi table covers levels 0.05 and 0.10 only");
}

double nemenyi_cd(std::size_t M, std::size_t F, double level) {
    if (F < 1) throw Error(ErrorKind::invalid_argument, "Nemenyi CD needs F >= 1");
    const double Md = static_cast<double>(M);
    return nemenyi_q(M, level) * std::sqrt(Md * (Md + 1.0) / (6.0 * static_cast<double>(F)));
}

namespace {

double replicate(std::size_t n, const Statistic& statistic, std::uint64_t seed, std::size_t b,
                 std::vector<std::size_t>& idx) {
    CounterRng rng(derive_key(seed, {static_cast<std::uint64_t>(b)}));
    idx.resize(n);
    for (auto& v : idx) v = static_cast<std::size_t>(rng.below(n));
    const double s = statistic(idx);
    return std::isfinite(s) ? s : std::numeric_limits<double>::quiet_NaN();
}

double interpolated_quantile(const std::vector<double>& sorted, double q) {
    q = std::clamp(q, 0.0, 1.0);
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

std::vector<double> bootstrap_replicates(std::size_t n, const Statistic& statistic, std::size_t B, std::uint64_t seed) {
    std::vector<double> out(B);
    const auto count = static_cast<std::ptrdiff_t>(B);
#pragma omp parallel
    {
        std::vector<std::size_t> idx;
#pragma omp for schedule(static)
        for (std::ptrdiff_t b = 0; b < count; ++b) {
            out[static_cast<std::size_t>(b)] = replicate(n, statistic, seed, static_cast<std::size_t>(b), idx);
        }
    }
    return out;
}

BootstrapCI bca_ci(std::size_t n, const Statistic& statistic, std::size_t B, double level, std::uint64_t seed) {
    if (n < 2) throw Error(ErrorKind::insufficient_data, "bootstrap needs n >= 2 items");
    if (B < 100) throw Error(ErrorKind::invalid_argument, "bootstrap needs B >= 100 resamples");
    if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::invalid_argument, "level must lie in (0, 1)");

    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    BootstrapCI ci;
    ci.level = level;
    ci.B = B;
    ci.point = statistic(all);
    if (!std::isfinite(ci.point)) throw Error(ErrorKind::bootstrap, "statistic is non-finite on the full sample");

    std::vector<double> reps = bootstrap_replicates(n, statistic, B, seed);
    std::vector<double> valid;
    valid.reserve(B);
    for (double v : reps) {
        if (std::isnan(v)) {
            ++ci.excluded;
        } else {
            valid.push_back(v);
        }
    }
    if (static_cast<double>(ci.excluded) > 0.01 * static_cast<double>(B)) {
        throw Error(ErrorKind::bootstrap, std::to_string(ci.excluded) + " of " + std::to_string(B) +
                                              " resamples gave a non-finite statistic (limit 1%)");
    }
    std::sort(valid.begin(), valid.end());
    if (valid.front() == valid.back() && valid.front() == ci.point) {
        ci.lower = ci.upper = ci.point;
        return ci;
    }

    double below = 0.0;
    for (double v : valid) below += v < ci.point ? 1.0 : (v == ci.point ? 0.5 : 0.0);
    const double Bv = static_cast<double>(valid.size());
    const double frac = std::clamp(below / Bv, 0.5 / Bv, 1.0 - 0.5 / Bv);
    ci.z0 = dist::normal_quantile(frac);

    // Jackknife acceleration.
    std::vector<double> jack(n);
    const auto nn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel
    {
        std::vector<std::size_t> idx(n - 1);
#pragma omp for schedule(static)
        for (std::ptrdiff_t i = 0; i < nn; ++i) {
            std::size_t w = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (j != static_cast<std::size_t>(i)) idx[w++] = j;
            }
            jack[static_cast<std::size_t>(i)] = statistic(idx);
        }
    }
    const double jmean = std::accumulate(jack.begin(), jack.end(), 0.0) / static_cast<double>(n);
    double num = 0.0;
    double den = 0.0;
    for (double j : jack) {
        if (!std::isfinite(j)) throw Error(ErrorKind::bootstrap, "non-finite jackknife statistic");
        const double dv = jmean - j;
        num += dv * dv * dv;
        den += dv * dv;
    }
    ci.accel = den > 0.0 ? num / (6.0 * std::pow(den, 1.5)) : 0.0;

    const double alpha = 0.5 * (1.0 - level);
    auto adjusted = [&](double z) {
        const double w = ci.z0 + z;
        return dist::normal_cdf(ci.z0 + w / (1.0 - ci.accel * w));
    };
    ci.lower = interpolated_quantile(valid, adjusted(dist::normal_quantile(alpha)));
    ci.upper = interpolated_quantile(valid, adjusted(dist::normal_quantile(1.0 - alpha)));
    return ci;
}

SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(ErrorKind::dimension, "Spearman inputs differ in length");
    if (x.size() < 3) throw Error(ErrorKind::insufficient_data, "Spearman needs n >= 3");
    SpearmanResult r;
    r.n = x.size();
    const auto rx = average_ranks(x);
    const auto ry = average_ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx <= 0.0 || syy <= 0.0) return r;
    const double rho = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    r.rho = rho;
    if (1.0 - std::abs(rho) <= 1e-15) {
        r.p = 0.0;
    } else {
        const double t = rho * std::sqrt((n - 2.0) / (1.0 - rho * rho));
        r.p = std::min(1.0, 2.0 * dist::student_t_sf(std::abs(t), n - 2.0));
    }
    return r;
}

namespace reference {

std::vector<double> bootstrap_replicates(std::size_t n, const std::function<double(std::span<const std::size_t>)>& statistic,
                                         std::size_t B, std::uint64_t seed) {
    std::vector<double> out(B);
    std::vector<std::size_t> idx;
    for (std::size_t b = 0; b < B; ++b) out[b] = replicate(n, statistic, seed, b, idx);
    return out;
}

}  // namespace reference

}  // namespace geoprobe
