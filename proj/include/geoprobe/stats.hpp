#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace geoprobe {

// Models x folds matrix of R^2 values.
struct FoldTable {
    std::vector<std::string> model_names;
    Eigen::MatrixXd values;  // M x F

    std::size_t models() const noexcept { return static_cast<std::size_t>(values.rows()); }
    std::size_t folds() const noexcept { return static_cast<std::size_t>(values.cols()); }
    void validate() const;
};

struct TostResult {
    double mean_diff = 0.0;
    double p_lower = 1.0;   // H0: mean <= -delta
    double p_upper = 1.0;   // H0: mean >= +delta
    double p_tost = 1.0;    // max(p_lower, p_upper)
    double equivalent_at = 0.0;  // margin delta
    int df = 0;
    bool equivalent = false;     // p_tost < level
};

// Two one-sided paired t-tests on d = a - b.
TostResult paired_tost(std::span<const double> a, std::span<const double> b, double delta, double level = 0.05);

// Step-down Holm adjustment, returned in input order.
std::vector<double> holm_bonferroni(std::span<const double> pvals);

struct FriedmanResult {
    double chi2 = 0.0;
    int df = 0;
    double p = 1.0;
    std::vector<double> mean_ranks;  // rank 1 = highest value in a fold
};

FriedmanResult friedman(const FoldTable& table);

// Nemenyi critical difference q_{level,M} * sqrt(M(M+1)/(6F)) for
// 2 <= M <= 20 and level in {0.05, 0.10}.
double nemenyi_cd(std::size_t M, std::size_t F, double level = 0.05);
// The embedded q value (studentized range quantile at infinite df / sqrt 2).
double nemenyi_q(std::size_t M, double level = 0.05);

using Statistic = std::function<double(std::span<const std::size_t>)>;

struct BootstrapCI {
    double point = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    double level = 0.95;
    std::size_t B = 0;
    double z0 = 0.0;
    double accel = 0.0;
    std::size_t excluded = 0;  // resamples with a non-finite statistic
};

// Replicate b resamples n items with replacement from the stream
// derive_key(seed, {b}); evaluated in parallel, independent of schedule.
// Non-finite replicates come back as NaN.
std::vector<double> bootstrap_replicates(std::size_t n, const Statistic& statistic, std::size_t B, std::uint64_t seed);

// Bias-corrected and accelerated interval over item resampling.
// The statistic must be safe to call concurrently.
BootstrapCI bca_ci(std::size_t n, const Statistic& statistic, std::size_t B = 10000, double level = 0.95,
                   std::uint64_t seed = 0);

struct SpearmanResult {
    std::optional<double> rho;  // nullopt when either input has zero rank variance
    std::optional<double> p;
    std::size_t n = 0;
};

SpearmanResult spearman(std::span<const double> x, std::span<const double> y);

// Average ranks (1-based, ties share their mean rank), ascending order.
std::vector<double> average_ranks(std::span<const double> values);

}  // namespace geoprobe
