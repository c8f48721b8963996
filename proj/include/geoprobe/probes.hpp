#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geoprobe/features.hpp"
#include "geoprobe/metrics.hpp"

namespace geoprobe {

// Paired design rows: pooled features and their targets.
struct Samples {
    Eigen::MatrixXd X;  // n x d
    Eigen::MatrixXd Y;  // n x K

    Samples rows(std::span<const std::size_t> idx) const;
};

struct LinearProbe {
    Eigen::MatrixXd W;       // K x d
    Eigen::VectorXd b;       // K
    int rank = 0;
    double alpha = 0.0;
    int layer = 0;
    std::string model_id;
    Eigen::VectorXd x_mean;  // training feature means, for bias recomputation
    Eigen::VectorXd y_mean;  // training target means
    std::vector<std::string> target_names;

    Eigen::Index targets() const noexcept { return W.rows(); }
    Eigen::Index features() const noexcept { return W.cols(); }
};

struct FitOptions {
    bool unit_variance = false;
};

// Full-rank ridge probe (rank = min(K, d)).
LinearProbe fit_ridge(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, double alpha, const FitOptions& options = {});

// Keeps the r largest singular directions of W and recomputes
// b = y_mean - W x_mean. r >= min(K, d) returns the probe unchanged.
LinearProbe rrr_truncate(const LinearProbe& probe, int r);

Eigen::MatrixXd predict(const LinearProbe& probe, const Eigen::MatrixXd& X);

struct Grid {
    std::vector<int> ranks;
    std::vector<double> alphas;

    // r in {3,4,5,6,8}, alpha in {1,10,100,1000}.
    static Grid paper_default();
};

struct SweepCell {
    int rank = 0;
    double alpha = 0.0;
    std::optional<double> holdout_r2_uniform;
    std::optional<double> mae;
    std::string error;  // non-empty when the fit failed

    bool ok() const noexcept { return error.empty() && holdout_r2_uniform.has_value(); }
};

struct SweepResult {
    std::vector<SweepCell> grid;  // rank-major, |ranks| * |alphas| rows
    int best_rank = 0;
    double best_alpha = 0.0;
    LinearProbe best_probe;
    EvalReport best_report;
};

// Fits every (rank, alpha) cell on train, scores uniform-mean R^2 on test.
// Best cell: highest R^2, then smaller rank, then larger alpha. Failed cells
// are recorded with their error; throws only if every cell failed.
SweepResult sweep(const Samples& train, const Samples& test, const Grid& grid, const FitOptions& options = {});

// probe.json + NPY payloads (<stem>_W.npy, _b.npy, _x_mean.npy, _y_mean.npy).
void save_probe(const std::filesystem::path& dir, const LinearProbe& probe, const std::string& stem = "probe");
LinearProbe load_probe(const std::filesystem::path& json_path);

// ---------------------------------------------------------------------------
// Attention-pooling probe: a learned query scores every included token,
// softmax weights pool the tokens, a linear head reads out the targets.

struct AttnParams {
    Eigen::VectorXd query;  // d
    Eigen::MatrixXd W;      // K x d
    Eigen::VectorXd b;      // K
};

struct AttnLogEntry {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct AttnProbe {
    AttnParams params;
    double temperature = 1.0;
    std::vector<AttnLogEntry> train_log;
    int best_epoch = 0;
};

struct AttnConfig {
    double lr = 0.01;
    int epochs = 200;
    int patience = 20;
    double val_fraction = 0.2;
    std::uint64_t seed = 0;
    std::size_t batch_size = 64;
    double temperature = 1.0;
    // Ridge penalty for the mean-pool head that initializes W, b.
    double init_alpha = 1.0;
};

// Softmax-weighted pooled vectors (n x d) for the given query.
Eigen::MatrixXd attention_pool(const Eigen::VectorXd& query, double temperature, const FeatureTensor& features,
                               const MaskGrid& masks);

Eigen::MatrixXd predict(const AttnProbe& probe, const FeatureTensor& features, const MaskGrid& masks);

struct AttnLossGrad {
    double loss = 0.0;
    Eigen::VectorXd d_query;
    Eigen::MatrixXd d_W;
    Eigen::VectorXd d_b;
};

// Mean squared error over the listed rows (all samples x targets) and its
// analytic gradient.
AttnLossGrad attention_loss_grad(const AttnParams& params, double temperature, const FeatureTensor& features,
                                 const MaskGrid& masks, const Eigen::MatrixXd& Y, std::span<const std::size_t> rows);

// Trains with Adam on mini-batches, early-stopping on a seeded validation
// split carved from the inputs. Returns the best-validation parameters.
AttnProbe fit_attention_pool(const FeatureTensor& features, const MaskGrid& masks, const Eigen::MatrixXd& Y,
                             const AttnConfig& config);

// Stops on an explicitly supplied monitor set instead of a validation split.
AttnProbe fit_attention_pool_monitored(const FeatureTensor& features, const MaskGrid& masks, const Eigen::MatrixXd& Y,
                                       const FeatureTensor& monitor_features, const MaskGrid& monitor_masks,
                                       const Eigen::MatrixXd& monitor_Y, const AttnConfig& config);

// Head-only initialization: q = 0 and a ridge head on mean-pooled features.
AttnProbe attention_init(const FeatureTensor& features, const MaskGrid& masks, const Eigen::MatrixXd& Y,
                         const AttnConfig& config);

}  // namespace geoprobe
