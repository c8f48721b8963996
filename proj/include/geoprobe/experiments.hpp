#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "geoprobe/arraystore.hpp"
#include "geoprobe/metrics.hpp"
#include "geoprobe/pooling.hpp"
#include "geoprobe/probes.hpp"
#include "geoprobe/stats.hpp"

namespace geoprobe {

// Train/test rows of a pooled design.
std::pair<Samples, Samples> split_samples(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const SplitIndices& split);

SweepResult sweep_split(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const SplitIndices& split, const Grid& grid,
                        const FitOptions& options = {});

// ---------------------------------------------------------------- layers

struct LayerCurve {
    std::vector<int> layers;
    std::vector<double> r2;
    int best_layer = 0;
    // Winning (rank, alpha) per layer; empty when built from precomputed values.
    std::vector<std::pair<int, double>> best_hp;
};

// Argmax over precomputed values; ties go to the deeper layer.
LayerCurve best_layer_curve(std::vector<int> layers, std::vector<double> r2);

// Mean-pools each dataset with its own mask and sweeps on the shared split.
LayerCurve layer_sweep(const std::vector<LoadedDataset>& per_layer, const Grid& grid, const FitOptions& options = {});

// ---------------------------------------------------------------- nested CV

struct CvOptions {
    std::size_t outer_folds = 10;
    std::size_t inner_folds = 5;
    std::uint64_t seed = 0;
    FitOptions fit;
};

struct CvResult {
    std::vector<std::optional<double>> per_fold_r2;  // nullopt for a failed fold
    double mean = 0.0;                               // over successful folds
    std::vector<std::pair<int, double>> chosen_hp_per_fold;
    std::vector<std::size_t> fold_of;                // outer fold of every sample
    std::vector<std::string> fold_errors;
};

// Seeded shuffle cut into `folds` near-equal blocks; returns fold id per index.
std::vector<std::size_t> assign_folds(std::size_t n, std::size_t folds, std::uint64_t key);

CvResult nested_cv(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const Grid& grid, const CvOptions& options = {});

// ---------------------------------------------------------------- equivalence

struct PairwiseTost {
    std::size_t i = 0;
    std::size_t j = 0;
    TostResult tost;
    double p_holm = 1.0;
};

struct EquivalenceResult {
    std::vector<std::string> cluster;  // in descending-mean order
    std::vector<std::size_t> order;    // all models by descending mean (ties by name)
    std::vector<PairwiseTost> pairs;   // every i < j pair, Holm-adjusted across all of them
};

// Greedy cluster seeded at the best mean model; a candidate joins when its
// Holm-adjusted TOST p against every current member is below `level`.
EquivalenceResult equivalence_cluster(const FoldTable& table, double delta = 0.03, double level = 0.05);

// ---------------------------------------------------------------- ablation

struct AblationResult {
    double baseline_r2 = 0.0;
    double ablated_r2 = 0.0;
    double delta = 0.0;
    AblationMode mode = AblationMode::top_norm;
    std::size_t k = 0;
};

struct AblationPair {
    AblationResult top_norm;
    AblationResult random;
};

AblationPair patch_ablation_experiment(const FeatureTensor& features, const TokenMask& mask, const Eigen::MatrixXd& Y,
                                       const SplitIndices& split, std::size_t k, const Grid& grid, std::uint64_t seed,
                                       AblationScope scope = AblationScope::per_image);

// ---------------------------------------------------------------- heads

struct HeadResult {
    std::size_t head = 0;
    EvalReport report;
    int best_rank = 0;
    double best_alpha = 0.0;
};

// Slices d into `heads` contiguous blocks and probes each independently.
std::vector<HeadResult> per_head_probe(const FeatureTensor& features, std::size_t heads, const TokenMask& mask,
                                       const Eigen::MatrixXd& Y, const SplitIndices& split, const Grid& grid);

struct HeadEntropyCorrelation {
    Eigen::MatrixXd rho;  // heads x K, NaN where undefined
    std::optional<double> max_abs_rho;
    std::size_t argmax_head = 0;
    std::size_t argmax_target = 0;
};

HeadEntropyCorrelation head_entropy_correlation(const Eigen::MatrixXd& entropies, const Eigen::MatrixXd& Y);

// ---------------------------------------------------------------- validity

struct ValidityReport {
    EvalReport baseline;
    EvalReport shuffled_targets;
    EvalReport random_features;
    std::optional<EvalReport> pixel_baseline;  // nullopt when no pixel tensor is supplied
};

// Shuffled-target control with explicit train/test permutations.
EvalReport shuffled_target_control(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const SplitIndices& split,
                                   const Grid& grid, const std::vector<std::size_t>& train_perm,
                                   const std::vector<std::size_t>& test_perm);

ValidityReport validity_controls(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Y, const SplitIndices& split,
                                 const Grid& grid, const std::optional<Eigen::MatrixXd>& pixels, std::uint64_t seed);

}  // namespace geoprobe
