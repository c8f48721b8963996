#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "geoprobe/arraystore.hpp"
#include "geoprobe/features.hpp"

namespace geoprobe {

struct SynthSpec {
    std::size_t n = 1000;
    std::size_t T = 16;
    std::size_t d = 32;
    std::size_t K = 5;
    std::size_t rank = 5;  // planted rank of true_W
    double noise_sigma = 0.1;
    std::optional<std::vector<std::size_t>> signal_patches;
    // Requested per-target standard deviation (signal plus noise).
    std::optional<std::vector<double>> target_stds;
    std::uint64_t seed = 0;
    // Norm of a signal patch relative to a noise patch.
    double signal_norm_ratio = 3.0;

    void validate() const;
};

struct SynthData {
    FeatureTensor features;         // n x T x d
    Eigen::MatrixXd targets;        // n x K
    Eigen::MatrixXd true_W;         // K x d
    Eigen::VectorXd signal_var;     // per-target variance of the noiseless target
    Eigen::VectorXd population_r2;  // signal_var / (signal_var + sigma^2)
};

// Tokens i.i.d. N(0, I); targets = true_W * mean-pooled tokens + N(0, sigma^2).
// true_W = A B with Gaussian A (K x rank), B (rank x d), rows rescaled so each
// target's signal variance is 1 (or target_std^2 - sigma^2 when given).
SynthData gen_planted_linear(const SynthSpec& spec);

// Only signal_patches carry target-related components (a shared marker
// direction plus per-image latent factors in the row space of true_W) and have
// signal_norm_ratio times the norm of the pure-noise patches. Targets are
// true_W times the mean of the signal patches plus noise.
SynthData gen_concentrated(const SynthSpec& spec);

// Planted-linear data whose per-target standard deviations follow
// target_stds; a small entry gives a weak, low-variance target.
SynthData gen_low_variance_target(const SynthSpec& spec);

struct SynthWriteOptions {
    std::string model_id = "synth";
    int layer = 0;
    std::string dataset_name = "synthetic";
    double train_fraction = 0.8;
    DType dtype = DType::float32;
    std::uint64_t split_seed = 0;
    // Optional flattened "pixel" tensor for the pixel-baseline control.
    std::optional<Eigen::MatrixXd> pixels;
};

// Writes features/targets as NPY plus manifest.json into dir; returns the manifest path.
std::filesystem::path write_synth_dataset(const SynthData& data, const std::filesystem::path& dir,
                                          const SynthWriteOptions& options = {});

// Seeded train/test split of 0..n-1, each side sorted.
SplitIndices random_split(std::size_t n, double train_fraction, std::uint64_t seed);

}  // namespace geoprobe
