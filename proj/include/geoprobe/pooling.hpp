#pragma once

#include <cstddef>
#include <cstdint>

#include <Eigen/Dense>

#include "geoprobe/features.hpp"

namespace geoprobe {

// Row i is the mean of image i's included token vectors. OpenMP over images.
Eigen::MatrixXd mean_pool(const FeatureTensor& features, const TokenMask& mask);
Eigen::MatrixXd mean_pool(const FeatureTensor& features, const MaskGrid& masks);

struct PatchNorms {
    Eigen::MatrixXd norms;  // n x t Euclidean norms, reported for every token
    MaskGrid selectable;    // false where the token was excluded by the mask
};

PatchNorms patch_norms(const FeatureTensor& features, const TokenMask& mask);
PatchNorms patch_norms(const FeatureTensor& features, const MaskGrid& masks);

enum class AblationMode { top_norm, random };

// per_image ranks each image's own patches; global ranks token positions by
// their mean norm across images and removes the same positions everywhere.
enum class AblationScope { per_image, global };

// Excludes k more tokens per image. top_norm removes the largest-norm
// included tokens (ties -> lower index); random removes a seeded uniform
// sample of included tokens, keyed per image.
MaskGrid ablate_top_k(const FeatureTensor& features, const MaskGrid& masks, std::size_t k, AblationMode mode,
                      std::uint64_t seed, AblationScope scope = AblationScope::per_image);
MaskGrid ablate_top_k(const FeatureTensor& features, const TokenMask& mask, std::size_t k, AblationMode mode,
                      std::uint64_t seed, AblationScope scope = AblationScope::per_image);

}  // namespace geoprobe
