#pragma once

// Serial reference kernels. The library entry points run the same
// arithmetic under OpenMP; these exist for tests and the benchmark.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "geoprobe/features.hpp"

namespace geoprobe::reference {

Eigen::MatrixXd mean_pool(const FeatureTensor& features, const MaskGrid& masks);
Eigen::MatrixXd patch_norms(const FeatureTensor& features);

// Bootstrap replicate statistics, resample b drawn from stream derive_key(seed, {b}).
std::vector<double> bootstrap_replicates(std::size_t n, const std::function<double(std::span<const std::size_t>)>& statistic,
                                         std::size_t B, std::uint64_t seed);

}  // namespace geoprobe::reference
