#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <Eigen/Dense>

#include "geoprobe/features.hpp"
#include "geoprobe/rng.hpp"

namespace testing {

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
    geoprobe::CounterRng rng(geoprobe::derive_key(seed, {0x7E57}));
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
    return m;
}

inline geoprobe::FeatureTensor gaussian_tensor(std::size_t n, std::size_t t, std::size_t d, std::uint64_t seed) {
    geoprobe::FeatureTensor f(n, t, d);
    geoprobe::CounterRng rng(geoprobe::derive_key(seed, {0x7E58}));
    for (auto& v : f.values) v = rng.normal();
    return f;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("geoprobe_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
