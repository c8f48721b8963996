#include "geoprobe/pooling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "geoprobe/error.hpp"
#include "geoprobe/reference.hpp"
#include "geoprobe/rng.hpp"

namespace geoprobe {

namespace {

void check_mask(const FeatureTensor& features, const MaskGrid& masks) {
    if (masks.images() != features.n || masks.tokens() != features.t) {
        throw Error(ErrorKind::dimension, "mask grid " + std::to_string(masks.images()) + "x" +
                                              std::to_string(masks.tokens()) + " does not match features " +
                                              std::to_string(features.n) + "x" + std::to_string(features.t));
    }
}

void pool_row(const FeatureTensor& f, const MaskGrid& masks, std::size_t i, Eigen::MatrixXd& out) {
    std::vector<double> acc(f.d, 0.0);
    std::size_t count = 0;
    for (std::size_t tok = 0; tok < f.t; ++tok) {
        if (!masks.included(i, tok)) continue;
        const auto v = f.token(i, tok);
        for (std::size_t j = 0; j < f.d; ++j) acc[j] += v[j];
        ++count;
    }
    const double inv = 1.0 / static_cast<double>(count);
    for (std::size_t j = 0; j < f.d; ++j) {
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = acc[j] * inv;
    }
}

void norm_row(const FeatureTensor& f, std::size_t i, Eigen::MatrixXd& out) {
    for (std::size_t tok = 0; tok < f.t; ++tok) {
        double ss = 0.0;
        for (double v : f.token(i, tok)) ss += v * v;
        out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(tok)) = std::sqrt(ss);
    }
}

void require_nonempty(const MaskGrid& masks) {
    for (std::size_t i = 0; i < masks.images(); ++i) {
        if (masks.count(i) == 0) {
            throw Error(ErrorKind::empty_pool, "image " + std::to_string(i) + " has no included tokens");
        }
    }
}

}  // namespace

Eigen::MatrixXd mean_pool(const FeatureTensor& features, const MaskGrid& masks) {
    check_mask(features, masks);
    require_nonempty(masks);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(features.n), static_cast<Eigen::Index>(features.d));
    const auto n = static_cast<std::ptrdiff_t>(features.n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) pool_row(features, masks, static_cast<std::size_t>(i), out);
    return out;
}

Eigen::MatrixXd mean_pool(const FeatureTensor& features, const TokenMask& mask) {
    if (mask.size() != features.t) {
        throw Error(ErrorKind::dimension, "mask length " + std::to_string(mask.size()) +
                                              " != T=" + std::to_string(features.t));
    }
    if (mask.count() == 0) throw Error(ErrorKind::empty_pool, "mask excludes every token");
    return mean_pool(features, MaskGrid(features.n, mask));
}

PatchNorms patch_norms(const FeatureTensor& features, const MaskGrid& masks) {
    check_mask(features, masks);
    PatchNorms out{Eigen::MatrixXd(static_cast<Eigen::Index>(features.n), static_cast<Eigen::Index>(features.t)),
                   masks};
    const auto n = static_cast<std::ptrdiff_t>(features.n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) norm_row(features, static_cast<std::size_t>(i), out.norms);
    return out;
}

PatchNorms patch_norms(const FeatureTensor& features, const TokenMask& mask) {
    if (mask.size() != features.t) throw Error(ErrorKind::dimension, "mask length does not match T");
    return patch_norms(features, MaskGrid(features.n, mask));
}

MaskGrid ablate_top_k(const FeatureTensor& features, const MaskGrid& masks, std::size_t k, AblationMode mode,
                      std::uint64_t seed, AblationScope scope) {
    check_mask(features, masks);
    for (std::size_t i = 0; i < masks.images(); ++i) {
        if (k >= masks.count(i)) {
            throw Error(ErrorKind::ablation, "k=" + std::to_string(k) + " must be below the " +
                                                 std::to_string(masks.count(i)) + " included tokens of image " +
                                                 std::to_string(i));
        }
    }
    MaskGrid out = masks;
    if (k == 0) return out;
    const std::size_t t = features.t;

    if (scope == AblationScope::global) {
        // Positions must be selectable in every image.
        std::vector<std::size_t> candidates;
        for (std::size_t tok = 0; tok < t; ++tok) {
            bool everywhere = true;
            for (std::size_t i = 0; i < masks.images() && everywhere; ++i) everywhere = masks.included(i, tok);
            if (everywhere) candidates.push_back(tok);
        }
        if (k >= candidates.size()) {
            throw Error(ErrorKind::ablation, "k exceeds the token positions shared by every image");
        }
        std::vector<std::size_t> chosen;
        if (mode == AblationMode::top_norm) {
            const PatchNorms pn = patch_norms(features, masks);
            const Eigen::VectorXd mean_norm = pn.norms.colwise().mean().transpose();
            std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
                return mean_norm(static_cast<Eigen::Index>(a)) > mean_norm(static_cast<Eigen::Index>(b));
            });
            chosen.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k));
        } else {
            CounterRng rng(derive_key(seed, {0xAB1A7E, 0}));
            const auto perm = permutation(candidates.size(), rng);
            for (std::size_t j = 0; j < k; ++j) chosen.push_back(candidates[perm[j]]);
        }
        for (std::size_t i = 0; i < out.images(); ++i) {
            for (auto tok : chosen) out.set(i, tok, false);
        }
        return out;
    }

    Eigen::MatrixXd norms;
    if (mode == AblationMode::top_norm) norms = patch_norms(features, masks).norms;
    const auto n = static_cast<std::ptrdiff_t>(features.n);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < n; ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        std::vector<std::size_t> candidates;
        for (std::size_t tok = 0; tok < t; ++tok) {
            if (masks.included(i, tok)) candidates.push_back(tok);
        }
        if (mode == AblationMode::top_norm) {
            std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
                return norms(ii, static_cast<Eigen::Index>(a)) > norms(ii, static_cast<Eigen::Index>(b));
            });
            for (std::size_t j = 0; j < k; ++j) out.set(i, candidates[j], false);
        } else {
            CounterRng rng(derive_key(seed, {0xAB1A7E, i + 1}));
            const auto perm = permutation(candidates.size(), rng);
            for (std::size_t j = 0; j < k; ++j) out.set(i, candidates[perm[j]], false);
        }
    }
    return out;
}

MaskGrid ablate_top_k(const FeatureTensor& features, const TokenMask& mask, std::size_t k, AblationMode mode,
                      std::uint64_t seed, AblationScope scope) {
    if (mask.size() != features.t) throw Error(ErrorKind::dimension, "mask length does not match T");
    return ablate_top_k(features, MaskGrid(features.n, mask), k, mode, seed, scope);
}

namespace reference {

Eigen::MatrixXd mean_pool(const FeatureTensor& features, const MaskGrid& masks) {
    check_mask(features, masks);
    require_nonempty(masks);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(features.n), static_cast<Eigen::Index>(features.d));
    for (std::size_t i = 0; i < features.n; ++i) pool_row(features, masks, i, out);
    return out;
}

Eigen::MatrixXd patch_norms(const FeatureTensor& features) {
    Eigen::MatrixXd out(static_cast<Eigen::Index>(features.n), static_cast<Eigen::Index>(features.t));
    for (std::size_t i = 0; i < features.n; ++i) norm_row(features, i, out);
    return out;
}

}  // namespace reference

}  // namespace geoprobe
