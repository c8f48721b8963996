#include "geoprobe/features.hpp"

#include <algorithm>

namespace geoprobe {

FeatureTensor FeatureTensor::slice_features(std::size_t begin, std::size_t width) const {
    FeatureTensor out(n, t, width);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t tok = 0; tok < t; ++tok) {
            const auto src = token(i, tok).subspan(begin, width);
            std::copy(src.begin(), src.end(), out.token(i, tok).begin());
        }
    }
    return out;
}

FeatureTensor FeatureTensor::select_images(std::span<const std::size_t> rows) const {
    FeatureTensor out(rows.size(), t, d);
    const std::size_t stride = t * d;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(rows[r] * stride), stride,
                    out.values.begin() + static_cast<std::ptrdiff_t>(r * stride));
    }
    return out;
}

TokenMask TokenMask::excluding_leading(std::size_t length, std::size_t special) {
    TokenMask mask(length, true);
    for (std::size_t i = 0; i < std::min(special, length); ++i) mask.set(i, false);
    return mask;
}

std::size_t TokenMask::count() const noexcept {
    return static_cast<std::size_t>(std::count(included_.begin(), included_.end(), std::uint8_t{1}));
}

MaskGrid::MaskGrid(std::size_t n, const TokenMask& shared) : n_(n), t_(shared.size()), bits_(n * shared.size()) {
    for (std::size_t i = 0; i < n; ++i) {
        std::copy(shared.raw().begin(), shared.raw().end(), bits_.begin() + static_cast<std::ptrdiff_t>(i * t_));
    }
}

std::size_t MaskGrid::count(std::size_t i) const noexcept {
    const auto first = bits_.begin() + static_cast<std::ptrdiff_t>(i * t_);
    return static_cast<std::size_t>(std::count(first, first + static_cast<std::ptrdiff_t>(t_), std::uint8_t{1}));
}

TokenMask MaskGrid::row(std::size_t i) const {
    const auto first = bits_.begin() + static_cast<std::ptrdiff_t>(i * t_);
    return TokenMask(std::vector<std::uint8_t>(first, first + static_cast<std::ptrdiff_t>(t_)));
}

MaskGrid MaskGrid::select_images(std::span<const std::size_t> rows) const {
    MaskGrid out;
    out.n_ = rows.size();
    out.t_ = t_;
    out.bits_.resize(rows.size() * t_);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::copy_n(bits_.begin() + static_cast<std::ptrdiff_t>(rows[r] * t_), t_,
                    out.bits_.begin() + static_cast<std::ptrdiff_t>(r * t_));
    }
    return out;
}

}  // namespace geoprobe
