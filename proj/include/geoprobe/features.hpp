#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace geoprobe {

// Token-level hidden states for n images, row-major n x t x d.
// Pre-pooled features are stored with t == 1.
struct FeatureTensor {
    std::size_t n = 0;
    std::size_t t = 0;
    std::size_t d = 0;
    std::vector<double> values;

    FeatureTensor() = default;
    FeatureTensor(std::size_t n_, std::size_t t_, std::size_t d_)
        : n(n_), t(t_), d(d_), values(n_ * t_ * d_, 0.0) {}

    double& at(std::size_t i, std::size_t tok, std::size_t j) { return values[(i * t + tok) * d + j]; }
    double at(std::size_t i, std::size_t tok, std::size_t j) const { return values[(i * t + tok) * d + j]; }

    std::span<const double> token(std::size_t i, std::size_t tok) const {
        return {values.data() + (i * t + tok) * d, d};
    }
    std::span<double> token(std::size_t i, std::size_t tok) {
        return {values.data() + (i * t + tok) * d, d};
    }

    // Copy of the feature columns [begin, begin + width).
    FeatureTensor slice_features(std::size_t begin, std::size_t width) const;
    // Copy of the listed images.
    FeatureTensor select_images(std::span<const std::size_t> rows) const;
};

// Which token positions participate in pooling (true = included).
class TokenMask {
public:
    TokenMask() = default;
    explicit TokenMask(std::size_t length, bool value = true) : included_(length, value ? 1 : 0) {}
    explicit TokenMask(std::vector<std::uint8_t> included) : included_(std::move(included)) {}

    // All-true mask with the first `special` positions excluded.
    static TokenMask excluding_leading(std::size_t length, std::size_t special);

    std::size_t size() const noexcept { return included_.size(); }
    bool operator[](std::size_t i) const noexcept { return included_[i] != 0; }
    void set(std::size_t i, bool value) noexcept { included_[i] = value ? 1 : 0; }
    std::size_t count() const noexcept;
    const std::vector<std::uint8_t>& raw() const noexcept { return included_; }

    friend bool operator==(const TokenMask&, const TokenMask&) = default;

private:
    std::vector<std::uint8_t> included_;
};

// Per-image masks (n x t); patch ablation produces a different set per image.
class MaskGrid {
public:
    MaskGrid() = default;
    MaskGrid(std::size_t n, const TokenMask& shared);

    std::size_t images() const noexcept { return n_; }
    std::size_t tokens() const noexcept { return t_; }
    bool included(std::size_t i, std::size_t tok) const noexcept { return bits_[i * t_ + tok] != 0; }
    void set(std::size_t i, std::size_t tok, bool value) noexcept { bits_[i * t_ + tok] = value ? 1 : 0; }
    std::size_t count(std::size_t i) const noexcept;
    TokenMask row(std::size_t i) const;
    MaskGrid select_images(std::span<const std::size_t> rows) const;

    friend bool operator==(const MaskGrid&, const MaskGrid&) = default;

private:
    std::size_t n_ = 0;
    std::size_t t_ = 0;
    std::vector<std::uint8_t> bits_;
};

}  // namespace geoprobe
