#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace geoprobe {

// Counter-based generator built on the SplitMix64 finalizer.
//
// Output i of stream `key` is mix64(key + (i + 1) * 0x9E3779B97F4A7C15).
// Uniforms take the top 53 bits; normals use the cosine branch of
// Box-Muller on two consecutive uniforms, so every draw is a pure function
// of (key, counter) and reproducible from the seed in any language.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key, std::uint64_t counter = 0) noexcept
        : key_(key), counter_(counter) {}

    std::uint64_t next_u64() noexcept;
    // Uniform in [0, 1).
    double uniform() noexcept;
    // Uniform in (0, 1]; safe argument for log().
    double uniform_open() noexcept;
    double normal() noexcept;
    // Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound) noexcept;

    std::uint64_t key() const noexcept { return key_; }
    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_;
};

std::uint64_t mix64(std::uint64_t z) noexcept;

// Stream key for a unit of work, derived by hashing the base seed with
// an ordered list of integer coordinates (fold, cell, resample, ...).
std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> coords) noexcept;

// Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> permutation(std::size_t n, CounterRng& rng);

}  // namespace geoprobe
