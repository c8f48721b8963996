#include "geoprobe/rng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace geoprobe {

namespace {
constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

std::uint64_t CounterRng::next_u64() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
}

double CounterRng::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::uniform_open() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
}

double CounterRng::normal() noexcept {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t CounterRng::below(std::uint64_t bound) noexcept {
    // Lemire's multiply-shift with rejection.
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        while (low < threshold) {
            x = next_u64();
            m = static_cast<__uint128_t>(x) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

std::uint64_t derive_key(std::uint64_t seed, std::initializer_list<std::uint64_t> coords) noexcept {
    std::uint64_t h = mix64(seed ^ 0x6A09E667F3BCC909ULL);
    for (std::uint64_t c : coords) {
        h = mix64(h + kGolden + mix64(c + 0xBB67AE8584CAA73BULL));
    }
    return h;
}

std::vector<std::size_t> permutation(std::size_t n, CounterRng& rng) {
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(perm[i - 1], perm[j]);
    }
    return perm;
}

}  // namespace geoprobe
