#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cfsl {

// SplitMix64 used as a counter-based generator: draw i is
// mix64(key + (i + 1) * 0x9E3779B97F4A7C15). Every derived quantity (bounded
// integers, doubles, normals, gammas) is built from raw draws with fixed
// algorithms, so streams are identical on every platform and compiler,
// unlike the <random> distributions whose algorithms are unspecified.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

    std::uint64_t next_u64() noexcept;

    // Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;

    // Uniform integer in [0, n) by rejection; n must be > 0.
    std::uint64_t below(std::uint64_t n) noexcept;

    // Standard normal via the Marsaglia polar method.
    double normal() noexcept;

    // Gamma(shape, 1) via Marsaglia-Tsang; shape > 0.
    double gamma(double shape) noexcept;

    std::uint64_t counter() const noexcept { return counter_; }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

std::uint64_t mix64(std::uint64_t z) noexcept;

// Fisher-Yates, front to back.
template <typename T>
void shuffle(std::vector<T>& items, CounterRng& rng) {
    if (items.size() < 2) {
        return;
    }
    for (std::size_t i = 0; i + 1 < items.size(); ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(items.size() - i));
        std::swap(items[i], items[j]);
    }
}

// Symmetric Dirichlet draw of the given length.
std::vector<double> dirichlet(std::size_t length, double concentration, CounterRng& rng);

} // namespace cfsl
