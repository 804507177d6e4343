#include "cfsl/rng.hpp"

#include <cmath>

namespace cfsl {

namespace {
constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
}

std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(seed ^ mix64(stream + kGamma))) {}

std::uint64_t CounterRng::next_u64() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGamma);
}

double CounterRng::uniform() noexcept {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t CounterRng::below(std::uint64_t n) noexcept {
    // Reject the low sliver that would bias the modulo.
    const std::uint64_t threshold = (0 - n) % n;
    for (;;) {
        const std::uint64_t r = next_u64();
        if (r >= threshold) {
            return r % n;
        }
    }
}

double CounterRng::normal() noexcept {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform() - 1.0;
        v = 2.0 * uniform() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

double CounterRng::gamma(double shape) noexcept {
    if (shape < 1.0) {
        // Shape boost: Gamma(a) = Gamma(a + 1) * U^(1/a).
        double u;
        do {
            u = uniform();
        } while (u == 0.0);
        return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x, v;
        do {
            x = normal();
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform();
        if (u < 1.0 - 0.0331 * x * x * x * x) {
            return d * v;
        }
        if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
            return d * v;
        }
    }
}

std::vector<double> dirichlet(std::size_t length, double concentration, CounterRng& rng) {
    std::vector<double> out(length);
    double total = 0.0;
    for (double& x : out) {
        x = rng.gamma(concentration);
        total += x;
    }
    if (total <= 0.0) {
        // Vanishingly unlikely underflow for tiny concentrations: fall back to uniform.
        for (double& x : out) {
            x = 1.0 / static_cast<double>(length);
        }
        return out;
    }
    for (double& x : out) {
        x /= total;
    }
    return out;
}

} // namespace cfsl
