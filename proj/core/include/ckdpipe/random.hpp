#pragma once

#include <cstddef>
#include <cstdint>
#include <iterator>
#include <cmath>
#include <random>
#include <utility>

namespace ckdpipe {

/// splitmix64 finaliser.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a master seed and a path of indices,
/// e.g. derive_seed(master, repeat, fold).
template <typename... Indices>
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t master, Indices... path) noexcept {
    std::uint64_t s = mix64(master);
    ((s = mix64(s ^ mix64(static_cast<std::uint64_t>(path) + 0x632be59bd9b4e019ULL))), ...);
    return s;
}

/// Fixed sub-stream identifiers so every random draw in a run traces back to the master seed.
namespace stream {
inline constexpr std::uint64_t split = 1;
inline constexpr std::uint64_t smote = 2;
inline constexpr std::uint64_t selection = 3;
inline constexpr std::uint64_t validation = 4;
inline constexpr std::uint64_t models = 5;
inline constexpr std::uint64_t mutual_info = 6;
} // namespace stream

/// Portable wrapper over mt19937_64. Distributions are implemented here rather than
/// via <random> distributions so results do not depend on the standard library vendor.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    result_type operator()() { return engine_(); }
    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be positive.
    std::size_t below(std::size_t n) {
        const std::uint64_t bound = n;
        const std::uint64_t limit = max() - (max() % bound);
        std::uint64_t draw = engine_();
        while (draw >= limit) {
            draw = engine_();
        }
        return static_cast<std::size_t>(draw % bound);
    }

    /// Standard normal via Box-Muller.
    double normal();

    template <typename RandomIt>
    void shuffle(RandomIt first, RandomIt last) {
        const auto n = static_cast<std::size_t>(std::distance(first, last));
        for (std::size_t i = n; i > 1; --i) {
            const std::size_t j = below(i);
            using std::swap;
            swap(first[i - 1], first[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

inline double Rng::normal() {
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

} // namespace ckdpipe
