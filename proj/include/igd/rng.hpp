#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace igd {

using Vec = std::vector<double>;

/// Seed mixer (splitmix64). Used to derive independent stream seeds from a
/// master seed, e.g. hash(master_seed, config_index) for per-config runs.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return mix_seed(master ^ mix_seed(index + 1));
}

/// Deterministic random stream. mt19937_64 is fully specified by the
/// standard; uniform and gaussian draws are fixed transforms of its output
/// so identical seeds reproduce identical streams:
///   uniform():  top 53 bits of one engine word, in [0, 1)
///   gaussian(): Box-Muller over exactly two uniforms (cosine branch only)
///   uniform_int(n): Lemire multiply-shift reduction of one engine word
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double gaussian() {
        const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) {
        const auto m = static_cast<unsigned __int128>(engine_()) * n;
        return static_cast<std::uint64_t>(m >> 64);
    }

    Vec gaussian_vec(int dim) {
        Vec v(static_cast<std::size_t>(dim));
        for (auto& x : v) x = gaussian();
        return v;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace igd
