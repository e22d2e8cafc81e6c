#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace divide {

/// Counter-based splitmix64 generator. Unlike std::normal_distribution,
/// every draw path here is fully specified, so a seed reproduces the same
/// sequence on any platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (no cached spare, keeps the draw
    /// count per sample fixed).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    /// Uniform integer in [0, n). Modulo bias is negligible for our n.
    std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

    /// Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_index(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Independent stream derived from (seed, id); used for per-epoch
    /// shuffles so checkpoint resume replays identical batches.
    static Rng derive(std::uint64_t seed, std::uint64_t id) {
        Rng mix(seed ^ (id * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
        return Rng(mix.next_u64());
    }

private:
    std::uint64_t state_;
};

}  // namespace divide
