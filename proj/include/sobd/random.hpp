#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace sobd {

// splitmix64 step; used both as a generator seeder and as a mixing hash.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent stream seed from a base seed and one or more tags.
// Every stochastic stage forks its own stream this way (per tree, per node,
// per image, ...) so results never depend on call interleaving.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
    std::uint64_t s = base ^ (tag + 0x9e3779b97f4a7c15ULL + (base << 6) + (base >> 2));
    return splitmix64(s);
}

template <typename... Tags>
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag, Tags... rest) {
    return derive_seed(derive_seed(base, tag), rest...);
}

// mt19937_64 with fully specified distribution helpers. The standard
// <random> distributions are implementation-defined, so we draw everything
// through these to keep sampled values identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0,1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0,n) without modulo bias.
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % n;
    }

    // Standard normal via the polar (Marsaglia) method. No cached spare so
    // the stream position stays predictable per call.
    double normal() {
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        return u * std::sqrt(-2.0 * std::log(s) / s);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    // In-place Fisher-Yates shuffle.
    template <typename Vec>
    void shuffle(Vec& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace sobd
