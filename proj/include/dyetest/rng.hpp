#pragma once

#include <cstdint>
#include <initializer_list>

namespace dyetest {

// splitmix64 generator. The <random> engines would do, but their
// distributions are implementation-defined; replayable runs need the same
// numbers on every platform, so the whole chain is pinned here.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, bound). Rejection sampling; for power-of-two bounds
    // (65536 in particular) no draw is ever rejected, so the per-value
    // probability is exactly 1/bound.
    std::uint64_t bounded(std::uint64_t bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        for (;;) {
            const std::uint64_t r = next();
            if (r >= threshold) return r % bound;
        }
    }

    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform01() < p; }

private:
    std::uint64_t state_;
};

// Collapses several stream labels into one child seed.
inline std::uint64_t mix_seed(std::initializer_list<std::uint64_t> parts) {
    std::uint64_t h = 0x6a09e667f3bcc909ull;
    for (std::uint64_t p : parts) {
        h ^= p + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        Rng r(h);
        h = r.next();
    }
    return h;
}

}  // namespace dyetest
