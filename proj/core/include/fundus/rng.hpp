#pragma once

#include <cstdint>
#include <vector>

namespace fundus {

// splitmix64: tiny, seedable and identical on every platform, which is what
// the reproducibility contracts need. Not a crypto PRNG.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0,1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0,n). n == 0 returns 0.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) return 0;
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

private:
    std::uint64_t state_;
};

// Independent stream for one index of a seeded collection, so per-item work
// can be generated in any order.
inline SplitMix64 stream_for(std::uint64_t master_seed, std::uint64_t index) {
    SplitMix64 mixer(master_seed);
    std::uint64_t base = mixer.next();
    return SplitMix64(base ^ (0xA0761D6478BD642FULL * (index + 1)));
}

// Fisher-Yates with our own PRNG; std::shuffle is implementation-defined.
template <typename T>
void shuffle(std::vector<T>& items, SplitMix64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(items[i - 1], items[j]);
    }
}

} // namespace fundus
