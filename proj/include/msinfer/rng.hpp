#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace msinfer {

// All randomness in the library flows through this header. Streams are
// derived from a single user seed via the splitmix64 finalizer, so results
// are reproducible bit-for-bit from (seed, stream, index) regardless of
// thread count. The raw generator is std::mt19937_64 (its sequence is fixed
// by the C++ standard); distributions are implemented explicitly below
// because the std:: distribution algorithms are implementation-defined.

namespace stream {
inline constexpr std::uint64_t split = 1;
inline constexpr std::uint64_t permutation = 2;
inline constexpr std::uint64_t bootstrap = 3;
inline constexpr std::uint64_t trial = 4;
inline constexpr std::uint64_t mixture = 5;
inline constexpr std::uint64_t folds = 6;
inline constexpr std::uint64_t cell_test = 7;
inline constexpr std::uint64_t fill = 8;
} // namespace stream

//! splitmix64 finalizer (Vigna); mixes one 64-bit word.
inline std::uint64_t mix64(std::uint64_t x) {
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

//! Deterministic stream derivation: chain mix64 over (seed, stream, index).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream_id,
                                 std::uint64_t index = 0) {
    std::uint64_t s = mix64(seed + 0x9E3779B97F4A7C15ULL * (stream_id + 1));
    return mix64(s + 0x9E3779B97F4A7C15ULL * (index + 1));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    //! Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    //! Uniform index in [0, n); rejection sampling, no modulo bias.
    std::size_t uniform_index(std::size_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return static_cast<std::size_t>(x % n);
    }

    //! Standard normal via Box-Muller (no cached spare).
    double normal() {
        double u1;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    //! In-place Fisher-Yates shuffle, iterating i = n-1 .. 1, j = uniform_index(i+1).
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_index(i)]);
        }
    }

private:
    std::mt19937_64 gen_;
};

inline Rng derive_rng(std::uint64_t seed, std::uint64_t stream_id, std::uint64_t index = 0) {
    return Rng(derive_seed(seed, stream_id, index));
}

} // namespace msinfer
