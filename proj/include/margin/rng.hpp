#pragma once

// Deterministic random streams.
//
// The mt19937_64 engine is fully specified by the C++ standard, but the
// standard *distributions* (and std::shuffle) are implementation defined, so
// using them would silently break bit-level reproducibility across standard
// library versions. The value transforms below are therefore written out by
// hand; they are the textbook ones and produce identical streams everywhere.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "margin/errors.hpp"

namespace margin {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stable per-stream seed derivation, used to give every restart / worker an
// independent generator from one master seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t state = seed ^ (0xa0761d6478bd642fULL + stream * 0xe7037ed1a0b428dbULL);
    return splitmix64_next(state);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform double in [0, 1), 53 bits of mantissa.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Standard normal via Box-Muller; the second sample of each pair is
    // cached so consecutive calls consume exactly one pair per two draws.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform(); // log(0) guard
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Uniform integer in [lo, hi], both bounds inclusive. Rejection sampling
    // keeps the distribution exact.
    int uniform_int(int lo, int hi) {
        if (lo > hi) throw InvalidInput("uniform_int: empty range");
        std::uint64_t span = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t r = next_u64();
        while (r >= limit) r = next_u64();
        return lo + static_cast<int>(r % span);
    }

    // Fisher-Yates; std::shuffle is implementation defined, this is not.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(
                uniform_int(0, static_cast<int>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace margin
