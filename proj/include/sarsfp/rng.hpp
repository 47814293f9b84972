#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace sarsfp {

// Deterministic splitmix64 stream. All randomness in the project flows
// through this generator so results are reproducible across platforms
// and independent of the C++ standard library's distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n).
    std::uint64_t uniform_index(std::uint64_t n) {
        // Rejection-free modulo is fine at these scales; bias is < 2^-40 for n < 2^24.
        return next_u64() % n;
    }

    // Unit-mean exponential draw.
    double exponential() { return -std::log(1.0 - uniform01()); }

private:
    std::uint64_t state_;
};

// Derives a named sub-seed from a run seed, so independent random streams
// (blend init, speckle, dataset split, weight init, batch shuffle) never alias.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label, std::uint64_t index = 0) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ seed;
    for (char c : label) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 0x100000001b3ULL;
    }
    h ^= index + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    // One splitmix round to decorrelate consecutive indices.
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebULL;
    return h ^ (h >> 31);
}

}  // namespace sarsfp
