#pragma once

#include <cstdint>
#include <random>

namespace flowvid {

// Deterministic RNG with portable derivations: std::uniform_* distributions are
// implementation-defined, so uniforms are built from raw mt19937_64 output.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    // uniform in [0,1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n) {
        // Lemire's multiply-shift; bias is negligible for n << 2^64 and the
        // result is identical on every platform.
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(gen_()) * n) >> 64);
    }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 gen_;
};

} // namespace flowvid
