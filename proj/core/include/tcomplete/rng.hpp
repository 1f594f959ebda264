#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace tcomplete {

// Deterministic RNG used throughout the pipeline. Wraps std::mt19937_64 (the
// engine sequence is pinned by the standard) and maps to doubles/ints with
// fixed arithmetic, so seeded runs reproduce byte-identical results. Standard
// library distributions are never used; their output is implementation
// defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    // Uniform in [0, 1) with 53 bits of randomness.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased integer in [lo, hi], inclusive.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

    // Standard normal via Box-Muller (pair cached).
    double normal();

    // Sub-stream derivation: mixes (seed material, stream id) with splitmix64
    // so parallel consumers get independent deterministic sequences.
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b);
    Rng fork(std::uint64_t stream_id) { return Rng(mix(next(), stream_id)); }

    // Engine state round-trip for checkpoint/session files.
    std::string state() const;
    void set_state(const std::string& s);

private:
    std::mt19937_64 gen_;
    bool have_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

}  // namespace tcomplete
