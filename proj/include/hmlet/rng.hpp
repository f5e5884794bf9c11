#pragma once

#include <cstdint>
#include <string_view>

namespace hmlet {

// Deterministic xoshiro256++ generator. A given 64-bit seed always produces
// the same stream; independent streams for different jobs are derived from a
// master seed plus a purpose label (see derive_stream).
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform on (0,1), 53-bit resolution, endpoints excluded.
    double next_double();

    // Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n);

    // Standard normal via Box-Muller (caches the second deviate).
    double next_normal();

private:
    std::uint64_t s_[4];
    double cached_normal_ = 0.0;
    bool has_cached_normal_ = false;
};

// SplitMix64 finalizer; also used as a stand-alone integer hash.
std::uint64_t mix64(std::uint64_t x);

// Stream seed for (master seed, purpose label). Labels in use:
// "init", "negatives", "gumbel", "dropout", "split".
std::uint64_t derive_stream(std::uint64_t master_seed, std::string_view purpose);

// Counter-based variant: a stream seed for (master, purpose, a, b, c).
// Gives parallel consumers (per step / layer / node) independent streams
// whose values do not depend on evaluation order.
std::uint64_t derive_stream(std::uint64_t master_seed, std::string_view purpose,
                            std::uint64_t a, std::uint64_t b, std::uint64_t c);

} // namespace hmlet
