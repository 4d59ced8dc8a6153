#pragma once

#include <cstdint>
#include <initializer_list>

namespace latkit {

// SipHash-2-4 over a little-endian serialized word sequence, fixed key.
// Used to derive independent subseeds from (seed, iteration, replica, tag, ...)
// tuples; any change in any word yields an unrelated stream.
std::uint64_t seed_mix(std::initializer_list<std::uint64_t> words);

// Deterministic PRNG (xoshiro256++ seeded via splitmix64). The standard
// library distributions are implementation-defined, so every random draw in
// the library goes through this class to keep runs bit-reproducible.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform on [0,1) with 53 random mantissa bits.
    double uniform01();

    // Uniform on [lo,hi).
    double uniform(double lo, double hi);

    // Standard normal via the polar method (pairs are cached).
    double normal();

    // Normal(mean, std) conditioned on |x - mean| <= trunc * std, by
    // rejection. Tail draws are re-drawn, never clipped, so the density is
    // the exact renormalized Gaussian.
    double truncated_normal(double mean, double std, double trunc);

    // Integer in [0, n).
    std::int64_t index(std::int64_t n);

    // True with probability p.
    bool bernoulli(double p);

private:
    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Chunk-deterministic array fills: the output is split into fixed chunks of
// kSampleChunk values, each generated from its own derived stream, so results
// are identical for any execution mode and thread count.
inline constexpr std::int64_t kSampleChunk = 4096;

void fill_uniform01(double* out, std::int64_t n, std::uint64_t seed);
void fill_normal(double* out, std::int64_t n, std::uint64_t seed);
void fill_truncated_normal(double* out, std::int64_t n, double mean, double std,
                           double trunc, std::uint64_t seed);

}  // namespace latkit
