#include "latkit/core/rng.hpp"

#include <cmath>
#include <vector>

#include "latkit/core/errors.hpp"
#include "latkit/core/exec.hpp"

namespace latkit {

namespace {

inline std::uint64_t rotl(std::uint64_t x, int b) {
    return (x << b) | (x >> (64 - b));
}

// SipHash-2-4, Aumasson/Bernstein reference construction over full 8-byte
// words. The key is an arbitrary fixed constant; it only has to stay stable
// across builds for reproducibility.
constexpr std::uint64_t kSipKey0 = 0x6c61746b69742d31ULL;  // "latkit-1"
constexpr std::uint64_t kSipKey1 = 0x736565646d697865ULL;  // "seedmixe"

inline void sipround(std::uint64_t& v0, std::uint64_t& v1, std::uint64_t& v2,
                     std::uint64_t& v3) {
    v0 += v1; v1 = rotl(v1, 13); v1 ^= v0; v0 = rotl(v0, 32);
    v2 += v3; v3 = rotl(v3, 16); v3 ^= v2;
    v0 += v3; v3 = rotl(v3, 21); v3 ^= v0;
    v2 += v1; v1 = rotl(v1, 17); v1 ^= v2; v2 = rotl(v2, 32);
}

inline std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t seed_mix(std::initializer_list<std::uint64_t> words) {
    std::uint64_t v0 = kSipKey0 ^ 0x736f6d6570736575ULL;
    std::uint64_t v1 = kSipKey1 ^ 0x646f72616e646f6dULL;
    std::uint64_t v2 = kSipKey0 ^ 0x6c7967656e657261ULL;
    std::uint64_t v3 = kSipKey1 ^ 0x7465646279746573ULL;
    for (std::uint64_t w : words) {
        v3 ^= w;
        sipround(v0, v1, v2, v3);
        sipround(v0, v1, v2, v3);
        v0 ^= w;
    }
    // Length block: word count in the top byte, as in the byte-string spec.
    std::uint64_t b = static_cast<std::uint64_t>(words.size()) << 56;
    v3 ^= b;
    sipround(v0, v1, v2, v3);
    sipround(v0, v1, v2, v3);
    v0 ^= b;
    v2 ^= 0xff;
    sipround(v0, v1, v2, v3);
    sipround(v0, v1, v2, v3);
    sipround(v0, v1, v2, v3);
    sipround(v0, v1, v2, v3);
    return v0 ^ v1 ^ v2 ^ v3;
}

Rng::Rng(std::uint64_t seed) {
    std::uint64_t x = seed;
    for (auto& s : s_) s = splitmix64(x);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u, v, s;
    do {
        u = 2.0 * uniform01() - 1.0;
        v = 2.0 * uniform01() - 1.0;
        s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
}

double Rng::truncated_normal(double mean, double std, double trunc) {
    if (std < 0.0) throw ParamError("truncated_normal: std must be >= 0");
    if (trunc <= 0.0) throw ParamError("truncated_normal: trunc must be > 0");
    if (std == 0.0) return mean;
    double u;
    do {
        u = normal();
    } while (u < -trunc || u > trunc);
    return mean + std * u;
}

std::int64_t Rng::index(std::int64_t n) {
    return static_cast<std::int64_t>(uniform01() * static_cast<double>(n));
}

bool Rng::bernoulli(double p) { return uniform01() < p; }

namespace {

template <typename Fill>
void chunked_fill(double* out, std::int64_t n, std::uint64_t seed, Fill fill) {
    const std::int64_t chunks = (n + kSampleChunk - 1) / kSampleChunk;
    if (execution() == Exec::parallel) {
#pragma omp parallel for schedule(static)
        for (std::int64_t c = 0; c < chunks; ++c) {
            Rng rng(seed_mix({seed, static_cast<std::uint64_t>(c)}));
            const std::int64_t lo = c * kSampleChunk;
            const std::int64_t hi = std::min(n, lo + kSampleChunk);
            for (std::int64_t i = lo; i < hi; ++i) out[i] = fill(rng);
        }
    } else {
        for (std::int64_t c = 0; c < chunks; ++c) {
            Rng rng(seed_mix({seed, static_cast<std::uint64_t>(c)}));
            const std::int64_t lo = c * kSampleChunk;
            const std::int64_t hi = std::min(n, lo + kSampleChunk);
            for (std::int64_t i = lo; i < hi; ++i) out[i] = fill(rng);
        }
    }
}

}  // namespace

void fill_uniform01(double* out, std::int64_t n, std::uint64_t seed) {
    chunked_fill(out, n, seed, [](Rng& r) { return r.uniform01(); });
}

void fill_normal(double* out, std::int64_t n, std::uint64_t seed) {
    chunked_fill(out, n, seed, [](Rng& r) { return r.normal(); });
}

void fill_truncated_normal(double* out, std::int64_t n, double mean, double std,
                           double trunc, std::uint64_t seed) {
    if (std < 0.0) throw ParamError("fill_truncated_normal: std must be >= 0");
    if (trunc <= 0.0) throw ParamError("fill_truncated_normal: trunc must be > 0");
    chunked_fill(out, n, seed, [=](Rng& r) {
        return r.truncated_normal(mean, std, trunc);
    });
}

}  // namespace latkit
