#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <set>
#include <vector>

#include <omp.h>

#include "latkit/core/errors.hpp"
#include "latkit/core/exec.hpp"
#include "latkit/core/rng.hpp"

#include "../support/oracles.hpp"

using namespace latkit;

TEST_CASE("same seed reproduces the same stream") {
    Rng a(1234), b(1234);
    for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("different seeds give different streams") {
    Rng a(1), b(2);
    int same = 0;
    for (int i = 0; i < 64; ++i) same += a.next_u64() == b.next_u64();
    CHECK(same == 0);
}

TEST_CASE("uniform01 stays in [0,1) and covers the range") {
    Rng r(7);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 100000; ++i) {
        const double u = r.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo < 1e-3);
    CHECK(hi > 1.0 - 1e-3);
}

TEST_CASE("normal moments match a standard Gaussian") {
    Rng r(11);
    const int n = 200000;
    double s = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        s += x;
        s2 += x * x;
        s3 += x * x * x;
        s4 += x * x * x * x;
    }
    const double mean = s / n;
    const double var = s2 / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);
    CHECK(std::abs(s3 / n) < 0.05);
    CHECK(std::abs(s4 / n - 3.0) < 0.1);
}

TEST_CASE("truncated normal respects its bounds strictly") {
    Rng r(13);
    const double mean = 0.5, std = 2.0, t = 1.5;
    for (int i = 0; i < 50000; ++i) {
        const double x = r.truncated_normal(mean, std, t);
        CHECK(x >= mean - t * std);
        CHECK(x <= mean + t * std);
    }
}

TEST_CASE("truncated normal variance matches the closed form") {
    // Var = std^2 * (1 - 2 t phi(t) / (2 Phi(t) - 1)), derived independently.
    for (const double t : {0.9, 2.0, 5.0}) {
        Rng r(17);
        const int n = 400000;
        double s = 0.0, s2 = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = r.truncated_normal(0.0, 1.0, t);
            s += x;
            s2 += x * x;
        }
        const double var = s2 / n - (s / n) * (s / n);
        const double expect = oracles::truncated_normal_unit_variance(t);
        CHECK(std::abs(s / n) < 0.01);
        CHECK(var == doctest::Approx(expect).epsilon(0.02));
    }
}

TEST_CASE("rejection sampling matches an inverse-CDF sampler in distribution") {
    // Kolmogorov-Smirnov distance between the two routes at n=100k each.
    const double t = 2.0;
    const int n = 100000;
    std::vector<double> rej(n), inv(n);
    Rng r1(23), r2(29);
    for (int i = 0; i < n; ++i) rej[i] = r1.truncated_normal(0.0, 1.0, t);
    for (int i = 0; i < n; ++i)
        inv[i] = oracles::truncated_normal_by_inverse_cdf(r2.uniform01(), 0.0, 1.0, t);
    std::sort(rej.begin(), rej.end());
    std::sort(inv.begin(), inv.end());
    double ks = 0.0;
    size_t i = 0, j = 0;
    while (i < rej.size() && j < inv.size()) {
        if (rej[i] <= inv[j]) ++i;
        else ++j;
        ks = std::max(ks, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / n));
    }
    // 99.9% two-sample KS threshold ~ 1.95*sqrt(2/n)
    CHECK(ks < 1.95 * std::sqrt(2.0 / n));
}

TEST_CASE("no probability mass sits on the truncation boundary") {
    Rng r(31);
    const double t = 0.9;
    for (int i = 0; i < 20000; ++i) {
        const double x = r.truncated_normal(0.0, 1.0, t);
        CHECK(std::abs(x) != t);  // clipping would pile samples exactly here
    }
}

TEST_CASE("invalid truncation parameters are rejected") {
    Rng r(1);
    CHECK_THROWS_AS(r.truncated_normal(0.0, 1.0, 0.0), ParamError);
    CHECK_THROWS_AS(r.truncated_normal(0.0, 1.0, -1.0), ParamError);
    CHECK_THROWS_AS(r.truncated_normal(0.0, -1.0, 2.0), ParamError);
    double buf[4];
    CHECK_THROWS_AS(fill_truncated_normal(buf, 4, 0.0, 1.0, -2.0, 1), ParamError);
}

TEST_CASE("zero std collapses to the mean") {
    Rng r(3);
    CHECK(r.truncated_normal(1.25, 0.0, 2.0) == 1.25);
}

TEST_CASE("seed_mix separates nearby inputs") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t a = 0; a < 16; ++a)
        for (std::uint64_t b = 0; b < 16; ++b) seen.insert(seed_mix({a, b}));
    CHECK(seen.size() == 256);
    CHECK(seed_mix({1, 2}) != seed_mix({2, 1}));
    CHECK(seed_mix({1}) != seed_mix({1, 0}));
}

TEST_CASE("chunked fills are identical across execution modes and threads") {
    const std::int64_t n = 3 * kSampleChunk + 7;
    std::vector<double> serial(n), parallel(n);
    set_execution(Exec::serial);
    fill_truncated_normal(serial.data(), n, 0.1, 2.0, 2.0, 99);
    set_execution(Exec::parallel);
    for (int threads : {1, 2, 4}) {
        omp_set_num_threads(threads);
        std::fill(parallel.begin(), parallel.end(), 0.0);
        fill_truncated_normal(parallel.data(), n, 0.1, 2.0, 2.0, 99);
        CHECK(std::memcmp(serial.data(), parallel.data(), n * sizeof(double)) == 0);
    }
    omp_set_num_threads(omp_get_num_procs());
    set_execution(Exec::parallel);
}

TEST_CASE("prefix stability: a longer fill extends a shorter one") {
    std::vector<double> a(kSampleChunk * 2), b(kSampleChunk * 5);
    fill_normal(a.data(), static_cast<std::int64_t>(a.size()), 5);
    fill_normal(b.data(), static_cast<std::int64_t>(b.size()), 5);
    CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}
