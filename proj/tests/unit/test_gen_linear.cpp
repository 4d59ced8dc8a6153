// Latent spec validation, exact-rejection truncated sampling, the linear
// Gaussian generator, its closed-form pair MI, and sample-based cross-checks
// (nearest-neighbor MI estimator, data-processing inequality).
#include <doctest.h>

#include <cmath>
#include <vector>

#include "latkit/core/errors.hpp"
#include "latkit/core/rng.hpp"
#include "latkit/gen/linear.hpp"
#include "../support/oracles.hpp"

using namespace latkit;
using namespace latkit::gen;

namespace {

Tensor eye(i64 n) {
    Tensor t({n, n});
    for (i64 i = 0; i < n; ++i) t[i * n + i] = 1.0;
    return t;
}

Tensor diag(std::vector<double> v) {
    const i64 n = static_cast<i64>(v.size());
    Tensor t({n, n});
    for (i64 i = 0; i < n; ++i) t[i * n + i] = v[static_cast<size_t>(i)];
    return t;
}

Tensor scalar_mat(double v) { return Tensor::full({1, 1}, v); }

LatentSpec one_level_spec(i64 m) {
    LatentSpec s;
    s.n_levels = 1;
    s.dims = {m};
    return s;
}

// MI of two unit-variance Gaussians with correlation rho.
double gauss_mi_rho(double rho) { return -0.5 * std::log(1.0 - rho * rho); }

}  // namespace

TEST_CASE("latent spec validation") {
    LatentSpec s;
    s.n_levels = 3;
    s.dims = {4, 2, 8};
    CHECK_NOTHROW(s.validate());
    CHECK(s.total_dim() == 14);

    SUBCASE("default groups are one per level") {
        auto g = s.group_ranges();
        REQUIRE(g.size() == 3);
        CHECK(g[0] == std::pair<i64, i64>{0, 1});
        CHECK(g[2] == std::pair<i64, i64>{2, 3});
    }
    SUBCASE("explicit contiguous groups") {
        s.group_sizes = {2, 1};
        CHECK_NOTHROW(s.validate());
        auto g = s.group_ranges();
        REQUIRE(g.size() == 2);
        CHECK(g[0] == std::pair<i64, i64>{0, 2});
        CHECK(g[1] == std::pair<i64, i64>{2, 3});
    }
    SUBCASE("rejects bad shapes") {
        LatentSpec bad = s;
        bad.n_levels = 0;
        CHECK_THROWS_AS(bad.validate(), ParamError);
        bad = s;
        bad.dims = {4, 2};
        CHECK_THROWS_AS(bad.validate(), ParamError);
        bad = s;
        bad.dims = {4, 0, 8};
        CHECK_THROWS_AS(bad.validate(), ParamError);
        bad = s;
        bad.group_sizes = {2, 2};
        CHECK_THROWS_AS(bad.validate(), ParamError);
        bad = s;
        bad.anchor_dist = {{0.0, 1.0, 2.0}};
        CHECK_THROWS_AS(bad.validate(), ParamError);
        bad = s;
        bad.anchor_dist = {{0, 1, 2}, {0, -1.0, 2}, {0, 1, 2}};
        CHECK_THROWS_AS(bad.validate(), ParamError);
    }
}

TEST_CASE("truncated sampling: moments, bounds, and errors") {
    const i64 n = 1000000;
    TruncatedNormalParams p{0.0, 1.0, 2.0};
    Tensor s = sample_truncated_normal(p, n, 2024);

    double mean = 0.0;
    for (i64 i = 0; i < n; ++i) mean += s[i];
    mean /= static_cast<double>(n);
    CHECK(std::abs(mean) < 0.01);

    double var = 0.0;
    for (i64 i = 0; i < n; ++i) var += (s[i] - mean) * (s[i] - mean);
    var /= static_cast<double>(n);
    // Closed-form variance of the unit truncated normal.
    CHECK(std::abs(std::sqrt(var) -
                   std::sqrt(oracles::truncated_normal_unit_variance(2.0))) < 0.01);

    for (i64 i = 0; i < n; ++i) {
        REQUIRE(s[i] >= -2.0);
        REQUIRE(s[i] <= 2.0);
    }

    // Truncation far out: std approaches the untruncated value.
    Tensor wide = sample_truncated_normal({0.0, 1.0, 50.0}, n, 2025);
    double wvar = 0.0, wmean = 0.0;
    for (i64 i = 0; i < n; ++i) wmean += wide[i];
    wmean /= static_cast<double>(n);
    for (i64 i = 0; i < n; ++i) wvar += (wide[i] - wmean) * (wide[i] - wmean);
    wvar /= static_cast<double>(n);
    CHECK(std::abs(std::sqrt(wvar) - 1.0) < 0.01);

    CHECK_THROWS_AS(sample_truncated_normal({0, 0, 2}, 5, 1), ParamError);
    CHECK_THROWS_AS(sample_truncated_normal({0, 1, 0}, 5, 1), ParamError);
    CHECK_THROWS_AS(sample_truncated_normal({0, 1, 2}, -1, 1), ParamError);
    CHECK(sample_truncated_normal({0, 1, 2}, 0, 1).numel() == 0);

    // Determinism.
    Tensor again = sample_truncated_normal(p, 100, 2024);
    for (i64 i = 0; i < 100; ++i) CHECK(again[i] == s[i]);
}

TEST_CASE("identity generator reproduces its latent") {
    const i64 d = 4;
    LinearGaussianMLVGM model(one_level_spec(d), {eye(d)}, 0.0);
    CHECK(model.output_shape() == std::array<i64, 3>{1, 1, d});

    Tensor z({3, d});
    Rng rng(5);
    for (i64 i = 0; i < z.numel(); ++i) z[i] = rng.normal();
    Tensor x = model.generate({z}, 9);
    REQUIRE(x.shape() == std::vector<i64>{3, 1, 1, d});
    for (i64 i = 0; i < x.numel(); ++i) CHECK(x[i] == z[i]);
}

TEST_CASE("generation is pure in latents and seed") {
    LatentSpec spec;
    spec.n_levels = 2;
    spec.dims = {3, 2};
    Rng rng(6);
    Tensor a1({4, 3}), a2({4, 2});
    for (i64 i = 0; i < a1.numel(); ++i) a1[i] = rng.normal();
    for (i64 i = 0; i < a2.numel(); ++i) a2[i] = rng.normal();
    LinearGaussianMLVGM model(spec, {a1, a2}, 0.5);

    Tensor z1({5, 3}), z2({5, 2});
    for (i64 i = 0; i < z1.numel(); ++i) z1[i] = rng.normal();
    for (i64 i = 0; i < z2.numel(); ++i) z2[i] = rng.normal();

    Tensor xa = model.generate({z1, z2}, 123);
    Tensor xb = model.generate({z1, z2}, 123);
    for (i64 i = 0; i < xa.numel(); ++i) REQUIRE(xa[i] == xb[i]);

    Tensor xc = model.generate({z1, z2}, 124);
    bool all_equal = true;
    for (i64 i = 0; i < xa.numel(); ++i) all_equal &= xa[i] == xc[i];
    CHECK_FALSE(all_equal);

    CHECK_THROWS_AS(model.generate({z1}, 1), ShapeError);
    CHECK_THROWS_AS(model.generate({z2, z1}, 1), ShapeError);
}

TEST_CASE("generator gradient matches finite differences") {
    LatentSpec spec;
    spec.n_levels = 2;
    spec.dims = {3, 2};
    Rng rng(7);
    Tensor a1({4, 3}), a2({4, 2});
    for (i64 i = 0; i < a1.numel(); ++i) a1[i] = rng.normal();
    for (i64 i = 0; i < a2.numel(); ++i) a2[i] = rng.normal();
    LinearGaussianMLVGM model(spec, {a1, a2}, 0.0);

    Tensor z1({2, 3}), z2({2, 2});
    for (i64 i = 0; i < z1.numel(); ++i) z1[i] = rng.normal();
    for (i64 i = 0; i < z2.numel(); ++i) z2[i] = rng.normal();
    std::vector<double> c;
    for (i64 i = 0; i < 8; ++i) c.push_back(rng.uniform(-1, 1));

    auto loss = [&](const Tensor& z1v, const Tensor& z2v) {
        Tensor x = model.generate({z1v, z2v}, 0);
        double s = 0.0;
        for (i64 i = 0; i < x.numel(); ++i) s += c[static_cast<size_t>(i)] * x[i];
        return s;
    };
    model.generate({z1, z2}, 0);
    Tensor dx({2, 1, 1, 4});
    for (i64 i = 0; i < 8; ++i) dx[i] = c[static_cast<size_t>(i)];

    for (i64 level : {0, 1}) {
        Tensor dz = model.backward_mapped(level, dx);
        Tensor& z = level == 0 ? z1 : z2;
        const double h = 1e-6;
        for (i64 i = 0; i < z.numel(); ++i) {
            const double keep = z[i];
            z[i] = keep + h;
            const double lp = loss(z1, z2);
            z[i] = keep - h;
            const double lm = loss(z1, z2);
            z[i] = keep;
            const double fd = (lp - lm) / (2 * h);
            CHECK(std::abs(dz[i] - fd) <= 1e-6 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST_CASE("gaussian pair MI: hand formula and symmetry") {
    SUBCASE("scalar pair") {
        const double vx = 2.0, vy = 3.0, c = 1.5;
        const double rho = c / std::sqrt(vx * vy);
        CHECK(gaussian_pair_mi(scalar_mat(vx), scalar_mat(vy), scalar_mat(c)) ==
              doctest::Approx(gauss_mi_rho(rho)).epsilon(1e-12));
    }
    SUBCASE("symmetry under swapping the pair") {
        Rng rng(8);
        Tensor b({3, 3}), cross({3, 3});
        for (i64 i = 0; i < 9; ++i) b[i] = rng.normal();
        for (i64 i = 0; i < 9; ++i) cross[i] = 0.1 * rng.normal();
        // sx = b b^T + I is PD; sy likewise with a shift.
        Tensor sx({3, 3}), sy({3, 3});
        for (i64 i = 0; i < 3; ++i)
            for (i64 j = 0; j < 3; ++j) {
                double s = i == j ? 1.0 : 0.0;
                for (i64 k = 0; k < 3; ++k) s += b[i * 3 + k] * b[j * 3 + k];
                sx[i * 3 + j] = s;
                sy[i * 3 + j] = s + (i == j ? 0.5 : 0.0);
            }
        Tensor cross_t({3, 3});
        for (i64 i = 0; i < 3; ++i)
            for (i64 j = 0; j < 3; ++j) cross_t[i * 3 + j] = cross[j * 3 + i];
        const double fwd = gaussian_pair_mi(sx, sy, cross);
        const double rev = gaussian_pair_mi(sy, sx, cross_t);
        CHECK(fwd == doctest::Approx(rev).epsilon(1e-12));
        CHECK(fwd >= 0.0);
    }
    SUBCASE("independent pair has zero MI") {
        CHECK(gaussian_pair_mi(eye(2), eye(2), Tensor({2, 2})) ==
              doctest::Approx(0.0).epsilon(1e-14));
    }
}

TEST_CASE("analytic pair MI matches hand-derived scalar cases") {
    const double a = 1.3, e = 0.4;
    LinearGaussianMLVGM model(one_level_spec(1), {scalar_mat(a)}, e);

    SUBCASE("zero perturbation: two noisy copies of one signal") {
        const double rho = a * a / (a * a + e * e);
        CHECK(model.analytic_pair_mi(0, scalar_mat(0.0)) ==
              doctest::Approx(gauss_mi_rho(rho)).epsilon(1e-12));
    }
    SUBCASE("gaussian perturbation of variance p") {
        const double p = 0.7;
        const double rho = a * a / std::sqrt((a * a + e * e) *
                                             (a * a * (1 + p) + e * e));
        CHECK(model.analytic_pair_mi(0, scalar_mat(p)) ==
              doctest::Approx(gauss_mi_rho(rho)).epsilon(1e-12));
    }
    SUBCASE("perturbation decreases MI monotonically") {
        double prev = model.analytic_pair_mi(0, scalar_mat(0.0));
        for (double p : {0.5, 1.0, 2.0, 8.0}) {
            const double cur = model.analytic_pair_mi(0, scalar_mat(p));
            CHECK(cur < prev);
            prev = cur;
        }
    }
    SUBCASE("diagonal model adds per-dimension MI") {
        LatentSpec spec = one_level_spec(2);
        Tensor a2 = diag({1.0, 2.0});
        LinearGaussianMLVGM m2(spec, {a2}, 0.5);
        const double r1 = 1.0 / (1.0 + 0.25), r2 = 4.0 / (4.0 + 0.25);
        CHECK(m2.analytic_pair_mi(0, Tensor({2, 2})) ==
              doctest::Approx(gauss_mi_rho(r1) + gauss_mi_rho(r2)).epsilon(1e-12));
    }
}

TEST_CASE("a zero-matrix level has no influence on MI") {
    LatentSpec spec;
    spec.n_levels = 2;
    spec.dims = {2, 2};
    Rng rng(9);
    Tensor a1({3, 2});
    for (i64 i = 0; i < a1.numel(); ++i) a1[i] = rng.normal();
    LinearGaussianMLVGM model(spec, {a1, Tensor({3, 2})}, 0.3);

    const double base = model.analytic_pair_mi(1, Tensor({2, 2}));
    Tensor big = diag({50.0, 50.0});
    CHECK(model.analytic_pair_mi(1, big) == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("analytic MI error paths") {
    LinearGaussianMLVGM noiseless(one_level_spec(1), {scalar_mat(1.0)}, 0.0);
    CHECK_THROWS_AS(noiseless.analytic_pair_mi(0, scalar_mat(0.0)), ParamError);

    LinearGaussianMLVGM model(one_level_spec(2), {eye(2)}, 0.5);
    CHECK_THROWS_AS(model.analytic_pair_mi(0, scalar_mat(1.0)), ShapeError);
    CHECK_THROWS_AS(model.analytic_pair_mi(2, eye(2)), ParamError);
    Tensor notpsd = diag({1.0, -1.0});
    CHECK_THROWS_AS(model.analytic_pair_mi(0, notpsd), ParamError);
    Tensor asym({2, 2});
    asym[1] = 1.0;  // upper off-diagonal only
    CHECK_THROWS_AS(model.analytic_pair_mi(0, asym), ParamError);
}

TEST_CASE("sampled pairs agree with the analytic MI (nearest-neighbor check)") {
    const double a = 1.0, e = 0.6;
    LinearGaussianMLVGM model(one_level_spec(1), {scalar_mat(a)}, e);
    const i64 n = 2000;

    for (double p : {0.0, 1.0}) {
        auto [x, x2] = model.sample_pairs(0, scalar_mat(p), n, 31337);
        std::vector<double> xs(static_cast<size_t>(n)), ys(static_cast<size_t>(n));
        for (i64 i = 0; i < n; ++i) {
            xs[static_cast<size_t>(i)] = x[i];
            ys[static_cast<size_t>(i)] = x2[i];
        }
        const double est = oracles::ksg_mi_1d(xs, ys, 5);
        const double exact = model.analytic_pair_mi(0, scalar_mat(p));
        INFO("p=", p, " exact=", exact, " ksg=", est);
        CHECK(std::abs(est - exact) < 0.1);
    }

    // Same seed reproduces; different seed does not.
    auto [xa, xa2] = model.sample_pairs(0, scalar_mat(1.0), 64, 5);
    auto [xb, xb2] = model.sample_pairs(0, scalar_mat(1.0), 64, 5);
    for (i64 i = 0; i < 64; ++i) {
        REQUIRE(xa[i] == xb[i]);
        REQUIRE(xa2[i] == xb2[i]);
    }
}

TEST_CASE("deterministic encoders cannot increase MI") {
    // Data-processing inequality, sample-estimated: for deterministic f,
    // I(f(X); f(X')) <= I(X; X') + estimator tolerance (0.15 nats here).
    LatentSpec spec;
    spec.n_levels = 2;
    spec.dims = {2, 2};
    Rng rng(10);
    Tensor a1({4, 2}), a2({4, 2});
    for (i64 i = 0; i < a1.numel(); ++i) a1[i] = rng.normal();
    for (i64 i = 0; i < a2.numel(); ++i) a2[i] = 0.5 * rng.normal();
    LinearGaussianMLVGM model(spec, {a1, a2}, 0.5);

    const i64 n = 2000;
    Tensor pcov = diag({1.5, 1.5});
    const double exact = model.analytic_pair_mi(0, pcov);
    auto [x, x2] = model.sample_pairs(0, pcov, n, 99);

    for (uint64_t enc_seed : {1u, 2u, 3u}) {
        Rng er(enc_seed);
        std::vector<double> w(4);
        for (auto& v : w) v = er.normal();
        auto encode = [&](const Tensor& batch, i64 row) {
            double s = 0.0;
            for (i64 j = 0; j < 4; ++j) s += w[static_cast<size_t>(j)] * batch[row * 4 + j];
            return std::tanh(s);
        };
        std::vector<double> fx(static_cast<size_t>(n)), fy(static_cast<size_t>(n));
        for (i64 i = 0; i < n; ++i) {
            fx[static_cast<size_t>(i)] = encode(x, i);
            fy[static_cast<size_t>(i)] = encode(x2, i);
        }
        const double est = oracles::ksg_mi_1d(fx, fy, 5);
        INFO("enc_seed=", enc_seed, " exact=", exact, " encoded-ksg=", est);
        CHECK(est <= exact + 0.15);
    }
}
