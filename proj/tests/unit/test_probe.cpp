// Perturbation net identity initialization, the stop rule, encoder-only
// fitting, and full two-player probe runs on the linear Gaussian oracle:
// convergence onto the target band, the frozen degenerate case, replay of
// the recorded curve, bitwise reproducibility, and the inverse relation
// between channel strength and the perturbation needed to hit the target.
#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "latkit/core/errors.hpp"
#include "latkit/core/rng.hpp"
#include "latkit/gen/linear.hpp"
#include "latkit/probe/probe.hpp"

using namespace latkit;
using namespace latkit::probe;

namespace {

// One scalar latent per level, A_i = s_i * e_i, so each level owns one
// output axis and its column norm is s_i exactly.
std::unique_ptr<gen::LinearGaussianMLVGM> axis_model(std::vector<double> s,
                                                     i64 d, double eps) {
    gen::LatentSpec spec;
    spec.n_levels = static_cast<i64>(s.size());
    spec.dims.assign(s.size(), 1);
    std::vector<Tensor> a;
    for (size_t i = 0; i < s.size(); ++i) {
        Tensor ai({d, 1});
        ai[static_cast<i64>(i)] = s[i];
        a.push_back(std::move(ai));
    }
    return std::make_unique<gen::LinearGaussianMLVGM>(spec, std::move(a), eps);
}

// Two strong channels flanking a dead one. eps small enough that the clean
// task settles well below the stop band, and few enough pairs that a
// scrambled channel pushes the loss above it.
std::unique_ptr<gen::LinearGaussianMLVGM> live_dead_model() {
    return axis_model({4.0, 0.0, 4.0}, 4, 0.1);
}

ProbeConfig oracle_config() {
    ProbeConfig c;
    c.pairs = 48;
    c.tau = 0.05;
    c.encoder_lr = 3e-3;
    // Slower than the encoder so the loss climbs through the stop band over
    // many windows instead of jumping across it inside the first one.
    c.net_lr = 2e-4;
    c.warmup_iters = 800;
    c.window = 100;
    c.max_iters = 1500;
    return c;
}

double mean_of(const std::vector<double>& v, size_t begin, size_t count) {
    REQUIRE(begin + count <= v.size());
    double s = 0.0;
    for (size_t i = begin; i < begin + count; ++i) s += v[i];
    return s / static_cast<double>(count);
}

double tail_mean(const std::vector<double>& v, size_t count) {
    REQUIRE(v.size() >= count);
    return mean_of(v, v.size() - count, count);
}

// Steps at which the stop rule would fire when slid along the curve.
std::vector<i64> replay_fires(const std::vector<double>& curve, i64 window,
                              double target, double tolerance) {
    std::vector<i64> fires;
    for (i64 t = window; t <= static_cast<i64>(curve.size()); ++t) {
        std::vector<double> w(curve.begin() + (t - window), curve.begin() + t);
        if (stop_criterion(w, target, tolerance)) fires.push_back(t);
    }
    return fires;
}

}  // namespace

TEST_CASE("perturbation net output matches input shape and adds a residual") {
    PerturbationNet net(5, 16, 21);
    Tensor z({7, 5});
    fill_normal(z.data(), z.numel(), 99);
    Tensor p = net.perturbation(z, false);
    REQUIRE(p.shape() == z.shape());
    Tensor t = net.transform(z, false);
    REQUIRE(t.shape() == z.shape());
    for (i64 i = 0; i < z.numel(); ++i) CHECK(t[i] == z[i] + p[i]);
    CHECK(net.dim() == 5);
    CHECK(net.hidden() == 16);
    CHECK(net.params().size() == 4);  // two dense layers, weights and biases
}

TEST_CASE("fresh perturbation nets start near the identity") {
    for (std::uint64_t seed : {3ull, 77ull}) {
        PerturbationNet net(8, 64, seed);
        const i64 n = 10000;
        Tensor z({n, 8});
        Rng rng(4242);
        for (i64 i = 0; i < z.numel(); ++i)
            z[i] = rng.truncated_normal(0.0, 1.0, 2.0);
        Tensor p = net.perturbation(z, false);
        double rel = 0.0;
        for (i64 r = 0; r < n; ++r) {
            double pn = 0.0, zn = 0.0;
            for (i64 c = 0; c < 8; ++c) {
                pn += p[r * 8 + c] * p[r * 8 + c];
                zn += z[r * 8 + c] * z[r * 8 + c];
            }
            rel += std::sqrt(pn) / std::sqrt(zn);
        }
        rel /= static_cast<double>(n);
        CHECK(rel < 0.05);
        CHECK(rel > 0.0);  // not the exact identity, a near-identity
    }
}

TEST_CASE("perturbation net rejects bad dimensions and mismatched input") {
    CHECK_THROWS_AS(PerturbationNet(0, 16, 1), ParamError);
    CHECK_THROWS_AS(PerturbationNet(4, 0, 1), ParamError);
    PerturbationNet net(4, 8, 1);
    Tensor bad({3, 5});
    CHECK_THROWS_AS(net.perturbation(bad, false), ShapeError);
}

TEST_CASE("stop criterion is a band test on the window mean") {
    std::vector<double> at_target(50, 1.0);
    CHECK(stop_criterion(at_target, 1.0, 0.05));

    std::vector<double> off(50, 1.2);
    CHECK_FALSE(stop_criterion(off, 1.0, 0.05));

    // Boundary is inclusive (dyadic values, so the comparison is exact).
    std::vector<double> edge(50, 1.0625);
    CHECK(stop_criterion(edge, 1.0, 0.0625));

    // Only the mean matters, not individual entries.
    std::vector<double> mixed = {0.5, 1.5, 0.9, 1.1};
    CHECK(stop_criterion(mixed, 1.0, 0.05));

    std::vector<double> empty;
    CHECK_THROWS_AS(stop_criterion(empty, 1.0, 0.05), ParamError);
}

TEST_CASE("probe config validation and default resolution") {
    ProbeConfig c;
    c.validate();
    CHECK(c.resolved_tolerance() == doctest::Approx(0.05));
    CHECK(c.resolved_net_lr() == doctest::Approx(1e-2));

    c.tolerance = 0.2;
    c.net_lr = 5e-4;
    CHECK(c.resolved_tolerance() == doctest::Approx(0.2));
    CHECK(c.resolved_net_lr() == doctest::Approx(5e-4));

    auto expect_bad = [](auto&& tweak) {
        ProbeConfig bad;
        tweak(bad);
        CHECK_THROWS_AS(bad.validate(), ParamError);
    };
    expect_bad([](ProbeConfig& b) { b.loss_target = -1.0; });
    expect_bad([](ProbeConfig& b) { b.loss_target = 0.0; });  // default band
    expect_bad([](ProbeConfig& b) { b.tolerance = 0.0; });
    expect_bad([](ProbeConfig& b) { b.pairs = 1; });
    expect_bad([](ProbeConfig& b) { b.tau = 0.0; });
    expect_bad([](ProbeConfig& b) { b.encoder_lr = 0.0; });
    expect_bad([](ProbeConfig& b) { b.net_lr = 0.0; });
    expect_bad([](ProbeConfig& b) { b.window = 0; });
    expect_bad([](ProbeConfig& b) { b.max_iters = b.window; });
    expect_bad([](ProbeConfig& b) { b.warmup_iters = -1; });
    expect_bad([](ProbeConfig& b) { b.net_hidden = 0; });

    // A zero target is usable once the band is explicit.
    ProbeConfig zero;
    zero.loss_target = 0.0;
    zero.tolerance = 0.5;
    zero.validate();
    CHECK(zero.resolved_tolerance() == doctest::Approx(0.5));
}

TEST_CASE("encoder fit config validation") {
    EncoderFitConfig c;
    c.validate();
    auto expect_bad = [](auto&& tweak) {
        EncoderFitConfig bad;
        tweak(bad);
        CHECK_THROWS_AS(bad.validate(), ParamError);
    };
    expect_bad([](EncoderFitConfig& b) { b.iters = 0; });
    expect_bad([](EncoderFitConfig& b) { b.pairs = 1; });
    expect_bad([](EncoderFitConfig& b) { b.tau = 0.0; });
    expect_bad([](EncoderFitConfig& b) { b.lr = 0.0; });
    expect_bad([](EncoderFitConfig& b) { b.eval_batches = 0; });
}

TEST_CASE("probe encoder is deterministic in its seed") {
    const std::array<i64, 3> shape = {1, 1, 4};
    auto a = make_probe_encoder(shape, 128, 32, 5);
    auto b = make_probe_encoder(shape, 128, 32, 5);
    auto c = make_probe_encoder(shape, 128, 32, 6);
    Tensor x({5, 1, 1, 4});
    fill_normal(x.data(), x.numel(), 31);
    Tensor ea = a->embed(x, false);
    Tensor eb = b->embed(x, false);
    Tensor ec = c->embed(x, false);
    REQUIRE(ea.shape() == std::vector<i64>({5, 32}));
    bool same = true, diff = false;
    for (i64 i = 0; i < ea.numel(); ++i) {
        same = same && ea[i] == eb[i];
        diff = diff || ea[i] != ec[i];
        CHECK(std::isfinite(ea[i]));
    }
    CHECK(same);
    CHECK(diff);

    CHECK_THROWS_AS(make_probe_encoder(shape, 0, 32, 1), ParamError);
    CHECK_THROWS_AS(make_probe_encoder(shape, 128, 0, 1), ParamError);
}

TEST_CASE("encoder alone reaches a low loss on matched pairs") {
    auto model = live_dead_model();
    const Tensor no_perturbation({1, 1});
    PairSampler clean = [&](i64 pairs, std::uint64_t seed) {
        return model->sample_pairs(0, no_perturbation, pairs, seed);
    };
    auto enc = make_probe_encoder(model->output_shape(), 128, 128, 17);
    EncoderFitConfig fit;
    fit.iters = 600;
    fit.pairs = 48;
    fit.tau = 0.05;
    fit.lr = 3e-3;
    fit.beta1 = 0.5;
    fit.eval_batches = 8;
    const double loss = fit_encoder_to_pairs(*enc, clean, fit, 2024);
    // log(2K-1) = log(95) ~ 4.55 at chance level; matched pairs are easy.
    CHECK(loss >= 0.0);
    CHECK(loss < 0.5);
}

TEST_CASE("probe converges onto the target band and records the climb") {
    auto model = live_dead_model();
    ProbeConfig config = oracle_config();
    ProbeResult res = probe_level(*model, 0, config, 11);

    CHECK(res.status == ProbeStatus::converged);
    CHECK(res.level == 0);
    CHECK(res.warmup_curve.size() == 800);
    CHECK(res.loss_curve.size() == static_cast<size_t>(res.stop_step));
    CHECK(res.magnitude_curve.size() == res.loss_curve.size());

    // The game must actually play out: not an instant stop, not exhaustion.
    CHECK(res.stop_step > config.window);
    CHECK(res.stop_step < config.max_iters);

    // Converged means the trailing window mean sits inside the band.
    CHECK(std::abs(res.final_window_mean - 1.0) <= 0.05);
    CHECK(tail_mean(res.loss_curve, 100) ==
          doctest::Approx(res.final_window_mean));

    // Warmup settles the clean task far below the band; the game starts
    // there and climbs.
    CHECK(tail_mean(res.warmup_curve, 100) < 0.6);
    CHECK(mean_of(res.loss_curve, 0, 100) < 0.9);

    // The perturbation grows from near zero to a substantial magnitude.
    const double head_mag = mean_of(res.magnitude_curve, 0, 50);
    const double tail_mag = tail_mean(res.magnitude_curve, 50);
    CHECK(tail_mag > 3.0 * head_mag);
    CHECK(tail_mag > 0.08);
    CHECK(tail_mag < 0.9);

    // Replaying the recorded curve fires the stop rule exactly once, at the
    // recorded stop step.
    const auto fires = replay_fires(res.loss_curve, config.window,
                                    config.loss_target,
                                    config.resolved_tolerance());
    REQUIRE(fires.size() == 1);
    CHECK(fires[0] == res.stop_step);
}

TEST_CASE("a level with no influence degenerates with a frozen net") {
    auto model = live_dead_model();
    ProbeConfig config = oracle_config();
    config.warmup_iters = 500;
    config.max_iters = 200;
    ProbeResult res = probe_level(*model, 1, config, 13);

    CHECK(res.status == ProbeStatus::degenerate);
    CHECK(res.stop_step == config.max_iters);
    CHECK(res.loss_curve.size() == static_cast<size_t>(config.max_iters));

    // The dead channel never reaches the generated views, so the loss stays
    // pinned at the easy-task level, far below the target.
    CHECK(res.final_window_mean < 0.5);

    // Zero gradients leave the near-identity initialization untouched.
    double max_mag = 0.0;
    for (double m : res.magnitude_curve) max_mag = std::max(max_mag, m);
    CHECK(max_mag < 0.01);

    // The recorded curve never trips the stop rule.
    CHECK(replay_fires(res.loss_curve, config.window, config.loss_target,
                       config.resolved_tolerance())
              .empty());
}

TEST_CASE("a game that starts inside the band stops at the first window, "
          "reproducibly") {
    auto model = live_dead_model();
    ProbeConfig config = oracle_config();
    config.loss_target = 0.0;
    config.tolerance = 0.5;
    config.warmup_iters = 400;
    config.max_iters = 300;

    ProbeResult a = probe_level(*model, 0, config, 7);
    CHECK(a.status == ProbeStatus::converged);
    // Warmup already put the loss inside the explicit band, so the rule
    // fires as soon as one full window exists.
    CHECK(a.stop_step == config.window);
    CHECK(a.final_window_mean <= 0.5);
    CHECK(tail_mean(a.magnitude_curve, 50) < 0.02);

    ProbeResult b = probe_level(*model, 0, config, 7);
    CHECK(b.status == a.status);
    CHECK(b.stop_step == a.stop_step);
    CHECK(b.final_window_mean == a.final_window_mean);
    REQUIRE(b.warmup_curve == a.warmup_curve);
    REQUIRE(b.loss_curve == a.loss_curve);
    REQUIRE(b.magnitude_curve == a.magnitude_curve);

    auto pa = a.net.params();
    auto pb = b.net.params();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
        REQUIRE(pa[i]->value.numel() == pb[i]->value.numel());
        for (i64 j = 0; j < pa[i]->value.numel(); ++j)
            CHECK(pa[i]->value[j] == pb[i]->value[j]);
    }

    // A different seed draws different batches and lands elsewhere.
    ProbeResult c = probe_level(*model, 0, config, 8);
    CHECK(c.loss_curve != a.loss_curve);
}

TEST_CASE("stronger channels need smaller perturbations to reach the same "
          "target") {
    // Channel norms 4 and 1 in one model: both probes must converge onto the
    // same band, and the strong channel should get there with the smaller
    // perturbation.
    auto model = axis_model({4.0, 2.0, 1.0}, 4, 0.2);
    ProbeConfig config = oracle_config();
    config.pairs = 128;
    config.max_iters = 4000;

    ProbeResult strong = probe_level(*model, 0, config, 29);
    ProbeResult weak = probe_level(*model, 2, config, 29);

    REQUIRE(strong.status == ProbeStatus::converged);
    REQUIRE(weak.status == ProbeStatus::converged);
    CHECK(std::abs(strong.final_window_mean - 1.0) <= 0.05);
    CHECK(std::abs(weak.final_window_mean - 1.0) <= 0.05);

    const double mag_strong = tail_mean(strong.magnitude_curve, 100);
    const double mag_weak = tail_mean(weak.magnitude_curve, 100);
    CHECK(mag_strong < mag_weak);
    CHECK(mag_weak > 1.5 * mag_strong);
}

TEST_CASE("non-finite losses raise a training error") {
    // A subnormal temperature blows the logits up to +-inf, so the very
    // first loss comes out non-finite.
    auto model = axis_model({4.0, 4.0}, 3, 0.1);
    ProbeConfig config = oracle_config();
    config.tau = 1e-320;
    config.pairs = 8;
    config.warmup_iters = 2;
    config.window = 5;
    config.max_iters = 6;
    CHECK_THROWS_AS(probe_level(*model, 0, config, 1), TrainError);
}

TEST_CASE("probe validates level and config before running") {
    auto model = axis_model({4.0, 4.0}, 3, 0.1);
    ProbeConfig config = oracle_config();
    CHECK_THROWS_AS(probe_level(*model, -1, config, 1), ParamError);
    CHECK_THROWS_AS(probe_level(*model, 2, config, 1), ParamError);
    config.pairs = 1;
    CHECK_THROWS_AS(probe_level(*model, 0, config, 1), ParamError);
}
