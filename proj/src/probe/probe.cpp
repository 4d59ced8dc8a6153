#include "latkit/probe/probe.hpp"

#include <cmath>
#include <cstring>
#include <numeric>

#include "latkit/core/errors.hpp"
#include "latkit/core/rng.hpp"
#include "latkit/mi/infonce.hpp"
#include "latkit/nn/optim.hpp"

namespace latkit::probe {

namespace {

// Seed-stream tags: every random draw inside a probe run hangs off
// (seed, tag, ...) so runs are reproducible and streams never collide.
constexpr std::uint64_t kEncInitTag = 0x70656e63;  // encoder init
constexpr std::uint64_t kNetInitTag = 0x706e6574;  // perturbation-net init
constexpr std::uint64_t kAnchorTag = 0x70616e63;   // anchor batches
constexpr std::uint64_t kViewTag = 0x70766965;     // per-view generation noise
constexpr std::uint64_t kFitTag = 0x70666974;      // encoder-only fitting

Tensor vstack(const Tensor& a, const Tensor& b) {
    if (a.rank() != b.rank()) throw ShapeError("vstack: rank mismatch");
    for (i64 i = 1; i < a.rank(); ++i)
        if (a.dim(i) != b.dim(i)) throw ShapeError("vstack: trailing dims differ");
    std::vector<i64> shape = a.shape();
    shape[0] = a.dim(0) + b.dim(0);
    Tensor out(shape);
    std::memcpy(out.data(), a.data(), sizeof(double) * a.numel());
    std::memcpy(out.data() + a.numel(), b.data(), sizeof(double) * b.numel());
    return out;
}

Tensor rows_from(const Tensor& x, i64 begin, i64 count) {
    std::vector<i64> shape = x.shape();
    shape[0] = count;
    Tensor out(shape);
    const i64 stride = x.numel() / x.dim(0);
    std::memcpy(out.data(), x.data() + begin * stride,
                sizeof(double) * count * stride);
    return out;
}

gen::TruncatedNormalParams anchor_params(const gen::LatentSpec& spec, i64 level) {
    if (spec.anchor_dist.empty()) return gen::TruncatedNormalParams{};
    return spec.anchor_dist[level];
}

struct ViewBatch {
    Tensor clean;      // (pairs, c, h, w)
    Tensor perturbed;  // (pairs, c, h, w); generated last (backward state)
    double mean_perturbation;
};

// One anchor batch -> the two views of the probe game. All levels share
// identical latents; the probed level's mapped latent additionally runs
// through T in the perturbed view. The perturbed view is generated last so
// the generator's backward state refers to it.
ViewBatch build_views(gen::GeneratorHandle& g, PerturbationNet& net, i64 level,
                      i64 pairs, std::uint64_t seed, i64 iter, i64 phase) {
    const auto& spec = g.spec();
    std::vector<Tensor> mapped(spec.n_levels);
    for (i64 j = 0; j < spec.n_levels; ++j) {
        const std::uint64_t s = seed_mix({seed, kAnchorTag, (std::uint64_t)iter,
                                          (std::uint64_t)phase, (std::uint64_t)j});
        Tensor z = gen::sample_truncated_normal(anchor_params(spec, j),
                                                pairs * spec.dims[j], s)
                       .reshaped({pairs, spec.dims[j]});
        mapped[j] = g.map_latent(j, z);
    }

    Tensor p = net.perturbation(mapped[level], /*train=*/true);
    long double mag = 0.0L;
    for (i64 r = 0; r < pairs; ++r) {
        double sq = 0.0;
        for (i64 c = 0; c < p.dim(1); ++c) sq += p.at(r, c) * p.at(r, c);
        mag += std::sqrt(sq);
    }

    std::vector<Tensor> mapped_pert = mapped;
    Tensor t(mapped[level].shape());
    for (i64 i = 0; i < t.numel(); ++i)
        t[i] = mapped[level][i] + p[i];
    mapped_pert[level] = std::move(t);

    ViewBatch out;
    out.mean_perturbation = (double)(mag / (long double)pairs);
    out.clean = g.generate_mapped(
        mapped, seed_mix({seed, kViewTag, (std::uint64_t)iter,
                          (std::uint64_t)phase, 0}));
    out.perturbed = g.generate_mapped(
        mapped_pert, seed_mix({seed, kViewTag, (std::uint64_t)iter,
                               (std::uint64_t)phase, 1}));
    return out;
}

// Embeds both views in one forward pass (the encoder keeps only its latest
// stash), computes the contrastive loss, and leaves the split input
// gradient for whichever player is updating.
struct GameStep {
    double loss;
    Tensor dclean;
    Tensor dperturbed;
};

GameStep game_step(mi::ProjectionEncoder& enc, const ViewBatch& views,
                   double tau, bool need_input_grad) {
    const i64 pairs = views.clean.dim(0);
    Tensor ecat = enc.embed(vstack(views.clean, views.perturbed), true);
    mi::InfoNCEBatch batch{rows_from(ecat, 0, pairs),
                           rows_from(ecat, pairs, pairs), tau};
    mi::InfoNCEGrad grad = mi::infonce_loss_grad(batch);
    GameStep out;
    out.loss = grad.loss;
    Tensor dx = enc.backward(vstack(grad.danchors, grad.dpositives));
    if (need_input_grad) {
        out.dclean = rows_from(dx, 0, pairs);
        out.dperturbed = rows_from(dx, pairs, pairs);
    }
    return out;
}

void check_finite(double loss, i64 iter) {
    if (!std::isfinite(loss))
        throw TrainError("probe: non-finite loss at iteration " +
                         std::to_string(iter));
}

double window_mean(const std::vector<double>& curve, i64 window) {
    const i64 n = (i64)curve.size();
    const i64 w = window < n ? window : n;
    long double sum = 0.0L;
    for (i64 i = n - w; i < n; ++i) sum += curve[i];
    return (double)(sum / (long double)w);
}

}  // namespace

PerturbationNet::PerturbationNet(i64 dim, i64 hidden, std::uint64_t seed)
    : dim_(dim), hidden_(hidden) {
    if (dim < 1) throw ParamError("PerturbationNet: dim must be >= 1");
    if (hidden < 1) throw ParamError("PerturbationNet: hidden must be >= 1");
    Rng rng(seed);
    net_.emplace<nn::Dense>("perturb.fc1", dim, hidden, rng);
    net_.emplace<nn::ReLU>();
    net_.emplace<nn::Dense>("perturb.fc2", hidden, dim, rng);
    init_identity(*this, seed);
}

Tensor PerturbationNet::perturbation(const Tensor& z, bool train) {
    if (z.rank() != 2 || z.dim(1) != dim_)
        throw ShapeError("PerturbationNet: input must be (batch, dim)");
    return net_.forward(z, train);
}

Tensor PerturbationNet::transform(const Tensor& z, bool train) {
    Tensor p = perturbation(z, train);
    Tensor out(z.shape());
    for (i64 i = 0; i < out.numel(); ++i) out[i] = z[i] + p[i];
    return out;
}

Tensor PerturbationNet::backward(const Tensor& dp) { return net_.backward(dp); }

std::vector<nn::Param*> PerturbationNet::params() { return nn::parameters(net_); }

void init_identity(PerturbationNet& net, std::uint64_t seed) {
    Rng rng(seed_mix({seed, kNetInitTag}));
    for (nn::Param* p : net.params()) {
        const bool is_weight =
            p->name.size() >= 2 && p->name.rfind(".w") == p->name.size() - 2;
        for (i64 i = 0; i < p->value.numel(); ++i)
            p->value[i] = is_weight ? 0.01 * rng.normal()
                                    : rng.uniform(-0.001, 0.001);
        for (i64 i = 0; i < p->grad.numel(); ++i) p->grad[i] = 0.0;
    }
}

const char* to_string(ProbeStatus status) {
    return status == ProbeStatus::converged ? "converged" : "degenerate";
}

void ProbeConfig::validate() const {
    if (loss_target < 0.0)
        throw ParamError("ProbeConfig: loss_target must be >= 0");
    if (loss_target == 0.0 && tolerance <= 0.0)
        throw ParamError(
            "ProbeConfig: loss_target 0 needs an explicit positive tolerance");
    if (tolerance == 0.0)
        throw ParamError("ProbeConfig: tolerance must be positive (or < 0 for default)");
    if (pairs < 2) throw ParamError("ProbeConfig: pairs must be >= 2");
    if (!(tau > 0.0)) throw ParamError("ProbeConfig: tau must be > 0");
    if (!(encoder_lr > 0.0)) throw ParamError("ProbeConfig: encoder_lr must be > 0");
    if (net_lr == 0.0) throw ParamError("ProbeConfig: net_lr must be positive (or < 0 for default)");
    if (window < 1) throw ParamError("ProbeConfig: window must be >= 1");
    if (max_iters <= window)
        throw ParamError("ProbeConfig: max_iters must exceed window");
    if (warmup_iters < 0) throw ParamError("ProbeConfig: warmup_iters must be >= 0");
    if (encoder_hidden < 1 || embed_dim < 1 || net_hidden < 1)
        throw ParamError("ProbeConfig: layer widths must be >= 1");
}

double ProbeConfig::resolved_tolerance() const {
    return tolerance < 0.0 ? 0.05 * loss_target : tolerance;
}

double ProbeConfig::resolved_net_lr() const {
    return net_lr < 0.0 ? 10.0 * encoder_lr : net_lr;
}

bool stop_criterion(const std::vector<double>& loss_window, double target,
                    double tolerance) {
    if (loss_window.empty())
        throw ParamError("stop_criterion: empty loss window");
    long double sum = 0.0L;
    for (double v : loss_window) sum += v;
    const double mean = (double)(sum / (long double)loss_window.size());
    return std::fabs(mean - target) <= tolerance;
}

std::unique_ptr<mi::ProjectionEncoder> make_probe_encoder(
    std::array<i64, 3> output_shape, i64 hidden, i64 embed_dim,
    std::uint64_t seed) {
    if (hidden < 1) throw ParamError("make_probe_encoder: hidden must be >= 1");
    if (embed_dim < 1) throw ParamError("make_probe_encoder: embed_dim must be >= 1");
    const i64 c = output_shape[0];
    Rng rng(seed_mix({seed, kEncInitTag}));
    auto net = std::make_unique<nn::Sequential>();
    // Strided 3x3 convs degrade gracefully on thin inputs (a 1 x d row still
    // mixes neighbors along d), so one architecture serves images and flat
    // oracle outputs alike. hidden/8 (min 4) sets the base channel count.
    const i64 base = hidden / 8 < 4 ? 4 : hidden / 8;
    net->emplace<nn::Conv2d>("enc.conv1", c, base, 3, 2, 1, rng);
    net->emplace<nn::ReLU>();
    net->emplace<nn::Conv2d>("enc.conv2", base, 2 * base, 3, 2, 1, rng);
    net->emplace<nn::ReLU>();
    net->emplace<nn::GlobalAvgPool>();
    net->emplace<nn::Dense>("enc.proj", 2 * base, embed_dim, rng);
    return std::make_unique<mi::ProjectionEncoder>(std::move(net), embed_dim);
}

void EncoderFitConfig::validate() const {
    if (iters < 1) throw ParamError("EncoderFitConfig: iters must be >= 1");
    if (pairs < 2) throw ParamError("EncoderFitConfig: pairs must be >= 2");
    if (!(tau > 0.0)) throw ParamError("EncoderFitConfig: tau must be > 0");
    if (!(lr > 0.0)) throw ParamError("EncoderFitConfig: lr must be > 0");
    if (eval_batches < 1)
        throw ParamError("EncoderFitConfig: eval_batches must be >= 1");
}

double fit_encoder_to_pairs(mi::ProjectionEncoder& encoder,
                            const PairSampler& sample,
                            const EncoderFitConfig& config,
                            std::uint64_t seed) {
    config.validate();
    nn::Adam opt(nn::parameters(encoder.net()),
                 {config.beta1, config.beta2, 1e-8, 0.0});
    for (i64 it = 0; it < config.iters; ++it) {
        auto [anchors, positives] =
            sample(config.pairs, seed_mix({seed, kFitTag, (std::uint64_t)it}));
        const i64 pairs = anchors.dim(0);
        Tensor ecat = encoder.embed(vstack(anchors, positives), true);
        mi::InfoNCEBatch batch{rows_from(ecat, 0, pairs),
                               rows_from(ecat, pairs, pairs), config.tau};
        mi::InfoNCEGrad grad = mi::infonce_loss_grad(batch);
        check_finite(grad.loss, it);
        opt.zero_grad();
        encoder.backward(vstack(grad.danchors, grad.dpositives));
        opt.step(config.lr);
    }
    long double sum = 0.0L;
    for (i64 e = 0; e < config.eval_batches; ++e) {
        auto [anchors, positives] = sample(
            config.pairs, seed_mix({seed, kFitTag, 0x6576616c, (std::uint64_t)e}));
        const i64 pairs = anchors.dim(0);
        Tensor ecat = encoder.embed(vstack(anchors, positives), false);
        sum += mi::infonce_loss({rows_from(ecat, 0, pairs),
                                 rows_from(ecat, pairs, pairs), config.tau});
    }
    return (double)(sum / (long double)config.eval_batches);
}

ProbeResult probe_level(gen::GeneratorHandle& generator, i64 level,
                        const ProbeConfig& config, std::uint64_t seed) {
    config.validate();
    const auto& spec = generator.spec();
    if (level < 0 || level >= spec.n_levels)
        throw ParamError("probe_level: level out of range");
    const double tol = config.resolved_tolerance();
    const double net_lr = config.resolved_net_lr();

    PerturbationNet net(spec.dims[level], config.net_hidden, seed);
    auto encoder = make_probe_encoder(generator.output_shape(),
                                      config.encoder_hidden, config.embed_dim,
                                      seed);
    nn::Adam opt_enc(nn::parameters(encoder->net()),
                     {config.beta1, config.beta2, 1e-8, 0.0});
    nn::Adam opt_net(net.params(), {config.beta1, config.beta2, 1e-8, 0.0});

    std::vector<double> warmup, losses, magnitudes;
    warmup.reserve(config.warmup_iters);
    losses.reserve(config.max_iters);
    magnitudes.reserve(config.max_iters);
    std::vector<double> window((size_t)config.window);
    bool converged = false;

    // Phase 1: encoder-only steps settle the unperturbed task. These losses
    // stay out of the stop window — the rule watches the game climb toward
    // the target, not the warmup descent through it.
    for (i64 iter = 0; iter < config.warmup_iters; ++iter) {
        ViewBatch views =
            build_views(generator, net, level, config.pairs, seed, iter, 2);
        GameStep step = game_step(*encoder, views, config.tau, false);
        check_finite(step.loss, iter);
        opt_enc.step(config.encoder_lr);
        opt_enc.zero_grad();
        warmup.push_back(step.loss);
    }

    // Phase 2: the alternating game.
    for (i64 iter = 0; iter < config.max_iters; ++iter) {
        // Encoder half-step: minimize the loss with the perturbation frozen.
        {
            ViewBatch views =
                build_views(generator, net, level, config.pairs, seed, iter, 0);
            GameStep step = game_step(*encoder, views, config.tau, false);
            check_finite(step.loss, iter);
            opt_enc.step(config.encoder_lr);
            opt_enc.zero_grad();
        }

        // Perturbation half-step: ascend the loss through the second view.
        {
            ViewBatch views =
                build_views(generator, net, level, config.pairs, seed, iter, 1);
            GameStep step = game_step(*encoder, views, config.tau, true);
            check_finite(step.loss, iter);
            opt_enc.zero_grad();  // scratch gradients from this half
            Tensor dmapped = generator.backward_mapped(level, step.dperturbed);
            opt_net.zero_grad();
            net.backward(dmapped);
            for (nn::Param* p : net.params())
                for (i64 i = 0; i < p->grad.numel(); ++i) p->grad[i] = -p->grad[i];
            opt_net.step(net_lr);
            losses.push_back(step.loss);
            magnitudes.push_back(views.mean_perturbation);
        }

        if ((i64)losses.size() >= config.window) {
            std::copy(losses.end() - config.window, losses.end(), window.begin());
            if (stop_criterion(window, config.loss_target, tol)) {
                converged = true;
                break;
            }
        }
    }

    const i64 executed = (i64)losses.size();
    const double final_mean = window_mean(losses, config.window);
    return ProbeResult{converged ? ProbeStatus::converged
                                 : ProbeStatus::degenerate,
                       level,
                       std::move(warmup),
                       std::move(losses),
                       std::move(magnitudes),
                       executed,
                       final_mean,
                       std::move(net)};
}

}  // namespace latkit::probe
