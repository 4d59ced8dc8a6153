#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "latkit/core/tensor.hpp"
#include "latkit/gen/mlvgm.hpp"
#include "latkit/mi/infonce.hpp"
#include "latkit/nn/layers.hpp"

namespace latkit::probe {

// Additive residual perturbation of one latent level: p(z) is a two-layer
// perceptron and the induced transform is T(z) = z + p(z). Fresh nets start
// near the identity (see init_identity), so training grows the perturbation
// from approximately zero.
class PerturbationNet {
public:
    PerturbationNet(i64 dim, i64 hidden, std::uint64_t seed);

    i64 dim() const { return dim_; }
    i64 hidden() const { return hidden_; }

    // p(z) for z of shape (batch, dim).
    Tensor perturbation(const Tensor& z, bool train);
    // T(z) = z + p(z).
    Tensor transform(const Tensor& z, bool train);
    // Gradient wrt p's output; accumulates parameter gradients and returns
    // the input gradient through the p branch only (the skip path is the
    // caller's).
    Tensor backward(const Tensor& dp);

    std::vector<nn::Param*> params();
    nn::Layer& net() { return net_; }

private:
    i64 dim_, hidden_;
    nn::Sequential net_;
};

// Reinitializes the net near the identity map: weights ~ N(0, 0.01),
// biases ~ U(-0.001, 0.001), making T(z) ~ z for anchor-scaled inputs.
void init_identity(PerturbationNet& net, std::uint64_t seed);

enum class ProbeStatus { converged, degenerate };

// "converged" or "degenerate".
const char* to_string(ProbeStatus status);

// Settings for the two-player probe: a perturbation net pushes the
// contrastive loss up toward loss_target while a fresh encoder pulls it
// down; training stops when the running mean of the loss sits within
// tolerance of the target.
struct ProbeConfig {
    double loss_target = 1.0;
    double tolerance = -1.0;   // stop band half-width; < 0 means 0.05 * loss_target
    i64 pairs = 64;            // anchor pairs per step (2*pairs views)
    double tau = 0.1;
    double encoder_lr = 1e-3;
    double net_lr = -1.0;      // < 0 means 10 * encoder_lr
    double beta1 = 0.5;        // Adam moments, both players
    double beta2 = 0.999;
    i64 max_iters = 20000;
    i64 window = 100;          // running-mean window for the stop rule
    i64 warmup_iters = 200;    // encoder-only steps before the game starts
    i64 encoder_hidden = 128;  // encoder width (see make_probe_encoder)
    i64 embed_dim = 128;
    i64 net_hidden = 64;       // perturbation-net hidden width

    // ParamError on violation. loss_target = 0 is allowed only with an
    // explicitly positive tolerance (the default band scales with the
    // target, which degenerates at zero).
    void validate() const;
    double resolved_tolerance() const;
    double resolved_net_lr() const;
};

struct ProbeResult {
    ProbeStatus status;
    i64 level;
    std::vector<double> warmup_curve;     // encoder-only losses, pre-game
    std::vector<double> loss_curve;       // one loss per game iteration
    std::vector<double> magnitude_curve;  // mean ||p(z)||_2 per game iteration
    i64 stop_step;                        // game iterations executed = curve length
    double final_window_mean;
    PerturbationNet net;
};

// True iff |mean(loss_window) - target| <= tolerance. The window is the most
// recent stretch of per-iteration losses; ParamError on an empty window.
bool stop_criterion(const std::vector<double>& loss_window, double target,
                    double tolerance);

// Fresh projection encoder matched to a generator's output shape: a small
// strided conv stack ending in a linear projection to embed_dim. hidden/8
// (min 4) sets the base channel count, so one knob scales capacity.
std::unique_ptr<mi::ProjectionEncoder> make_probe_encoder(
    std::array<i64, 3> output_shape, i64 hidden, i64 embed_dim,
    std::uint64_t seed);

// Maps (pair count, seed) to an (anchors, positives) image-batch pair drawn
// from some fixed view distribution.
using PairSampler =
    std::function<std::pair<Tensor, Tensor>(i64, std::uint64_t)>;

struct EncoderFitConfig {
    i64 iters = 1000;
    i64 pairs = 64;
    double tau = 0.1;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    i64 eval_batches = 16;

    void validate() const;  // ParamError on violation
};

// Trains the encoder alone to minimize the contrastive loss on sampled view
// pairs (the inner player of the probe, with the view distribution frozen);
// returns the mean loss over eval_batches fresh batches.
double fit_encoder_to_pairs(mi::ProjectionEncoder& encoder,
                            const PairSampler& sample,
                            const EncoderFitConfig& config,
                            std::uint64_t seed);

// Runs the alternating two-player game for one latent level. First
// warmup_iters encoder-only steps settle the encoder on the unperturbed
// task (recorded in warmup_curve); then per game iteration the encoder
// takes one minimizing step and the perturbation net one maximizing step,
// each on a freshly sampled anchor batch. Views share all latents; the
// probed level's mapped latent is additionally passed through
// T(z) = z + p(z) in the second view, and per-view generation noise is
// independent. Stops once the stop criterion fires on the trailing window
// of game losses (status converged) or at max_iters (status degenerate).
// Non-finite loss raises TrainError.
ProbeResult probe_level(gen::GeneratorHandle& generator, i64 level,
                        const ProbeConfig& config, std::uint64_t seed);

}  // namespace latkit::probe
