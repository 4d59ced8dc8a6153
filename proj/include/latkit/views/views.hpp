#pragma once

#include <cstdint>
#include <memory>
#include <utility>
#include <vector>

#include "latkit/core/tensor.hpp"
#include "latkit/gen/mlvgm.hpp"
#include "latkit/mc/report.hpp"
#include "latkit/probe/probe.hpp"

namespace latkit::views {

// Per-level positive-view strategy: share the anchor latent verbatim, add a
// truncated-normal draw, add a learned perturbation, or draw an independent
// fresh latent.
enum class Strategy { fixed, random, learned, resample };

const char* to_string(Strategy s);

struct LevelPlan {
    Strategy strategy = Strategy::fixed;
    gen::TruncatedNormalParams random_params;     // Strategy::random only
    std::shared_ptr<probe::PerturbationNet> net;  // Strategy::learned only
};

// One entry per latent level. An all-fixed plan is legal: the positive then
// differs from the anchor only by per-view generation noise.
struct PerturbationPlan {
    std::vector<LevelPlan> levels;

    // ParamError unless the plan matches the spec level-for-level: learned
    // entries need a net of the level's width, random entries valid
    // parameters.
    void validate(const gen::LatentSpec& spec) const;
    bool trivial() const;  // every level fixed
};

// z + w with w elementwise truncated normal; std = 0 degenerates to
// w = mean exactly. Shape preserved; deterministic given seed.
Tensor perturb_random(const Tensor& z,
                      const gen::TruncatedNormalParams& params,
                      std::uint64_t seed);

// z + p(z) for (batch, dim) z; ShapeError on width mismatch.
Tensor perturb_learned(const Tensor& z, probe::PerturbationNet& net);

// B anchor/positive image pairs, each (B, c, h, w). Anchor latents are drawn
// fresh per level from the generator's anchor distribution; positives share
// them bitwise except where the plan says otherwise. Perturbations act on
// raw latents before the generator's per-level mapping, and each view gets
// independent generation noise. Anchor draws, perturbation draws, and
// generation noise come from disjoint derived streams, so changing one
// never moves another.
std::pair<Tensor, Tensor> sample_view_batch(gen::GeneratorHandle& generator,
                                            const PerturbationPlan& plan,
                                            i64 batch, std::uint64_t seed);

// Single pair, shapes (1, c, h, w).
std::pair<Tensor, Tensor> make_view_pair(gen::GeneratorHandle& generator,
                                         const PerturbationPlan& plan,
                                         std::uint64_t seed);

// Derives a per-level random plan from report magnitudes: std_i =
// scale * mu_i with the given truncation, while degenerate levels switch to
// resample (no content influence, so fresh draws only add variety). Rows
// must cover levels 0..n-1. The mapping is assistive; plans remain
// user-editable configuration.
PerturbationPlan plan_from_report(const mc::MCReport& report, double scale,
                                  double trunc = 2.0);

struct PixelAugmentConfig {
    bool crop = false;
    i64 crop_size = 0;  // output side length; required when crop is on
    bool hflip = false;
    bool grayscale = false;
    bool color_jitter = false;

    void validate() const;  // ConfigError on violation
};

// The subset applied to generated views: crop and flip only.
PixelAugmentConfig ml_view_augments(i64 crop_size);

// Mirror the width axis of a (c, h, w) image.
Tensor flip_horizontal(const Tensor& image);

// Bilinear resize of a (c, h, w) image (half-pixel centers).
Tensor resize_bilinear(const Tensor& image, i64 out_h, i64 out_w);

// Randomized crop-resize / horizontal flip / grayscale / color jitter on a
// (c, h, w) image with values in [0, 1]; the output stays in [0, 1]. With
// every toggle off this is the identity. Deterministic given seed.
// ConfigError when the crop size exceeds the input.
Tensor pixel_augment(const Tensor& image, const PixelAugmentConfig& config,
                     std::uint64_t seed);

}  // namespace latkit::views
