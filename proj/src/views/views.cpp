#include "latkit/views/views.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "latkit/core/errors.hpp"
#include "latkit/core/rng.hpp"

namespace latkit::views {

namespace {

constexpr std::uint64_t kAnchorTag = 0x76616e63ull;
constexpr std::uint64_t kPerturbTag = 0x76707274ull;
constexpr std::uint64_t kNoiseTag = 0x766e6f69ull;
constexpr std::uint64_t kAugmentTag = 0x76617567ull;

gen::TruncatedNormalParams anchor_params(const gen::LatentSpec& spec,
                                         i64 level) {
    if (spec.anchor_dist.empty()) return {};
    return spec.anchor_dist[static_cast<size_t>(level)];
}

void check_image(const Tensor& image, const char* what) {
    if (image.rank() != 3)
        throw ShapeError(std::string(what) + ": (c, h, w) image expected");
}

// Luma mix of an RGB pixel triple.
double luma(double r, double g, double b) {
    return 0.299 * r + 0.587 * g + 0.114 * b;
}

}  // namespace

const char* to_string(Strategy s) {
    switch (s) {
        case Strategy::fixed: return "fixed";
        case Strategy::random: return "random";
        case Strategy::learned: return "learned";
        default: return "resample";
    }
}

void PerturbationPlan::validate(const gen::LatentSpec& spec) const {
    spec.validate();
    if (static_cast<i64>(levels.size()) != spec.n_levels)
        throw ParamError("PerturbationPlan: one entry per level expected");
    for (size_t i = 0; i < levels.size(); ++i) {
        const LevelPlan& lp = levels[i];
        const std::string at = " at level " + std::to_string(i);
        if (lp.strategy == Strategy::random) {
            if (lp.random_params.std < 0.0)
                throw ParamError("PerturbationPlan: negative std" + at);
            if (!(lp.random_params.trunc > 0.0))
                throw ParamError("PerturbationPlan: trunc must be > 0" + at);
        }
        if (lp.strategy == Strategy::learned) {
            if (!lp.net)
                throw ParamError("PerturbationPlan: missing net" + at);
            if (lp.net->dim() != spec.dims[i])
                throw ParamError("PerturbationPlan: net width mismatch" + at);
        }
    }
}

bool PerturbationPlan::trivial() const {
    for (const LevelPlan& lp : levels)
        if (lp.strategy != Strategy::fixed) return false;
    return true;
}

Tensor perturb_random(const Tensor& z,
                      const gen::TruncatedNormalParams& params,
                      std::uint64_t seed) {
    Tensor w(z.shape());
    fill_truncated_normal(w.data(), w.numel(), params.mean, params.std,
                          params.trunc, seed);
    Tensor out = z;
    for (i64 i = 0; i < out.numel(); ++i) out[i] += w[i];
    return out;
}

Tensor perturb_learned(const Tensor& z, probe::PerturbationNet& net) {
    if (z.rank() != 2 || z.dim(1) != net.dim())
        throw ShapeError("perturb_learned: (batch, " +
                         std::to_string(net.dim()) + ") latents expected");
    return net.transform(z, false);
}

std::pair<Tensor, Tensor> sample_view_batch(gen::GeneratorHandle& generator,
                                            const PerturbationPlan& plan,
                                            i64 batch, std::uint64_t seed) {
    const gen::LatentSpec& spec = generator.spec();
    plan.validate(spec);
    if (batch < 0) throw ParamError("sample_view_batch: batch must be >= 0");
    const auto shape = generator.output_shape();
    if (batch == 0) {
        Tensor empty({0, shape[0], shape[1], shape[2]});
        return {empty, empty};
    }

    std::vector<Tensor> anchor_mapped, positive_mapped;
    for (i64 j = 0; j < spec.n_levels; ++j) {
        const i64 m = spec.dims[static_cast<size_t>(j)];
        const gen::TruncatedNormalParams ap = anchor_params(spec, j);
        Tensor z({batch, m});
        fill_truncated_normal(
            z.data(), z.numel(), ap.mean, ap.std, ap.trunc,
            seed_mix({seed, kAnchorTag, static_cast<std::uint64_t>(j)}));

        const LevelPlan& lp = plan.levels[static_cast<size_t>(j)];
        const std::uint64_t pseed =
            seed_mix({seed, kPerturbTag, static_cast<std::uint64_t>(j)});
        Tensor zp;
        switch (lp.strategy) {
            case Strategy::fixed: zp = z; break;
            case Strategy::random:
                zp = perturb_random(z, lp.random_params, pseed);
                break;
            case Strategy::learned:
                zp = perturb_learned(z, *lp.net);
                break;
            default:  // resample: an independent fresh draw
                zp = Tensor({batch, m});
                fill_truncated_normal(zp.data(), zp.numel(), ap.mean, ap.std,
                                      ap.trunc, pseed);
        }
        anchor_mapped.push_back(generator.map_latent(j, z));
        positive_mapped.push_back(generator.map_latent(j, zp));
    }
    Tensor anchor =
        generator.generate_mapped(anchor_mapped, seed_mix({seed, kNoiseTag, 0}));
    Tensor positive = generator.generate_mapped(positive_mapped,
                                                seed_mix({seed, kNoiseTag, 1}));
    return {std::move(anchor), std::move(positive)};
}

std::pair<Tensor, Tensor> make_view_pair(gen::GeneratorHandle& generator,
                                         const PerturbationPlan& plan,
                                         std::uint64_t seed) {
    return sample_view_batch(generator, plan, 1, seed);
}

PerturbationPlan plan_from_report(const mc::MCReport& report, double scale,
                                  double trunc) {
    report.validate();
    if (!(scale > 0.0))
        throw ParamError("plan_from_report: scale must be > 0");
    if (!(trunc > 0.0))
        throw ParamError("plan_from_report: trunc must be > 0");
    PerturbationPlan plan;
    for (size_t i = 0; i < report.rows.size(); ++i) {
        const mc::MCRow& row = report.rows[i];
        if (row.level != static_cast<i64>(i))
            throw SchemaError("plan_from_report: rows must cover levels 0..n-1");
        LevelPlan lp;
        if (row.status == "degenerate") {
            lp.strategy = Strategy::resample;
        } else {
            lp.strategy = Strategy::random;
            lp.random_params = {0.0, scale * row.mu, trunc};
        }
        plan.levels.push_back(std::move(lp));
    }
    return plan;
}

void PixelAugmentConfig::validate() const {
    if (crop && crop_size < 1)
        throw ConfigError("views.crop_size",
                          "pixel augment: crop requires a positive crop_size");
}

PixelAugmentConfig ml_view_augments(i64 crop_size) {
    PixelAugmentConfig c;
    c.crop = true;
    c.crop_size = crop_size;
    c.hflip = true;
    c.validate();
    return c;
}

Tensor flip_horizontal(const Tensor& image) {
    check_image(image, "flip_horizontal");
    const i64 c = image.dim(0), h = image.dim(1), w = image.dim(2);
    Tensor out(image.shape());
    for (i64 ch = 0; ch < c; ++ch)
        for (i64 y = 0; y < h; ++y)
            for (i64 x = 0; x < w; ++x)
                out[(ch * h + y) * w + x] = image[(ch * h + y) * w + (w - 1 - x)];
    return out;
}

Tensor resize_bilinear(const Tensor& image, i64 out_h, i64 out_w) {
    check_image(image, "resize_bilinear");
    if (out_h < 1 || out_w < 1)
        throw ParamError("resize_bilinear: output must be at least 1x1");
    const i64 c = image.dim(0), h = image.dim(1), w = image.dim(2);
    Tensor out({c, out_h, out_w});
    const double sy = static_cast<double>(h) / static_cast<double>(out_h);
    const double sx = static_cast<double>(w) / static_cast<double>(out_w);
    for (i64 ch = 0; ch < c; ++ch) {
        const double* src = image.data() + ch * h * w;
        double* dst = out.data() + ch * out_h * out_w;
        for (i64 y = 0; y < out_h; ++y) {
            const double fy =
                std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(h - 1));
            const i64 y0 = static_cast<i64>(fy);
            const i64 y1 = std::min(y0 + 1, h - 1);
            const double wy = fy - static_cast<double>(y0);
            for (i64 x = 0; x < out_w; ++x) {
                const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0,
                                             static_cast<double>(w - 1));
                const i64 x0 = static_cast<i64>(fx);
                const i64 x1 = std::min(x0 + 1, w - 1);
                const double wx = fx - static_cast<double>(x0);
                const double top =
                    src[y0 * w + x0] * (1.0 - wx) + src[y0 * w + x1] * wx;
                const double bot =
                    src[y1 * w + x0] * (1.0 - wx) + src[y1 * w + x1] * wx;
                dst[y * out_w + x] = top * (1.0 - wy) + bot * wy;
            }
        }
    }
    return out;
}

namespace {

// Crop-box sampling in the usual area/aspect fashion; falls back to a
// centered square when ten attempts fail.
Tensor random_resized_crop(const Tensor& image, i64 out_size, Rng& rng) {
    const i64 h = image.dim(1), w = image.dim(2);
    i64 top = 0, left = 0, ch = h, cw = w;
    bool found = false;
    for (int attempt = 0; attempt < 10 && !found; ++attempt) {
        const double area =
            rng.uniform(0.2, 1.0) * static_cast<double>(h * w);
        const double log_ratio = rng.uniform(std::log(3.0 / 4.0),
                                             std::log(4.0 / 3.0));
        const double ratio = std::exp(log_ratio);
        const i64 tw = static_cast<i64>(std::lround(std::sqrt(area * ratio)));
        const i64 th = static_cast<i64>(std::lround(std::sqrt(area / ratio)));
        if (tw >= 1 && th >= 1 && tw <= w && th <= h) {
            top = rng.index(h - th + 1);
            left = rng.index(w - tw + 1);
            ch = th;
            cw = tw;
            found = true;
        }
    }
    if (!found) {  // centered square fallback
        const i64 side = std::min(h, w);
        top = (h - side) / 2;
        left = (w - side) / 2;
        ch = cw = side;
    }
    const i64 c = image.dim(0);
    Tensor box({c, ch, cw});
    for (i64 chn = 0; chn < c; ++chn)
        for (i64 y = 0; y < ch; ++y)
            std::memcpy(box.data() + (chn * ch + y) * cw,
                        image.data() + (chn * h + (top + y)) * w + left,
                        static_cast<size_t>(cw) * sizeof(double));
    return resize_bilinear(box, out_size, out_size);
}

void apply_grayscale(Tensor& image) {
    const i64 h = image.dim(1), w = image.dim(2);
    for (i64 i = 0; i < h * w; ++i) {
        const double g =
            luma(image[i], image[h * w + i], image[2 * h * w + i]);
        image[i] = g;
        image[h * w + i] = g;
        image[2 * h * w + i] = g;
    }
}

void apply_color_jitter(Tensor& image, Rng& rng) {
    const i64 c = image.dim(0), n = image.numel();
    const double brightness = rng.uniform(0.6, 1.4);
    for (i64 i = 0; i < n; ++i) image[i] *= brightness;

    const double contrast = rng.uniform(0.6, 1.4);
    long double mean = 0.0L;
    for (i64 i = 0; i < n; ++i) mean += image[i];
    const double m = static_cast<double>(mean / n);
    for (i64 i = 0; i < n; ++i) image[i] = m + (image[i] - m) * contrast;

    if (c == 3) {
        const double saturation = rng.uniform(0.6, 1.4);
        const i64 hw = image.dim(1) * image.dim(2);
        for (i64 i = 0; i < hw; ++i) {
            const double g =
                luma(image[i], image[hw + i], image[2 * hw + i]);
            image[i] = g + (image[i] - g) * saturation;
            image[hw + i] = g + (image[hw + i] - g) * saturation;
            image[2 * hw + i] = g + (image[2 * hw + i] - g) * saturation;
        }
    }
}

}  // namespace

Tensor pixel_augment(const Tensor& image, const PixelAugmentConfig& config,
                     std::uint64_t seed) {
    config.validate();
    check_image(image, "pixel_augment");
    if (config.crop &&
        (config.crop_size > image.dim(1) || config.crop_size > image.dim(2)))
        throw ConfigError("views.crop_size",
                          "pixel augment: crop exceeds the input");

    Rng rng(seed_mix({seed, kAugmentTag}));
    Tensor out = image;
    bool touched = false;
    if (config.crop) {
        out = random_resized_crop(out, config.crop_size, rng);
        touched = true;
    }
    if (config.hflip && rng.uniform01() < 0.5) {
        out = flip_horizontal(out);
    }
    if (config.grayscale && out.dim(0) == 3 && rng.uniform01() < 0.2) {
        apply_grayscale(out);
        touched = true;
    }
    if (config.color_jitter && rng.uniform01() < 0.8) {
        apply_color_jitter(out, rng);
        touched = true;
    }
    if (touched)
        for (i64 i = 0; i < out.numel(); ++i)
            out[i] = std::clamp(out[i], 0.0, 1.0);
    return out;
}

}  // namespace latkit::views
