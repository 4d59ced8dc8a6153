#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "latkit/core/tensor.hpp"

namespace latkit::gen {

// Symmetric truncated normal: mean, std, and half-width in std units.
struct TruncatedNormalParams {
    double mean = 0.0;
    double std = 1.0;
    double trunc = 2.0;
};

// Describes a generator's latent structure: one latent vector per level,
// injected at progressively deeper layers, optionally organized into
// contiguous ordered groups for reporting.
struct LatentSpec {
    i64 n_levels = 1;
    std::vector<i64> dims;                          // per-level latent widths
    std::vector<i64> group_sizes;                   // empty: one group per level
    std::vector<TruncatedNormalParams> anchor_dist; // per-level anchor sampler

    void validate() const;  // ParamError on violation
    i64 total_dim() const;
    // Expands group_sizes (or the default) into per-group [begin, end) level
    // ranges.
    std::vector<std::pair<i64, i64>> group_ranges() const;
};

// Draws `count` values with every component inside
// [mean - trunc*std, mean + trunc*std], by exact rejection (not clipping).
// Deterministic given seed.
Tensor sample_truncated_normal(const TruncatedNormalParams& params, i64 count,
                               std::uint64_t seed);

// A generator x = g(z_1..z_n). Latents pass level-wise through an internal
// mapping (identity unless a model defines one) before synthesis; exposing
// that seam lets perturbations target the mapped variables, which is where
// influence is measured. `seed` drives per-call stochastic elements such as
// observation noise; generation is pure in (latents, seed). backward_mapped
// uses state from the preceding generate_mapped call (single-writer).
class GeneratorHandle {
public:
    virtual ~GeneratorHandle() = default;

    const LatentSpec& spec() const { return spec_; }
    std::array<i64, 3> output_shape() const { return output_shape_; }

    // Compute device holding the generator's parameters and outputs. This
    // build is CPU-only; the hook exists so batch consumers can check
    // placement before accepting tensors.
    virtual std::string device() const { return "cpu"; }

    // Per-level internal mapping; z is (batch, dims[level]).
    virtual Tensor map_latent(i64 level, const Tensor& z) const;

    // Decodes mapped latents (list of (batch, dims[i]) tensors) into a
    // (batch, c, h, w) image tensor.
    virtual Tensor generate_mapped(const std::vector<Tensor>& mapped,
                                   std::uint64_t seed) = 0;

    // Gradient of the last generate_mapped output with respect to the chosen
    // level's mapped latent.
    virtual Tensor backward_mapped(i64 level, const Tensor& dx) = 0;

    // Convenience: map every level, then decode.
    Tensor generate(const std::vector<Tensor>& latents, std::uint64_t seed);

protected:
    GeneratorHandle(LatentSpec spec, std::array<i64, 3> output_shape);
    void check_latents(const std::vector<Tensor>& latents) const;

    LatentSpec spec_;
    std::array<i64, 3> output_shape_;
};

}  // namespace latkit::gen
