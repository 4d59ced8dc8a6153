#include "latkit/gen/mlvgm.hpp"

#include <numeric>

#include "latkit/core/errors.hpp"
#include "latkit/core/rng.hpp"

namespace latkit::gen {

void LatentSpec::validate() const {
    if (n_levels < 1) throw ParamError("LatentSpec: n_levels must be >= 1");
    if (static_cast<i64>(dims.size()) != n_levels)
        throw ParamError("LatentSpec: dims must list one width per level");
    for (i64 d : dims)
        if (d < 1) throw ParamError("LatentSpec: every latent width must be >= 1");
    if (!group_sizes.empty()) {
        i64 sum = 0;
        for (i64 g : group_sizes) {
            if (g < 1) throw ParamError("LatentSpec: group sizes must be >= 1");
            sum += g;
        }
        if (sum != n_levels)
            throw ParamError("LatentSpec: group sizes must partition the levels");
    }
    if (!anchor_dist.empty() &&
        static_cast<i64>(anchor_dist.size()) != n_levels)
        throw ParamError("LatentSpec: anchor_dist must be empty or per-level");
    for (const auto& a : anchor_dist) {
        if (!(a.std > 0.0)) throw ParamError("LatentSpec: anchor std must be > 0");
        if (!(a.trunc > 0.0)) throw ParamError("LatentSpec: anchor trunc must be > 0");
    }
}

i64 LatentSpec::total_dim() const {
    return std::accumulate(dims.begin(), dims.end(), i64{0});
}

std::vector<std::pair<i64, i64>> LatentSpec::group_ranges() const {
    std::vector<std::pair<i64, i64>> out;
    if (group_sizes.empty()) {
        for (i64 i = 0; i < n_levels; ++i) out.emplace_back(i, i + 1);
        return out;
    }
    i64 begin = 0;
    for (i64 g : group_sizes) {
        out.emplace_back(begin, begin + g);
        begin += g;
    }
    return out;
}

Tensor sample_truncated_normal(const TruncatedNormalParams& params, i64 count,
                               std::uint64_t seed) {
    if (count < 0) throw ParamError("sample_truncated_normal: count must be >= 0");
    if (!(params.std > 0.0))
        throw ParamError("sample_truncated_normal: std must be > 0");
    if (!(params.trunc > 0.0))
        throw ParamError("sample_truncated_normal: trunc must be > 0");
    Tensor out({count});
    fill_truncated_normal(out.data(), count, params.mean, params.std, params.trunc,
                          seed);
    return out;
}

GeneratorHandle::GeneratorHandle(LatentSpec spec, std::array<i64, 3> output_shape)
    : spec_(std::move(spec)), output_shape_(output_shape) {
    spec_.validate();
    for (i64 d : output_shape_)
        if (d < 1) throw ParamError("GeneratorHandle: output dims must be >= 1");
}

Tensor GeneratorHandle::map_latent(i64 level, const Tensor& z) const {
    if (level < 0 || level >= spec_.n_levels)
        throw ParamError("map_latent: level out of range");
    if (z.rank() != 2 || z.dim(1) != spec_.dims[static_cast<size_t>(level)])
        throw ShapeError("map_latent: latent width mismatch");
    return z;
}

void GeneratorHandle::check_latents(const std::vector<Tensor>& latents) const {
    if (static_cast<i64>(latents.size()) != spec_.n_levels)
        throw ShapeError("generate: expected one latent tensor per level");
    for (i64 i = 0; i < spec_.n_levels; ++i) {
        const Tensor& z = latents[static_cast<size_t>(i)];
        if (z.rank() != 2 || z.dim(1) != spec_.dims[static_cast<size_t>(i)])
            throw ShapeError("generate: latent width mismatch at a level");
        if (z.dim(0) != latents[0].dim(0))
            throw ShapeError("generate: inconsistent batch size across levels");
    }
}

Tensor GeneratorHandle::generate(const std::vector<Tensor>& latents,
                                 std::uint64_t seed) {
    check_latents(latents);
    std::vector<Tensor> mapped;
    mapped.reserve(latents.size());
    for (i64 i = 0; i < spec_.n_levels; ++i)
        mapped.push_back(map_latent(i, latents[static_cast<size_t>(i)]));
    return generate_mapped(mapped, seed);
}

}  // namespace latkit::gen
