#pragma once

#include <utility>

#include "latkit/gen/mlvgm.hpp"

namespace latkit::gen {

// Exact mutual information, in nats, of a jointly Gaussian pair with the
// given marginal covariance blocks and cross-covariance:
// I = (logdet cov_x + logdet cov_y - logdet joint) / 2. The joint must be
// positive definite.
double gaussian_pair_mi(const Tensor& cov_x, const Tensor& cov_y,
                        const Tensor& cross);

// x = sum_i A_i z_i + eps * eta, with z standard normal and eta fresh
// standard normal per generated view. Every (X, X') view pair is jointly
// Gaussian, so pairwise MI has a closed form — this model is the test
// oracle for the estimated bounds.
class LinearGaussianMLVGM : public GeneratorHandle {
public:
    // a[i] has shape (d, dims[i]); output shape is (1, 1, d).
    LinearGaussianMLVGM(LatentSpec spec, std::vector<Tensor> a, double eps);

    Tensor generate_mapped(const std::vector<Tensor>& mapped,
                           std::uint64_t seed) override;
    Tensor backward_mapped(i64 level, const Tensor& dx) override;

    // Exact I(X; X') where X' reuses all latents except `level`, whose
    // latent receives an independent additive N(0, perturbation_cov) draw.
    // Requires eps > 0 (otherwise MI is infinite).
    double analytic_pair_mi(i64 level, const Tensor& perturbation_cov) const;

    // Draws `batch` matched pairs from that same joint distribution.
    // Returns (X, X'), each (batch, 1, 1, d).
    std::pair<Tensor, Tensor> sample_pairs(i64 level,
                                           const Tensor& perturbation_cov,
                                           i64 batch, std::uint64_t seed) const;

    double eps() const { return eps_; }
    const Tensor& matrix(i64 level) const;

private:
    std::vector<Tensor> a_;
    double eps_;
    i64 d_;
};

}  // namespace latkit::gen
