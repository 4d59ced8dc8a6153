#include "latkit/gen/linear.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "latkit/core/errors.hpp"
#include "latkit/core/kernels.hpp"
#include "latkit/core/rng.hpp"

namespace latkit::gen {

namespace {

using EMat = Eigen::MatrixXd;

EMat to_eigen(const Tensor& t) {
    if (t.rank() != 2) throw ShapeError("expected a rank-2 tensor");
    return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                          Eigen::RowMajor>>(t.data(), t.dim(0),
                                                            t.dim(1));
}

double logdet_pd(const EMat& m, const char* what) {
    Eigen::LLT<EMat> llt(m);
    if (llt.info() != Eigen::Success)
        throw ParamError(std::string(what) + ": matrix is not positive definite");
    return 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
}

// Symmetric PSD factor B with B B^T = p; ParamError if p is not symmetric PSD.
EMat psd_factor(const EMat& p, const char* what) {
    if (p.rows() != p.cols())
        throw ShapeError(std::string(what) + ": covariance must be square");
    if ((p - p.transpose()).cwiseAbs().maxCoeff() >
        1e-10 * std::max(1.0, p.cwiseAbs().maxCoeff()))
        throw ParamError(std::string(what) + ": covariance must be symmetric");
    Eigen::SelfAdjointEigenSolver<EMat> es(p);
    const double floor = -1e-10 * std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
    if (es.eigenvalues().minCoeff() < floor)
        throw ParamError(std::string(what) +
                         ": covariance must be positive semi-definite");
    return es.eigenvectors() *
           es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace

double gaussian_pair_mi(const Tensor& cov_x, const Tensor& cov_y,
                        const Tensor& cross) {
    const EMat sx = to_eigen(cov_x), sy = to_eigen(cov_y), c = to_eigen(cross);
    if (sx.rows() != sx.cols() || sy.rows() != sy.cols())
        throw ShapeError("gaussian_pair_mi: covariance blocks must be square");
    if (c.rows() != sx.rows() || c.cols() != sy.rows())
        throw ShapeError("gaussian_pair_mi: cross block shape mismatch");
    EMat joint(sx.rows() + sy.rows(), sx.rows() + sy.rows());
    joint.topLeftCorner(sx.rows(), sx.cols()) = sx;
    joint.topRightCorner(c.rows(), c.cols()) = c;
    joint.bottomLeftCorner(c.cols(), c.rows()) = c.transpose();
    joint.bottomRightCorner(sy.rows(), sy.cols()) = sy;
    const double mi = 0.5 * (logdet_pd(sx, "gaussian_pair_mi") +
                             logdet_pd(sy, "gaussian_pair_mi") -
                             logdet_pd(joint, "gaussian_pair_mi"));
    return mi < 0.0 ? 0.0 : mi;
}

LinearGaussianMLVGM::LinearGaussianMLVGM(LatentSpec spec, std::vector<Tensor> a,
                                         double eps)
    : GeneratorHandle(std::move(spec), {1, 1, a.empty() || a[0].rank() != 2
                                               ? 1
                                               : a[0].dim(0)}),
      a_(std::move(a)),
      eps_(eps) {
    if (static_cast<i64>(a_.size()) != spec_.n_levels)
        throw ParamError("LinearGaussianMLVGM: one matrix per level required");
    if (eps_ < 0.0) throw ParamError("LinearGaussianMLVGM: eps must be >= 0");
    d_ = a_[0].dim(0);
    for (i64 i = 0; i < spec_.n_levels; ++i) {
        const Tensor& m = a_[static_cast<size_t>(i)];
        if (m.rank() != 2 || m.dim(0) != d_ ||
            m.dim(1) != spec_.dims[static_cast<size_t>(i)])
            throw ShapeError("LinearGaussianMLVGM: matrix shape must be (d, m_i)");
    }
}

const Tensor& LinearGaussianMLVGM::matrix(i64 level) const {
    if (level < 0 || level >= spec_.n_levels)
        throw ParamError("LinearGaussianMLVGM: level out of range");
    return a_[static_cast<size_t>(level)];
}

Tensor LinearGaussianMLVGM::generate_mapped(const std::vector<Tensor>& mapped,
                                            std::uint64_t seed) {
    check_latents(mapped);
    const i64 b = mapped[0].dim(0);
    Tensor x({b, 1, 1, d_});
    for (i64 i = 0; i < spec_.n_levels; ++i) {
        const Tensor& z = mapped[static_cast<size_t>(i)];
        kernels::gemm(false, true, b, d_, z.dim(1), z.data(),
                      a_[static_cast<size_t>(i)].data(), x.data(),
                      /*accumulate=*/i > 0);
    }
    if (eps_ > 0.0) {
        Tensor noise({b * d_});
        fill_normal(noise.data(), b * d_, seed);
        kernels::axpy(b * d_, eps_, noise.data(), x.data());
    }
    return x;
}

Tensor LinearGaussianMLVGM::backward_mapped(i64 level, const Tensor& dx) {
    if (level < 0 || level >= spec_.n_levels)
        throw ParamError("backward_mapped: level out of range");
    if (dx.numel() % d_ != 0) throw ShapeError("backward_mapped: bad gradient size");
    const i64 b = dx.numel() / d_;
    const i64 m = spec_.dims[static_cast<size_t>(level)];
    Tensor dz({b, m});
    kernels::gemm(false, false, b, m, d_, dx.data(),
                  a_[static_cast<size_t>(level)].data(), dz.data(), false);
    return dz;
}

double LinearGaussianMLVGM::analytic_pair_mi(i64 level,
                                             const Tensor& perturbation_cov) const {
    if (level < 0 || level >= spec_.n_levels)
        throw ParamError("analytic_pair_mi: level out of range");
    if (!(eps_ > 0.0))
        throw ParamError("analytic_pair_mi: eps must be > 0 for finite MI");
    const i64 m = spec_.dims[static_cast<size_t>(level)];
    const EMat p = to_eigen(perturbation_cov);
    if (p.rows() != m || p.cols() != m)
        throw ShapeError("analytic_pair_mi: perturbation covariance must be (m, m)");
    (void)psd_factor(p, "analytic_pair_mi");  // validates symmetry and PSD-ness

    EMat signal = EMat::Zero(d_, d_);  // A A^T over all levels
    for (const Tensor& t : a_) {
        const EMat ai = to_eigen(t);
        signal += ai * ai.transpose();
    }
    const EMat al = to_eigen(a_[static_cast<size_t>(level)]);
    const EMat eye = EMat::Identity(d_, d_);
    const EMat sx = signal + eps_ * eps_ * eye;
    const EMat sy = signal + al * p * al.transpose() + eps_ * eps_ * eye;
    // Cross-covariance: shared latents only; perturbation and per-view noise
    // are independent of everything else.
    const EMat cross = signal;

    auto to_tensor = [](const EMat& e) {
        Tensor t({e.rows(), e.cols()});
        for (i64 i = 0; i < e.rows(); ++i)
            for (i64 j = 0; j < e.cols(); ++j) t[i * e.cols() + j] = e(i, j);
        return t;
    };
    return gaussian_pair_mi(to_tensor(sx), to_tensor(sy), to_tensor(cross));
}

std::pair<Tensor, Tensor> LinearGaussianMLVGM::sample_pairs(
    i64 level, const Tensor& perturbation_cov, i64 batch,
    std::uint64_t seed) const {
    if (level < 0 || level >= spec_.n_levels)
        throw ParamError("sample_pairs: level out of range");
    if (batch < 1) throw ParamError("sample_pairs: batch must be >= 1");
    const i64 m = spec_.dims[static_cast<size_t>(level)];
    const EMat p = to_eigen(perturbation_cov);
    if (p.rows() != m || p.cols() != m)
        throw ShapeError("sample_pairs: perturbation covariance must be (m, m)");
    const EMat factor = psd_factor(p, "sample_pairs");

    std::vector<Tensor> z;
    for (i64 i = 0; i < spec_.n_levels; ++i) {
        Tensor zi({batch, spec_.dims[static_cast<size_t>(i)]});
        fill_normal(zi.data(), zi.numel(),
                    seed_mix({seed, 0x6c61746bu, static_cast<std::uint64_t>(i)}));
        z.push_back(std::move(zi));
    }

    // u = g factor^T, g standard normal, so cov(u) = factor factor^T = P.
    Tensor g({batch, m});
    fill_normal(g.data(), g.numel(), seed_mix({seed, 0x70657274u}));
    Tensor ft({m, m});
    for (i64 i = 0; i < m; ++i)
        for (i64 j = 0; j < m; ++j) ft[i * m + j] = factor(i, j);
    Tensor u({batch, m});
    kernels::gemm(false, true, batch, m, m, g.data(), ft.data(), u.data(), false);

    std::vector<Tensor> z2 = z;
    Tensor& zl = z2[static_cast<size_t>(level)];
    for (i64 i = 0; i < zl.numel(); ++i) zl[i] += u[i];

    // const_cast is safe: generate_mapped on this model stores no state.
    auto* self = const_cast<LinearGaussianMLVGM*>(this);
    Tensor x = self->generate_mapped(z, seed_mix({seed, 0x766965771u}));
    Tensor x2 = self->generate_mapped(z2, seed_mix({seed, 0x766965772u}));
    return {std::move(x), std::move(x2)};
}

}  // namespace latkit::gen
