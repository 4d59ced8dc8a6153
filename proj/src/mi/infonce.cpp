#include "latkit/mi/infonce.hpp"

#include <cmath>
#include <vector>

#include "latkit/core/errors.hpp"

namespace latkit::mi {

namespace {

struct Normalized {
    Tensor v;                   // (2K, d) unit rows: anchors then positives
    std::vector<double> norms;  // clamped row norms of the raw embeddings
};

constexpr double kNormFloor = 1e-12;

void check_batch(const InfoNCEBatch& b) {
    if (b.anchors.rank() != 2 || b.positives.rank() != 2)
        throw ShapeError("infonce: embeddings must be rank-2 (K, d)");
    if (!(b.anchors.shape() == b.positives.shape()))
        throw ShapeError("infonce: anchors and positives must have equal shapes");
    if (b.anchors.dim(0) < 2) throw ParamError("infonce: batch needs K >= 2 pairs");
    if (!(b.tau > 0.0)) throw ParamError("infonce: tau must be positive");
    for (i64 i = 0; i < b.anchors.numel(); ++i)
        if (!std::isfinite(b.anchors[i]) || !std::isfinite(b.positives[i]))
            throw ParamError("infonce: embeddings must be finite");
}

// Stacks and L2-normalizes the 2K views; row i pairs with row (i+K) mod 2K.
Normalized normalize_views(const InfoNCEBatch& b) {
    const i64 k = b.anchors.dim(0), d = b.anchors.dim(1);
    Normalized out{Tensor({2 * k, d}), std::vector<double>(static_cast<size_t>(2 * k))};
    for (i64 r = 0; r < 2 * k; ++r) {
        const Tensor& src = r < k ? b.anchors : b.positives;
        const i64 row = r < k ? r : r - k;
        double sq = 0.0;
        for (i64 j = 0; j < d; ++j) {
            const double z = src[row * d + j];
            sq += z * z;
        }
        const double norm = std::max(std::sqrt(sq), kNormFloor);
        out.norms[static_cast<size_t>(r)] = norm;
        for (i64 j = 0; j < d; ++j) out.v[r * d + j] = src[row * d + j] / norm;
    }
    return out;
}

}  // namespace

double infonce_loss(const InfoNCEBatch& batch) {
    check_batch(batch);
    const i64 k = batch.anchors.dim(0), d = batch.anchors.dim(1);
    const i64 n = 2 * k;
    Normalized nm = normalize_views(batch);

    long double total = 0.0L;
    std::vector<double> s(static_cast<size_t>(n));
    for (i64 i = 0; i < n; ++i) {
        const i64 pair = (i + k) % n;
        double smax = -HUGE_VAL;
        for (i64 j = 0; j < n; ++j) {
            if (j == i) continue;
            double dot = 0.0;
            for (i64 t = 0; t < d; ++t) dot += nm.v[i * d + t] * nm.v[j * d + t];
            s[static_cast<size_t>(j)] = dot / batch.tau;
            if (s[static_cast<size_t>(j)] > smax) smax = s[static_cast<size_t>(j)];
        }
        double sumexp = 0.0;
        for (i64 j = 0; j < n; ++j) {
            if (j == i) continue;
            sumexp += std::exp(s[static_cast<size_t>(j)] - smax);
        }
        // Written so the all-equal case is exactly 0 + log(2K-1).
        total += (smax - s[static_cast<size_t>(pair)]) + std::log(sumexp);
    }
    return static_cast<double>(total / static_cast<long double>(n));
}

InfoNCEGrad infonce_loss_grad(const InfoNCEBatch& batch) {
    check_batch(batch);
    const i64 k = batch.anchors.dim(0), d = batch.anchors.dim(1);
    const i64 n = 2 * k;
    Normalized nm = normalize_views(batch);

    Tensor dv({n, d});  // gradient w.r.t. normalized views
    long double total = 0.0L;
    std::vector<double> s(static_cast<size_t>(n)), p(static_cast<size_t>(n));
    const double inv_n = 1.0 / static_cast<double>(n);
    for (i64 i = 0; i < n; ++i) {
        const i64 pair = (i + k) % n;
        double smax = -HUGE_VAL;
        for (i64 j = 0; j < n; ++j) {
            if (j == i) continue;
            double dot = 0.0;
            for (i64 t = 0; t < d; ++t) dot += nm.v[i * d + t] * nm.v[j * d + t];
            s[static_cast<size_t>(j)] = dot / batch.tau;
            if (s[static_cast<size_t>(j)] > smax) smax = s[static_cast<size_t>(j)];
        }
        double sumexp = 0.0;
        for (i64 j = 0; j < n; ++j) {
            if (j == i) continue;
            sumexp += std::exp(s[static_cast<size_t>(j)] - smax);
        }
        total += (smax - s[static_cast<size_t>(pair)]) + std::log(sumexp);

        // dloss_i/ds_ij = softmax_j - [j == pair], spread through both views.
        for (i64 j = 0; j < n; ++j) {
            if (j == i) continue;
            p[static_cast<size_t>(j)] =
                std::exp(s[static_cast<size_t>(j)] - smax) / sumexp;
        }
        for (i64 j = 0; j < n; ++j) {
            if (j == i) continue;
            const double coef =
                (p[static_cast<size_t>(j)] - (j == pair ? 1.0 : 0.0)) * inv_n /
                batch.tau;
            for (i64 t = 0; t < d; ++t) {
                dv[i * d + t] += coef * nm.v[j * d + t];
                dv[j * d + t] += coef * nm.v[i * d + t];
            }
        }
    }

    // Back through normalization: dz = (dv - v (v . dv)) / ||z||.
    InfoNCEGrad out;
    out.loss = static_cast<double>(total / static_cast<long double>(n));
    out.danchors = Tensor({k, d});
    out.dpositives = Tensor({k, d});
    for (i64 r = 0; r < n; ++r) {
        double vdot = 0.0;
        for (i64 t = 0; t < d; ++t) vdot += nm.v[r * d + t] * dv[r * d + t];
        Tensor& dst = r < k ? out.danchors : out.dpositives;
        const i64 row = r < k ? r : r - k;
        const double inv_norm = 1.0 / nm.norms[static_cast<size_t>(r)];
        for (i64 t = 0; t < d; ++t)
            dst[row * d + t] = (dv[r * d + t] - nm.v[r * d + t] * vdot) * inv_norm;
    }
    return out;
}

double mi_lower_bound(double loss, i64 k) {
    if (k < 2) throw ParamError("mi_lower_bound: K must be >= 2");
    if (loss < 0.0) throw ParamError("mi_lower_bound: loss must be >= 0");
    return std::log(static_cast<double>(2 * k - 1)) - loss;
}

}  // namespace latkit::mi
