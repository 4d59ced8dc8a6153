#include <cmath>
#include <vector>

#include "latkit/core/kernels.hpp"

// OpenMP kernels. Parallelism is restricted to independent outputs (C rows,
// images, channels, chunks); within each output the term order matches the
// reference kernels exactly, so results are bit-identical to kernels::ref for
// any thread count. Where a unit of work is a whole image (conv variants) the
// serial per-image routines are reused inside the parallel loop.

namespace latkit::kernels::par {

namespace {

// Rows [lo, hi) of C, serially, with the row-accumulator layout that lets the
// compiler vectorize the j loop. Per element the fold order matches ref::gemm.
void gemm_rows(bool ta, bool tb, i64 m, i64 n, i64 k,
               const double* A, const double* B, double* C, bool accumulate,
               i64 lo, i64 hi, std::vector<double>& acc) {
    if (!tb) {
        for (i64 i = lo; i < hi; ++i) {
            for (i64 j = 0; j < n; ++j) acc[j] = 0.0;
            for (i64 r = 0; r < k; ++r) {
                const double a = ta ? A[r * m + i] : A[i * k + r];
                const double* __restrict__ brow = B + r * n;
                double* __restrict__ pacc = acc.data();
                for (i64 j = 0; j < n; ++j) pacc[j] += a * brow[j];
            }
            double* ci = C + i * n;
            if (accumulate) {
                for (i64 j = 0; j < n; ++j) ci[j] += acc[j];
            } else {
                for (i64 j = 0; j < n; ++j) ci[j] = acc[j];
            }
        }
        return;
    }
    for (i64 i = lo; i < hi; ++i) {
        for (i64 j = 0; j < n; ++j) {
            double s = 0.0;
            for (i64 r = 0; r < k; ++r) {
                const double a = ta ? A[r * m + i] : A[i * k + r];
                s += a * B[j * k + r];
            }
            C[i * n + j] = accumulate ? C[i * n + j] + s : s;
        }
    }
}

// Whole product on the calling thread; used inside image-parallel loops.
void gemm_serial_fast(bool ta, bool tb, i64 m, i64 n, i64 k,
                      const double* A, const double* B, double* C,
                      bool accumulate) {
    std::vector<double> acc(static_cast<size_t>(n));
    gemm_rows(ta, tb, m, n, k, A, B, C, accumulate, 0, m, acc);
}

}  // namespace

void gemm(bool ta, bool tb, i64 m, i64 n, i64 k,
          const double* A, const double* B, double* C, bool accumulate) {
#pragma omp parallel
    {
        std::vector<double> acc(static_cast<size_t>(n));
#pragma omp for schedule(static)
        for (i64 i = 0; i < m; ++i)
            gemm_rows(ta, tb, m, n, k, A, B, C, accumulate, i, i + 1, acc);
    }
}

void transpose(const double* src, i64 rows, i64 cols, double* dst) {
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < rows; ++i)
        for (i64 j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
}

void add_bias_rows(double* y, const double* b, i64 rows, i64 cols) {
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < rows; ++i)
        for (i64 j = 0; j < cols; ++j) y[i * cols + j] += b[j];
}

void sum_rows(const double* dy, i64 rows, i64 cols, double* db) {
#pragma omp parallel for schedule(static)
    for (i64 j = 0; j < cols; ++j) {
        double s = 0.0;
        for (i64 i = 0; i < rows; ++i) s += dy[i * cols + j];
        db[j] = s;
    }
}

void relu_forward(const double* x, double* y, i64 n) {
#pragma omp parallel for schedule(static) if (n > 16384)
    for (i64 i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* x, const double* dy, double* dx, i64 n) {
#pragma omp parallel for schedule(static) if (n > 16384)
    for (i64 i = 0; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void axpy(i64 n, double a, const double* x, double* y) {
#pragma omp parallel for schedule(static) if (n > 16384)
    for (i64 i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale(i64 n, double a, double* x) {
#pragma omp parallel for schedule(static) if (n > 16384)
    for (i64 i = 0; i < n; ++i) x[i] *= a;
}

void im2col(const double* img, i64 c, i64 h, i64 w, i64 kh, i64 kw,
            i64 stride, i64 pad, double* cols) {
    const i64 oh = conv_out(h, kh, stride, pad);
    const i64 ow = conv_out(w, kw, stride, pad);
#pragma omp parallel for schedule(static) collapse(2)
    for (i64 ch = 0; ch < c; ++ch) {
        for (i64 ki = 0; ki < kh; ++ki) {
            for (i64 kj = 0; kj < kw; ++kj) {
                double* row = cols + ((ch * kh + ki) * kw + kj) * (oh * ow);
                for (i64 oi = 0; oi < oh; ++oi) {
                    const i64 ii = oi * stride - pad + ki;
                    for (i64 oj = 0; oj < ow; ++oj) {
                        const i64 jj = oj * stride - pad + kj;
                        const bool in = ii >= 0 && ii < h && jj >= 0 && jj < w;
                        row[oi * ow + oj] = in ? img[(ch * h + ii) * w + jj] : 0.0;
                    }
                }
            }
        }
    }
}

void im2col_t(const double* img, i64 c, i64 h, i64 w, i64 kh, i64 kw,
              i64 stride, i64 pad, double* cols_t) {
    const i64 oh = conv_out(h, kh, stride, pad);
    const i64 ow = conv_out(w, kw, stride, pad);
    const i64 ck = c * kh * kw;
#pragma omp parallel for schedule(static)
    for (i64 oi = 0; oi < oh; ++oi) {
        for (i64 oj = 0; oj < ow; ++oj) {
            double* row = cols_t + (oi * ow + oj) * ck;
            for (i64 ch = 0; ch < c; ++ch) {
                for (i64 ki = 0; ki < kh; ++ki) {
                    const i64 ii = oi * stride - pad + ki;
                    for (i64 kj = 0; kj < kw; ++kj) {
                        const i64 jj = oj * stride - pad + kj;
                        const bool in = ii >= 0 && ii < h && jj >= 0 && jj < w;
                        row[(ch * kh + ki) * kw + kj] =
                            in ? img[(ch * h + ii) * w + jj] : 0.0;
                    }
                }
            }
        }
    }
}

void col2im(const double* cols, i64 c, i64 h, i64 w, i64 kh, i64 kw,
            i64 stride, i64 pad, double* img) {
    const i64 oh = conv_out(h, kh, stride, pad);
    const i64 ow = conv_out(w, kw, stride, pad);
    // Channels write to disjoint image planes; within a channel the add order
    // is the reference (ki, kj, oi, oj) order.
#pragma omp parallel for schedule(static)
    for (i64 ch = 0; ch < c; ++ch) {
        double* plane = img + ch * h * w;
        for (i64 i = 0; i < h * w; ++i) plane[i] = 0.0;
        for (i64 ki = 0; ki < kh; ++ki) {
            for (i64 kj = 0; kj < kw; ++kj) {
                const double* row = cols + ((ch * kh + ki) * kw + kj) * (oh * ow);
                for (i64 oi = 0; oi < oh; ++oi) {
                    const i64 ii = oi * stride - pad + ki;
                    if (ii < 0 || ii >= h) continue;
                    for (i64 oj = 0; oj < ow; ++oj) {
                        const i64 jj = oj * stride - pad + kj;
                        if (jj < 0 || jj >= w) continue;
                        plane[ii * w + jj] += row[oi * ow + oj];
                    }
                }
            }
        }
    }
}

void conv2d_forward(i64 n, i64 c, i64 h, i64 w, i64 o, i64 kh, i64 kw,
                    i64 stride, i64 pad, const double* x, const double* wgt,
                    const double* bias, double* y) {
    const i64 oh = conv_out(h, kh, stride, pad);
    const i64 ow = conv_out(w, kw, stride, pad);
    const i64 ck = c * kh * kw;
#pragma omp parallel
    {
        std::vector<double> cols(static_cast<size_t>(ck * oh * ow));
#pragma omp for schedule(static)
        for (i64 img = 0; img < n; ++img) {
            ref::im2col(x + img * c * h * w, c, h, w, kh, kw, stride, pad,
                        cols.data());
            double* yi = y + img * o * oh * ow;
            gemm_serial_fast(false, false, o, oh * ow, ck, wgt, cols.data(), yi, false);
            if (bias != nullptr) {
                for (i64 oc = 0; oc < o; ++oc)
                    for (i64 p = 0; p < oh * ow; ++p) yi[oc * oh * ow + p] += bias[oc];
            }
        }
    }
}

void conv2d_backward_data(i64 n, i64 c, i64 h, i64 w, i64 o, i64 kh, i64 kw,
                          i64 stride, i64 pad, const double* wgt,
                          const double* dy, double* dx) {
    const i64 oh = conv_out(h, kh, stride, pad);
    const i64 ow = conv_out(w, kw, stride, pad);
    const i64 ck = c * kh * kw;
#pragma omp parallel
    {
        std::vector<double> dcols(static_cast<size_t>(ck * oh * ow));
#pragma omp for schedule(static)
        for (i64 img = 0; img < n; ++img) {
            gemm_serial_fast(true, false, ck, oh * ow, o, wgt,
                             dy + img * o * oh * ow, dcols.data(), false);
            ref::col2im(dcols.data(), c, h, w, kh, kw, stride, pad,
                        dx + img * c * h * w);
        }
    }
}

void conv2d_backward_weights(i64 n, i64 c, i64 h, i64 w, i64 o, i64 kh, i64 kw,
                             i64 stride, i64 pad, const double* x,
                             const double* dy, double* dwgt, double* dbias) {
    const i64 oh = conv_out(h, kh, stride, pad);
    const i64 ow = conv_out(w, kw, stride, pad);
    const i64 ck = c * kh * kw;
    const i64 hw = oh * ow;
    for (i64 i = 0; i < o * ck; ++i) dwgt[i] = 0.0;
    if (dbias != nullptr)
        for (i64 i = 0; i < o; ++i) dbias[i] = 0.0;
    // Per-image partials are computed concurrently in blocks, then folded
    // serially in image order (the reference fold order).
    const i64 block = 16;
    std::vector<double> parts(static_cast<size_t>(block * o * ck));
    std::vector<double> bparts(static_cast<size_t>(block * o));
    for (i64 lo = 0; lo < n; lo += block) {
        const i64 hi = lo + block < n ? lo + block : n;
#pragma omp parallel
        {
            std::vector<double> cols_t(static_cast<size_t>(hw * ck));
#pragma omp for schedule(static)
            for (i64 img = lo; img < hi; ++img) {
                ref::im2col_t(x + img * c * h * w, c, h, w, kh, kw, stride, pad,
                              cols_t.data());
                const double* dyi = dy + img * o * hw;
                double* part = parts.data() + (img - lo) * o * ck;
                gemm_serial_fast(false, false, o, ck, hw, dyi, cols_t.data(), part, false);
                if (dbias != nullptr) {
                    double* bpart = bparts.data() + (img - lo) * o;
                    for (i64 oc = 0; oc < o; ++oc) {
                        double s = 0.0;
                        for (i64 p = 0; p < hw; ++p) s += dyi[oc * hw + p];
                        bpart[oc] = s;
                    }
                }
            }
        }
        for (i64 img = lo; img < hi; ++img) {
            const double* part = parts.data() + (img - lo) * o * ck;
            for (i64 i = 0; i < o * ck; ++i) dwgt[i] += part[i];
            if (dbias != nullptr) {
                const double* bpart = bparts.data() + (img - lo) * o;
                for (i64 oc = 0; oc < o; ++oc) dbias[oc] += bpart[oc];
            }
        }
    }
}

void bn_stats(i64 n, i64 c, i64 hw, const double* x, double* mean, double* var) {
    const double count = static_cast<double>(n * hw);
#pragma omp parallel for schedule(static)
    for (i64 ch = 0; ch < c; ++ch) {
        double s = 0.0;
        for (i64 img = 0; img < n; ++img) {
            const double* px = x + (img * c + ch) * hw;
            for (i64 p = 0; p < hw; ++p) s += px[p];
        }
        const double mu = s / count;
        double v = 0.0;
        for (i64 img = 0; img < n; ++img) {
            const double* px = x + (img * c + ch) * hw;
            for (i64 p = 0; p < hw; ++p) {
                const double d = px[p] - mu;
                v += d * d;
            }
        }
        mean[ch] = mu;
        var[ch] = v / count;
    }
}

void bn_forward(i64 n, i64 c, i64 hw, const double* x, const double* mean,
                const double* var, const double* gamma, const double* beta,
                double eps, double* y, double* xhat) {
#pragma omp parallel for schedule(static) collapse(2)
    for (i64 img = 0; img < n; ++img) {
        for (i64 ch = 0; ch < c; ++ch) {
            const double inv = 1.0 / std::sqrt(var[ch] + eps);
            const double mu = mean[ch];
            const double g = gamma[ch];
            const double b = beta[ch];
            const double* px = x + (img * c + ch) * hw;
            double* py = y + (img * c + ch) * hw;
            double* ph = xhat + (img * c + ch) * hw;
            for (i64 p = 0; p < hw; ++p) {
                const double xh = (px[p] - mu) * inv;
                ph[p] = xh;
                py[p] = g * xh + b;
            }
        }
    }
}

void bn_backward(i64 n, i64 c, i64 hw, const double* xhat, const double* dy,
                 const double* gamma, const double* var, double eps,
                 double* dx, double* dgamma, double* dbeta) {
    const double count = static_cast<double>(n * hw);
#pragma omp parallel for schedule(static)
    for (i64 ch = 0; ch < c; ++ch) {
        double sum_dy = 0.0;
        double sum_dy_xhat = 0.0;
        for (i64 img = 0; img < n; ++img) {
            const double* pd = dy + (img * c + ch) * hw;
            const double* ph = xhat + (img * c + ch) * hw;
            for (i64 p = 0; p < hw; ++p) {
                sum_dy += pd[p];
                sum_dy_xhat += pd[p] * ph[p];
            }
        }
        dgamma[ch] = sum_dy_xhat;
        dbeta[ch] = sum_dy;
        const double inv = 1.0 / std::sqrt(var[ch] + eps);
        const double g = gamma[ch];
        const double mean_dy = sum_dy / count;
        const double mean_dy_xhat = sum_dy_xhat / count;
        for (i64 img = 0; img < n; ++img) {
            const double* pd = dy + (img * c + ch) * hw;
            const double* ph = xhat + (img * c + ch) * hw;
            double* px = dx + (img * c + ch) * hw;
            for (i64 p = 0; p < hw; ++p)
                px[p] = g * inv * (pd[p] - mean_dy - ph[p] * mean_dy_xhat);
        }
    }
}

void global_avg_pool_forward(i64 n, i64 c, i64 hw, const double* x, double* y) {
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < n * c; ++i) {
        double s = 0.0;
        for (i64 p = 0; p < hw; ++p) s += x[i * hw + p];
        y[i] = s / static_cast<double>(hw);
    }
}

void global_avg_pool_backward(i64 n, i64 c, i64 hw, const double* dy, double* dx) {
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < n * c; ++i) {
        const double g = dy[i] / static_cast<double>(hw);
        for (i64 p = 0; p < hw; ++p) dx[i * hw + p] = g;
    }
}

void upsample2x_forward(i64 n, i64 c, i64 h, i64 w, const double* x, double* y) {
    const i64 oh = 2 * h;
    const i64 ow = 2 * w;
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < n * c; ++i) {
        const double* px = x + i * h * w;
        double* py = y + i * oh * ow;
        for (i64 oi = 0; oi < oh; ++oi)
            for (i64 oj = 0; oj < ow; ++oj)
                py[oi * ow + oj] = px[(oi / 2) * w + (oj / 2)];
    }
}

void upsample2x_backward(i64 n, i64 c, i64 h, i64 w, const double* dy, double* dx) {
    const i64 ow = 2 * w;
#pragma omp parallel for schedule(static)
    for (i64 i = 0; i < n * c; ++i) {
        const double* pd = dy + i * 4 * h * w;
        double* px = dx + i * h * w;
        for (i64 ii = 0; ii < h; ++ii) {
            for (i64 jj = 0; jj < w; ++jj) {
                double s = 0.0;
                for (i64 di = 0; di < 2; ++di)
                    for (i64 dj = 0; dj < 2; ++dj)
                        s += pd[(2 * ii + di) * ow + (2 * jj + dj)];
                px[ii * w + jj] = s;
            }
        }
    }
}

void adam_step(i64 n, double* p, const double* g, double* m, double* v,
               double lr, double beta1, double beta2, double eps,
               double weight_decay, i64 t) {
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
#pragma omp parallel for schedule(static) if (n > 16384)
    for (i64 i = 0; i < n; ++i) {
        const double gi = g[i] + weight_decay * p[i];
        m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
        v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

void sgd_momentum_step(i64 n, double* p, const double* g, double* vel,
                       double lr, double momentum, double weight_decay) {
#pragma omp parallel for schedule(static) if (n > 16384)
    for (i64 i = 0; i < n; ++i) {
        const double gi = g[i] + weight_decay * p[i];
        vel[i] = momentum * vel[i] + gi;
        p[i] -= lr * vel[i];
    }
}

double reduce_sum(const double* x, i64 n) {
    const i64 chunk = 4096;
    const i64 chunks = (n + chunk - 1) / chunk;
    std::vector<double> partial(static_cast<size_t>(chunks));
#pragma omp parallel for schedule(static)
    for (i64 ci = 0; ci < chunks; ++ci) {
        const i64 lo = ci * chunk;
        const i64 hi = lo + chunk < n ? lo + chunk : n;
        double s = 0.0;
        for (i64 i = lo; i < hi; ++i) s += x[i];
        partial[ci] = s;
    }
    double total = 0.0;
    for (i64 ci = 0; ci < chunks; ++ci) total += partial[ci];
    return total;
}

double dot(const double* x, const double* y, i64 n) {
    const i64 chunk = 4096;
    const i64 chunks = (n + chunk - 1) / chunk;
    std::vector<double> partial(static_cast<size_t>(chunks));
#pragma omp parallel for schedule(static)
    for (i64 ci = 0; ci < chunks; ++ci) {
        const i64 lo = ci * chunk;
        const i64 hi = lo + chunk < n ? lo + chunk : n;
        double s = 0.0;
        for (i64 i = lo; i < hi; ++i) s += x[i] * y[i];
        partial[ci] = s;
    }
    double total = 0.0;
    for (i64 ci = 0; ci < chunks; ++ci) total += partial[ci];
    return total;
}

}  // namespace latkit::kernels::par
