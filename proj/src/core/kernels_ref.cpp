#include <cmath>
#include <vector>

#include "latkit/core/kernels.hpp"

// Reference kernels: straight loops, no threading, written for clarity.
// Per output element the accumulation order here defines the contract the
// parallel variants must reproduce exactly.

namespace latkit::kernels::ref {

void gemm(bool ta, bool tb, i64 m, i64 n, i64 k,
          const double* A, const double* B, double* C, bool accumulate) {
    for (i64 i = 0; i < m; ++i) {
        for (i64 j = 0; j < n; ++j) {
            double s = 0.0;
            for (i64 r = 0; r < k; ++r) {
                const double a = ta ? A[r * m + i] : A[i * k + r];
                const double b = tb ? B[j * k + r] : B[r * n + j];
                s += a * b;
            }
            C[i * n + j] = accumulate ? C[i * n + j] + s : s;
        }
    }
}

void transpose(const double* src, i64 rows, i64 cols, double* dst) {
    for (i64 i = 0; i < rows; ++i)
        for (i64 j = 0; j < cols; ++j) dst[j * rows + i] = src[i * cols + j];
}

void add_bias_rows(double* y, const double* b, i64 rows, i64 cols) {
    for (i64 i = 0; i < rows; ++i)
        for (i64 j = 0; j < cols; ++j) y[i * cols + j] += b[j];
}

void sum_rows(const double* dy, i64 rows, i64 cols, double* db) {
    for (i64 j = 0; j < cols; ++j) {
        double s = 0.0;
        for (i64 i = 0; i < rows; ++i) s += dy[i * cols + j];
        db[j] = s;
    }
}

void relu_forward(const double* x, double* y, i64 n) {
    for (i64 i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_backward(const double* x, const double* dy, double* dx, i64 n) {
    for (i64 i = 0; i < n; ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
}

void axpy(i64 n, double a, const double* x, double* y) {
    for (i64 i = 0; i < n; ++i) y[i] += a * x[i];
}

void scale(i64 n, double a, double* x) {
    for (i64 i = 0; i < n; ++i) x[i] *= a;
}

// cols layout: (c*kh*kw) rows by (oh*ow) columns.
void im2col(const double* img, i64 c, i64 h, i64 w, i64 kh, i64 kw,
            i64 stride, i64 pad, double* cols) {
    const i64 oh = conv_out(h, kh, stride, pad);
    const i64 ow = conv_out(w, kw, stride, pad);
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

// Transposed layout: (oh*ow) rows by (c*kh*kw) columns.
void im2col_t(const double* img, i64 c, i64 h, i64 w, i64 kh, i64 kw,
              i64 stride, i64 pad, double* cols_t) {
    const i64 oh = conv_out(h, kh, stride, pad);
    const i64 ow = conv_out(w, kw, stride, pad);
    const i64 ck = c * kh * kw;
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

// Scatter-add of the column matrix back into an image. Input positions hit by
// several columns receive their adds in (ch, ki, kj, oi, oj) order.
void col2im(const double* cols, i64 c, i64 h, i64 w, i64 kh, i64 kw,
            i64 stride, i64 pad, double* img) {
    const i64 oh = conv_out(h, kh, stride, pad);
    const i64 ow = conv_out(w, kw, stride, pad);
    for (i64 i = 0; i < c * h * w; ++i) img[i] = 0.0;
    for (i64 ch = 0; ch < c; ++ch) {
        for (i64 ki = 0; ki < kh; ++ki) {
            for (i64 kj = 0; kj < kw; ++kj) {
                const double* row = cols + ((ch * kh + ki) * kw + kj) * (oh * ow);
                for (i64 oi = 0; oi < oh; ++oi) {
                    const i64 ii = oi * stride - pad + ki;
                    if (ii < 0 || ii >= h) continue;
                    for (i64 oj = 0; oj < ow; ++oj) {
                        const i64 jj = oj * stride - pad + kj;
                        if (jj < 0 || jj >= w) continue;
                        img[(ch * h + ii) * w + jj] += row[oi * ow + oj];
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
    std::vector<double> cols(static_cast<size_t>(ck * oh * ow));
    for (i64 img = 0; img < n; ++img) {
        im2col(x + img * c * h * w, c, h, w, kh, kw, stride, pad, cols.data());
        double* yi = y + img * o * oh * ow;
        gemm(false, false, o, oh * ow, ck, wgt, cols.data(), yi, false);
        if (bias != nullptr) {
            for (i64 oc = 0; oc < o; ++oc)
                for (i64 p = 0; p < oh * ow; ++p) yi[oc * oh * ow + p] += bias[oc];
        }
    }
}

void conv2d_backward_data(i64 n, i64 c, i64 h, i64 w, i64 o, i64 kh, i64 kw,
                          i64 stride, i64 pad, const double* wgt,
                          const double* dy, double* dx) {
    const i64 oh = conv_out(h, kh, stride, pad);
    const i64 ow = conv_out(w, kw, stride, pad);
    const i64 ck = c * kh * kw;
    std::vector<double> dcols(static_cast<size_t>(ck * oh * ow));
    for (i64 img = 0; img < n; ++img) {
        // dcols = wgt' * dy, with wgt stored (o x ck).
        gemm(true, false, ck, oh * ow, o, wgt, dy + img * o * oh * ow,
             dcols.data(), false);
        col2im(dcols.data(), c, h, w, kh, kw, stride, pad, dx + img * c * h * w);
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
    std::vector<double> cols_t(static_cast<size_t>(hw * ck));
    std::vector<double> part(static_cast<size_t>(o * ck));
    for (i64 img = 0; img < n; ++img) {
        im2col_t(x + img * c * h * w, c, h, w, kh, kw, stride, pad, cols_t.data());
        const double* dyi = dy + img * o * hw;
        // part = dyi (o x hw) * cols_t (hw x ck); per-image partials are added
        // in image order so any parallel variant can reproduce the order.
        gemm(false, false, o, ck, hw, dyi, cols_t.data(), part.data(), false);
        for (i64 i = 0; i < o * ck; ++i) dwgt[i] += part[i];
        if (dbias == nullptr) continue;
        for (i64 oc = 0; oc < o; ++oc) {
            double s = 0.0;
            for (i64 p = 0; p < hw; ++p) s += dyi[oc * hw + p];
            dbias[oc] += s;
        }
    }
}

// Biased variance, two-pass for stability. Elements are folded per channel in
// (n, hw) order.
void bn_stats(i64 n, i64 c, i64 hw, const double* x, double* mean, double* var) {
    const double count = static_cast<double>(n * hw);
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
    for (i64 i = 0; i < n * c; ++i) {
        double s = 0.0;
        for (i64 p = 0; p < hw; ++p) s += x[i * hw + p];
        y[i] = s / static_cast<double>(hw);
    }
}

void global_avg_pool_backward(i64 n, i64 c, i64 hw, const double* dy, double* dx) {
    for (i64 i = 0; i < n * c; ++i) {
        const double g = dy[i] / static_cast<double>(hw);
        for (i64 p = 0; p < hw; ++p) dx[i * hw + p] = g;
    }
}

void upsample2x_forward(i64 n, i64 c, i64 h, i64 w, const double* x, double* y) {
    const i64 oh = 2 * h;
    const i64 ow = 2 * w;
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
    for (i64 i = 0; i < n; ++i) {
        const double gi = g[i] + weight_decay * p[i];
        vel[i] = momentum * vel[i] + gi;
        p[i] -= lr * vel[i];
    }
}

double reduce_sum(const double* x, i64 n) {
    // Fixed 4096-element chunk partials folded in chunk order; the parallel
    // variant computes the same partials concurrently.
    const i64 chunk = 4096;
    double total = 0.0;
    for (i64 lo = 0; lo < n; lo += chunk) {
        const i64 hi = lo + chunk < n ? lo + chunk : n;
        double s = 0.0;
        for (i64 i = lo; i < hi; ++i) s += x[i];
        total += s;
    }
    return total;
}

double dot(const double* x, const double* y, i64 n) {
    const i64 chunk = 4096;
    double total = 0.0;
    for (i64 lo = 0; lo < n; lo += chunk) {
        const i64 hi = lo + chunk < n ? lo + chunk : n;
        double s = 0.0;
        for (i64 i = lo; i < hi; ++i) s += x[i] * y[i];
        total += s;
    }
    return total;
}

}  // namespace latkit::kernels::ref
