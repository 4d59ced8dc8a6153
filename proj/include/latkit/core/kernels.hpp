#pragma once

#include <cstdint>

#include "latkit/core/exec.hpp"

// Compute kernels in two variants: kernels::ref holds plain serial loops and
// is the correctness reference; kernels::par holds the OpenMP versions.
// Parallelism is only ever over independent outputs (rows, images, channels)
// or fixed-size chunks, and every output element accumulates its terms in the
// same order in both variants, so ref and par agree bit for bit. Tests assert
// exact equality; the top-level functions dispatch on latkit::execution().
//
// GEMM convention: row-major, packed. C (m x n) = op(A) * op(B) with
// op(A) = A (m x k) when !ta, A' with A stored (k x m) when ta; likewise B.
// `accumulate` adds into C instead of overwriting. Per element the k-terms
// are folded in ascending order.

namespace latkit::kernels {

using i64 = std::int64_t;

namespace ref {

void gemm(bool ta, bool tb, i64 m, i64 n, i64 k,
          const double* A, const double* B, double* C, bool accumulate);
void transpose(const double* src, i64 rows, i64 cols, double* dst);

void add_bias_rows(double* y, const double* b, i64 rows, i64 cols);
void sum_rows(const double* dy, i64 rows, i64 cols, double* db);
void relu_forward(const double* x, double* y, i64 n);
void relu_backward(const double* x, const double* dy, double* dx, i64 n);
void axpy(i64 n, double a, const double* x, double* y);
void scale(i64 n, double a, double* x);

void im2col(const double* img, i64 c, i64 h, i64 w, i64 kh, i64 kw,
            i64 stride, i64 pad, double* cols);
void im2col_t(const double* img, i64 c, i64 h, i64 w, i64 kh, i64 kw,
              i64 stride, i64 pad, double* cols_t);
void col2im(const double* cols, i64 c, i64 h, i64 w, i64 kh, i64 kw,
            i64 stride, i64 pad, double* img);

// bias / dbias may be nullptr for bias-free convolutions.
void conv2d_forward(i64 n, i64 c, i64 h, i64 w, i64 o, i64 kh, i64 kw,
                    i64 stride, i64 pad, const double* x, const double* wgt,
                    const double* bias, double* y);
void conv2d_backward_data(i64 n, i64 c, i64 h, i64 w, i64 o, i64 kh, i64 kw,
                          i64 stride, i64 pad, const double* wgt,
                          const double* dy, double* dx);
void conv2d_backward_weights(i64 n, i64 c, i64 h, i64 w, i64 o, i64 kh, i64 kw,
                             i64 stride, i64 pad, const double* x,
                             const double* dy, double* dwgt, double* dbias);

void bn_stats(i64 n, i64 c, i64 hw, const double* x, double* mean, double* var);
void bn_forward(i64 n, i64 c, i64 hw, const double* x, const double* mean,
                const double* var, const double* gamma, const double* beta,
                double eps, double* y, double* xhat);
void bn_backward(i64 n, i64 c, i64 hw, const double* xhat, const double* dy,
                 const double* gamma, const double* var, double eps,
                 double* dx, double* dgamma, double* dbeta);

void global_avg_pool_forward(i64 n, i64 c, i64 hw, const double* x, double* y);
void global_avg_pool_backward(i64 n, i64 c, i64 hw, const double* dy, double* dx);
void upsample2x_forward(i64 n, i64 c, i64 h, i64 w, const double* x, double* y);
void upsample2x_backward(i64 n, i64 c, i64 h, i64 w, const double* dy, double* dx);

void adam_step(i64 n, double* p, const double* g, double* m, double* v,
               double lr, double beta1, double beta2, double eps,
               double weight_decay, i64 t);
void sgd_momentum_step(i64 n, double* p, const double* g, double* vel,
                       double lr, double momentum, double weight_decay);

double reduce_sum(const double* x, i64 n);
double dot(const double* x, const double* y, i64 n);

}  // namespace ref

namespace par {

void gemm(bool ta, bool tb, i64 m, i64 n, i64 k,
          const double* A, const double* B, double* C, bool accumulate);
void transpose(const double* src, i64 rows, i64 cols, double* dst);

void add_bias_rows(double* y, const double* b, i64 rows, i64 cols);
void sum_rows(const double* dy, i64 rows, i64 cols, double* db);
void relu_forward(const double* x, double* y, i64 n);
void relu_backward(const double* x, const double* dy, double* dx, i64 n);
void axpy(i64 n, double a, const double* x, double* y);
void scale(i64 n, double a, double* x);

void im2col(const double* img, i64 c, i64 h, i64 w, i64 kh, i64 kw,
            i64 stride, i64 pad, double* cols);
void im2col_t(const double* img, i64 c, i64 h, i64 w, i64 kh, i64 kw,
              i64 stride, i64 pad, double* cols_t);
void col2im(const double* cols, i64 c, i64 h, i64 w, i64 kh, i64 kw,
            i64 stride, i64 pad, double* img);

// bias / dbias may be nullptr for bias-free convolutions.
void conv2d_forward(i64 n, i64 c, i64 h, i64 w, i64 o, i64 kh, i64 kw,
                    i64 stride, i64 pad, const double* x, const double* wgt,
                    const double* bias, double* y);
void conv2d_backward_data(i64 n, i64 c, i64 h, i64 w, i64 o, i64 kh, i64 kw,
                          i64 stride, i64 pad, const double* wgt,
                          const double* dy, double* dx);
void conv2d_backward_weights(i64 n, i64 c, i64 h, i64 w, i64 o, i64 kh, i64 kw,
                             i64 stride, i64 pad, const double* x,
                             const double* dy, double* dwgt, double* dbias);

void bn_stats(i64 n, i64 c, i64 hw, const double* x, double* mean, double* var);
void bn_forward(i64 n, i64 c, i64 hw, const double* x, const double* mean,
                const double* var, const double* gamma, const double* beta,
                double eps, double* y, double* xhat);
void bn_backward(i64 n, i64 c, i64 hw, const double* xhat, const double* dy,
                 const double* gamma, const double* var, double eps,
                 double* dx, double* dgamma, double* dbeta);

void global_avg_pool_forward(i64 n, i64 c, i64 hw, const double* x, double* y);
void global_avg_pool_backward(i64 n, i64 c, i64 hw, const double* dy, double* dx);
void upsample2x_forward(i64 n, i64 c, i64 h, i64 w, const double* x, double* y);
void upsample2x_backward(i64 n, i64 c, i64 h, i64 w, const double* dy, double* dx);

void adam_step(i64 n, double* p, const double* g, double* m, double* v,
               double lr, double beta1, double beta2, double eps,
               double weight_decay, i64 t);
void sgd_momentum_step(i64 n, double* p, const double* g, double* vel,
                       double lr, double momentum, double weight_decay);

double reduce_sum(const double* x, i64 n);
double dot(const double* x, const double* y, i64 n);

}  // namespace par

// Dispatch on latkit::execution().
void gemm(bool ta, bool tb, i64 m, i64 n, i64 k,
          const double* A, const double* B, double* C, bool accumulate = false);
void transpose(const double* src, i64 rows, i64 cols, double* dst);
void add_bias_rows(double* y, const double* b, i64 rows, i64 cols);
void sum_rows(const double* dy, i64 rows, i64 cols, double* db);
void relu_forward(const double* x, double* y, i64 n);
void relu_backward(const double* x, const double* dy, double* dx, i64 n);
void axpy(i64 n, double a, const double* x, double* y);
void scale(i64 n, double a, double* x);
// bias / dbias may be nullptr for bias-free convolutions.
void conv2d_forward(i64 n, i64 c, i64 h, i64 w, i64 o, i64 kh, i64 kw,
                    i64 stride, i64 pad, const double* x, const double* wgt,
                    const double* bias, double* y);
void conv2d_backward_data(i64 n, i64 c, i64 h, i64 w, i64 o, i64 kh, i64 kw,
                          i64 stride, i64 pad, const double* wgt,
                          const double* dy, double* dx);
void conv2d_backward_weights(i64 n, i64 c, i64 h, i64 w, i64 o, i64 kh, i64 kw,
                             i64 stride, i64 pad, const double* x,
                             const double* dy, double* dwgt, double* dbias);
void bn_stats(i64 n, i64 c, i64 hw, const double* x, double* mean, double* var);
void bn_forward(i64 n, i64 c, i64 hw, const double* x, const double* mean,
                const double* var, const double* gamma, const double* beta,
                double eps, double* y, double* xhat);
void bn_backward(i64 n, i64 c, i64 hw, const double* xhat, const double* dy,
                 const double* gamma, const double* var, double eps,
                 double* dx, double* dgamma, double* dbeta);
void global_avg_pool_forward(i64 n, i64 c, i64 hw, const double* x, double* y);
void global_avg_pool_backward(i64 n, i64 c, i64 hw, const double* dy, double* dx);
void upsample2x_forward(i64 n, i64 c, i64 h, i64 w, const double* x, double* y);
void upsample2x_backward(i64 n, i64 c, i64 h, i64 w, const double* dy, double* dx);
void adam_step(i64 n, double* p, const double* g, double* m, double* v,
               double lr, double beta1, double beta2, double eps,
               double weight_decay, i64 t);
void sgd_momentum_step(i64 n, double* p, const double* g, double* vel,
                       double lr, double momentum, double weight_decay);
double reduce_sum(const double* x, i64 n);
double dot(const double* x, const double* y, i64 n);

// Output spatial size of a convolution along one axis.
inline i64 conv_out(i64 size, i64 k, i64 stride, i64 pad) {
    return (size + 2 * pad - k) / stride + 1;
}

}  // namespace latkit::kernels
