#include "latkit/core/kernels.hpp"

// Thin dispatch between the reference and OpenMP kernel sets.

namespace latkit::kernels {

namespace {
inline bool use_par() { return execution() == Exec::parallel; }
}  // namespace

void gemm(bool ta, bool tb, i64 m, i64 n, i64 k,
          const double* A, const double* B, double* C, bool accumulate) {
    use_par() ? par::gemm(ta, tb, m, n, k, A, B, C, accumulate)
              : ref::gemm(ta, tb, m, n, k, A, B, C, accumulate);
}

void transpose(const double* src, i64 rows, i64 cols, double* dst) {
    use_par() ? par::transpose(src, rows, cols, dst)
              : ref::transpose(src, rows, cols, dst);
}

void add_bias_rows(double* y, const double* b, i64 rows, i64 cols) {
    use_par() ? par::add_bias_rows(y, b, rows, cols)
              : ref::add_bias_rows(y, b, rows, cols);
}

void sum_rows(const double* dy, i64 rows, i64 cols, double* db) {
    use_par() ? par::sum_rows(dy, rows, cols, db)
              : ref::sum_rows(dy, rows, cols, db);
}

void relu_forward(const double* x, double* y, i64 n) {
    use_par() ? par::relu_forward(x, y, n) : ref::relu_forward(x, y, n);
}

void relu_backward(const double* x, const double* dy, double* dx, i64 n) {
    use_par() ? par::relu_backward(x, dy, dx, n)
              : ref::relu_backward(x, dy, dx, n);
}

void axpy(i64 n, double a, const double* x, double* y) {
    use_par() ? par::axpy(n, a, x, y) : ref::axpy(n, a, x, y);
}

void scale(i64 n, double a, double* x) {
    use_par() ? par::scale(n, a, x) : ref::scale(n, a, x);
}

void conv2d_forward(i64 n, i64 c, i64 h, i64 w, i64 o, i64 kh, i64 kw,
                    i64 stride, i64 pad, const double* x, const double* wgt,
                    const double* bias, double* y) {
    use_par() ? par::conv2d_forward(n, c, h, w, o, kh, kw, stride, pad, x, wgt, bias, y)
              : ref::conv2d_forward(n, c, h, w, o, kh, kw, stride, pad, x, wgt, bias, y);
}

void conv2d_backward_data(i64 n, i64 c, i64 h, i64 w, i64 o, i64 kh, i64 kw,
                          i64 stride, i64 pad, const double* wgt,
                          const double* dy, double* dx) {
    use_par() ? par::conv2d_backward_data(n, c, h, w, o, kh, kw, stride, pad, wgt, dy, dx)
              : ref::conv2d_backward_data(n, c, h, w, o, kh, kw, stride, pad, wgt, dy, dx);
}

void conv2d_backward_weights(i64 n, i64 c, i64 h, i64 w, i64 o, i64 kh, i64 kw,
                             i64 stride, i64 pad, const double* x,
                             const double* dy, double* dwgt, double* dbias) {
    use_par() ? par::conv2d_backward_weights(n, c, h, w, o, kh, kw, stride, pad, x, dy, dwgt, dbias)
              : ref::conv2d_backward_weights(n, c, h, w, o, kh, kw, stride, pad, x, dy, dwgt, dbias);
}

void bn_stats(i64 n, i64 c, i64 hw, const double* x, double* mean, double* var) {
    use_par() ? par::bn_stats(n, c, hw, x, mean, var)
              : ref::bn_stats(n, c, hw, x, mean, var);
}

void bn_forward(i64 n, i64 c, i64 hw, const double* x, const double* mean,
                const double* var, const double* gamma, const double* beta,
                double eps, double* y, double* xhat) {
    use_par() ? par::bn_forward(n, c, hw, x, mean, var, gamma, beta, eps, y, xhat)
              : ref::bn_forward(n, c, hw, x, mean, var, gamma, beta, eps, y, xhat);
}

void bn_backward(i64 n, i64 c, i64 hw, const double* xhat, const double* dy,
                 const double* gamma, const double* var, double eps,
                 double* dx, double* dgamma, double* dbeta) {
    use_par() ? par::bn_backward(n, c, hw, xhat, dy, gamma, var, eps, dx, dgamma, dbeta)
              : ref::bn_backward(n, c, hw, xhat, dy, gamma, var, eps, dx, dgamma, dbeta);
}

void global_avg_pool_forward(i64 n, i64 c, i64 hw, const double* x, double* y) {
    use_par() ? par::global_avg_pool_forward(n, c, hw, x, y)
              : ref::global_avg_pool_forward(n, c, hw, x, y);
}

void global_avg_pool_backward(i64 n, i64 c, i64 hw, const double* dy, double* dx) {
    use_par() ? par::global_avg_pool_backward(n, c, hw, dy, dx)
              : ref::global_avg_pool_backward(n, c, hw, dy, dx);
}

void upsample2x_forward(i64 n, i64 c, i64 h, i64 w, const double* x, double* y) {
    use_par() ? par::upsample2x_forward(n, c, h, w, x, y)
              : ref::upsample2x_forward(n, c, h, w, x, y);
}

void upsample2x_backward(i64 n, i64 c, i64 h, i64 w, const double* dy, double* dx) {
    use_par() ? par::upsample2x_backward(n, c, h, w, dy, dx)
              : ref::upsample2x_backward(n, c, h, w, dy, dx);
}

void adam_step(i64 n, double* p, const double* g, double* m, double* v,
               double lr, double beta1, double beta2, double eps,
               double weight_decay, i64 t) {
    use_par() ? par::adam_step(n, p, g, m, v, lr, beta1, beta2, eps, weight_decay, t)
              : ref::adam_step(n, p, g, m, v, lr, beta1, beta2, eps, weight_decay, t);
}

void sgd_momentum_step(i64 n, double* p, const double* g, double* vel,
                       double lr, double momentum, double weight_decay) {
    use_par() ? par::sgd_momentum_step(n, p, g, vel, lr, momentum, weight_decay)
              : ref::sgd_momentum_step(n, p, g, vel, lr, momentum, weight_decay);
}

double reduce_sum(const double* x, i64 n) {
    return use_par() ? par::reduce_sum(x, n) : ref::reduce_sum(x, n);
}

double dot(const double* x, const double* y, i64 n) {
    return use_par() ? par::dot(x, y, n) : ref::dot(x, y, n);
}

}  // namespace latkit::kernels
