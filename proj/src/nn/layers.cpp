#include "latkit/nn/layers.hpp"

#include <cmath>

#include "latkit/core/errors.hpp"
#include "latkit/core/kernels.hpp"

namespace latkit::nn {

namespace {

void he_normal(Tensor& t, i64 fan_in, Rng& rng, double scale) {
    const double std = scale > 0.0 ? scale : std::sqrt(2.0 / static_cast<double>(fan_in));
    for (i64 i = 0; i < t.numel(); ++i) t[i] = std * rng.normal();
}

}  // namespace

void Layer::zero_grad() {
    std::vector<Param*> ps;
    collect_params(ps);
    for (Param* p : ps) p->grad.fill(0.0);
}

std::vector<Param*> parameters(Layer& layer) {
    std::vector<Param*> ps;
    layer.collect_params(ps);
    return ps;
}

i64 parameter_count(Layer& layer) {
    i64 n = 0;
    for (Param* p : parameters(layer)) n += p->value.numel();
    return n;
}

// ---------------------------------------------------------------------------
// Dense

Dense::Dense(std::string name, i64 in, i64 out, Rng& rng, bool bias, double init_scale)
    : w(name + ".w", {in, out}),
      b(name + ".b", {bias ? out : 0}),
      has_bias(bias),
      in_(in),
      out_(out) {
    he_normal(w.value, in, rng, init_scale);
}

Tensor Dense::forward(const Tensor& x, bool) {
    if (x.rank() != 2 || x.dim(1) != in_) throw ShapeError("Dense: bad input shape");
    x_ = x;
    const i64 n = x.dim(0);
    Tensor y({n, out_});
    kernels::gemm(false, false, n, out_, in_, x.data(), w.value.data(), y.data());
    if (has_bias) kernels::add_bias_rows(y.data(), b.value.data(), n, out_);
    return y;
}

Tensor Dense::backward(const Tensor& dy) {
    const i64 n = x_.dim(0);
    // dW += x' dy
    kernels::gemm(true, false, in_, out_, n, x_.data(), dy.data(), w.grad.data(), true);
    if (has_bias) {
        Tensor db({out_});
        kernels::sum_rows(dy.data(), n, out_, db.data());
        kernels::axpy(out_, 1.0, db.data(), b.grad.data());
    }
    // dx = dy W'
    Tensor wt({out_, in_});
    kernels::transpose(w.value.data(), in_, out_, wt.data());
    Tensor dx({n, in_});
    kernels::gemm(false, false, n, in_, out_, dy.data(), wt.data(), dx.data());
    return dx;
}

void Dense::collect_params(std::vector<Param*>& out) {
    out.push_back(&w);
    if (has_bias) out.push_back(&b);
}

// ---------------------------------------------------------------------------
// Conv2d

Conv2d::Conv2d(std::string name, i64 in_ch, i64 out_ch, i64 k, i64 stride,
               i64 pad, Rng& rng, bool bias)
    : w(name + ".w", {out_ch, in_ch, k, k}),
      b(name + ".b", {bias ? out_ch : 0}),
      has_bias(bias),
      in_ch_(in_ch),
      out_ch_(out_ch),
      k_(k),
      stride_(stride),
      pad_(pad) {
    he_normal(w.value, in_ch * k * k, rng, -1.0);
}

Tensor Conv2d::forward(const Tensor& x, bool) {
    if (x.rank() != 4 || x.dim(1) != in_ch_) throw ShapeError("Conv2d: bad input shape");
    x_ = x;
    const i64 n = x.dim(0), h = x.dim(2), w_in = x.dim(3);
    const i64 oh = kernels::conv_out(h, k_, stride_, pad_);
    const i64 ow = kernels::conv_out(w_in, k_, stride_, pad_);
    Tensor y({n, out_ch_, oh, ow});
    kernels::conv2d_forward(n, in_ch_, h, w_in, out_ch_, k_, k_, stride_, pad_,
                            x.data(), w.value.data(),
                            has_bias ? b.value.data() : nullptr, y.data());
    return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
    const i64 n = x_.dim(0), h = x_.dim(2), w_in = x_.dim(3);
    Tensor dw(w.value.shape());
    Tensor db({out_ch_});
    kernels::conv2d_backward_weights(n, in_ch_, h, w_in, out_ch_, k_, k_, stride_,
                                     pad_, x_.data(), dy.data(), dw.data(),
                                     has_bias ? db.data() : nullptr);
    kernels::axpy(dw.numel(), 1.0, dw.data(), w.grad.data());
    if (has_bias) kernels::axpy(out_ch_, 1.0, db.data(), b.grad.data());
    Tensor dx(x_.shape());
    kernels::conv2d_backward_data(n, in_ch_, h, w_in, out_ch_, k_, k_, stride_,
                                  pad_, w.value.data(), dy.data(), dx.data());
    return dx;
}

void Conv2d::collect_params(std::vector<Param*>& out) {
    out.push_back(&w);
    if (has_bias) out.push_back(&b);
}

// ---------------------------------------------------------------------------
// BatchNorm

BatchNorm::BatchNorm(std::string name, i64 channels, double eps, double momentum)
    : gamma(name + ".gamma", {channels}),
      beta(name + ".beta", {channels}),
      running_mean({channels}),
      running_var({channels}),
      name_(name),
      channels_(channels),
      eps_(eps),
      momentum_(momentum) {
    gamma.value.fill(1.0);
    running_var.fill(1.0);
}

Tensor BatchNorm::forward(const Tensor& x, bool train) {
    if (x.rank() != 2 && x.rank() != 4) throw ShapeError("BatchNorm: rank must be 2 or 4");
    if (x.dim(1) != channels_) throw ShapeError("BatchNorm: channel mismatch");
    in_shape_ = x.shape();
    const i64 n = x.dim(0);
    const i64 hw = x.rank() == 4 ? x.dim(2) * x.dim(3) : 1;

    Tensor mean({channels_}), var({channels_});
    if (train) {
        kernels::bn_stats(n, channels_, hw, x.data(), mean.data(), var.data());
        for (i64 c = 0; c < channels_; ++c) {
            running_mean[c] = (1.0 - momentum_) * running_mean[c] + momentum_ * mean[c];
            running_var[c] = (1.0 - momentum_) * running_var[c] + momentum_ * var[c];
        }
    } else {
        mean = running_mean;
        var = running_var;
    }
    batch_var_ = var;
    xhat_ = Tensor(x.shape());
    Tensor y(x.shape());
    kernels::bn_forward(n, channels_, hw, x.data(), mean.data(), var.data(),
                        gamma.value.data(), beta.value.data(), eps_, y.data(),
                        xhat_.data());
    return y;
}

Tensor BatchNorm::backward(const Tensor& dy) {
    const i64 n = in_shape_[0];
    const i64 hw = in_shape_.size() == 4 ? in_shape_[2] * in_shape_[3] : 1;
    Tensor dx(in_shape_);
    Tensor dgamma({channels_}), dbeta({channels_});
    kernels::bn_backward(n, channels_, hw, xhat_.data(), dy.data(),
                         gamma.value.data(), batch_var_.data(), eps_, dx.data(),
                         dgamma.data(), dbeta.data());
    kernels::axpy(channels_, 1.0, dgamma.data(), gamma.grad.data());
    kernels::axpy(channels_, 1.0, dbeta.data(), beta.grad.data());
    return dx;
}

void BatchNorm::collect_params(std::vector<Param*>& out) {
    out.push_back(&gamma);
    out.push_back(&beta);
}

void BatchNorm::collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) {
    out.emplace_back(name_ + ".rmean", &running_mean);
    out.emplace_back(name_ + ".rvar", &running_var);
}

// ---------------------------------------------------------------------------
// Activations and shape ops

Tensor Flatten::forward(const Tensor& x, bool) {
    if (x.rank() < 2) throw ShapeError("Flatten: rank >= 2 input expected");
    in_shape_ = x.shape();
    return x.reshaped({x.dim(0), x.numel() / x.dim(0)});
}

Tensor Flatten::backward(const Tensor& dy) {
    if (in_shape_.empty()) throw ShapeError("Flatten: backward before forward");
    return dy.reshaped(in_shape_);
}

Tensor ReLU::forward(const Tensor& x, bool) {
    x_ = x;
    Tensor y(x.shape());
    kernels::relu_forward(x.data(), y.data(), x.numel());
    return y;
}

Tensor ReLU::backward(const Tensor& dy) {
    Tensor dx(x_.shape());
    kernels::relu_backward(x_.data(), dy.data(), dx.data(), x_.numel());
    return dx;
}

Tensor Sigmoid::forward(const Tensor& x, bool) {
    Tensor y(x.shape());
    for (i64 i = 0; i < x.numel(); ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
    y_ = y;
    return y;
}

Tensor Sigmoid::backward(const Tensor& dy) {
    Tensor dx(y_.shape());
    for (i64 i = 0; i < dx.numel(); ++i) dx[i] = dy[i] * y_[i] * (1.0 - y_[i]);
    return dx;
}

Tensor GlobalAvgPool::forward(const Tensor& x, bool) {
    if (x.rank() != 4) throw ShapeError("GlobalAvgPool: rank-4 input expected");
    in_shape_ = x.shape();
    Tensor y({x.dim(0), x.dim(1)});
    kernels::global_avg_pool_forward(x.dim(0), x.dim(1), x.dim(2) * x.dim(3),
                                     x.data(), y.data());
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
    Tensor dx(in_shape_);
    kernels::global_avg_pool_backward(in_shape_[0], in_shape_[1],
                                      in_shape_[2] * in_shape_[3], dy.data(),
                                      dx.data());
    return dx;
}

Tensor Upsample2x::forward(const Tensor& x, bool) {
    if (x.rank() != 4) throw ShapeError("Upsample2x: rank-4 input expected");
    in_shape_ = x.shape();
    Tensor y({x.dim(0), x.dim(1), 2 * x.dim(2), 2 * x.dim(3)});
    kernels::upsample2x_forward(x.dim(0), x.dim(1), x.dim(2), x.dim(3), x.data(),
                                y.data());
    return y;
}

Tensor Upsample2x::backward(const Tensor& dy) {
    Tensor dx(in_shape_);
    kernels::upsample2x_backward(in_shape_[0], in_shape_[1], in_shape_[2],
                                 in_shape_[3], dy.data(), dx.data());
    return dx;
}

// ---------------------------------------------------------------------------
// Composites

Tensor Sequential::forward(const Tensor& x, bool train) {
    Tensor h = x;
    for (auto& l : layers_) h = l->forward(h, train);
    return h;
}

Tensor Sequential::backward(const Tensor& dy) {
    Tensor g = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
    return g;
}

void Sequential::collect_params(std::vector<Param*>& out) {
    for (auto& l : layers_) l->collect_params(out);
}

void Sequential::collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) {
    for (auto& l : layers_) l->collect_buffers(out);
}

ResidualBlock::ResidualBlock(std::string name, i64 in_ch, i64 out_ch, i64 stride,
                             Rng& rng)
    : conv1_(name + ".conv1", in_ch, out_ch, 3, stride, 1, rng, false),
      bn1_(name + ".bn1", out_ch),
      conv2_(name + ".conv2", out_ch, out_ch, 3, 1, 1, rng, false),
      bn2_(name + ".bn2", out_ch),
      projected_(stride != 1 || in_ch != out_ch) {
    if (projected_) {
        skip_conv_ = std::make_unique<Conv2d>(name + ".skip", in_ch, out_ch, 1,
                                              stride, 0, rng, false);
        skip_bn_ = std::make_unique<BatchNorm>(name + ".skipbn", out_ch);
    }
}

Tensor ResidualBlock::forward(const Tensor& x, bool train) {
    Tensor h = bn1_.forward(conv1_.forward(x, train), train);
    h = relu1_.forward(h, train);
    h = bn2_.forward(conv2_.forward(h, train), train);
    Tensor skip = projected_
                      ? skip_bn_->forward(skip_conv_->forward(x, train), train)
                      : x;
    sum_ = Tensor(h.shape());
    for (i64 i = 0; i < h.numel(); ++i) sum_[i] = h[i] + skip[i];
    Tensor y(sum_.shape());
    kernels::relu_forward(sum_.data(), y.data(), sum_.numel());
    return y;
}

Tensor ResidualBlock::backward(const Tensor& dy) {
    Tensor dsum(sum_.shape());
    kernels::relu_backward(sum_.data(), dy.data(), dsum.data(), sum_.numel());
    Tensor d = bn2_.backward(dsum);
    d = conv2_.backward(d);
    d = relu1_.backward(d);
    d = bn1_.backward(d);
    Tensor dmain = conv1_.backward(d);
    Tensor dskip = projected_ ? skip_conv_->backward(skip_bn_->backward(dsum)) : dsum;
    for (i64 i = 0; i < dmain.numel(); ++i) dmain[i] += dskip[i];
    return dmain;
}

void ResidualBlock::collect_params(std::vector<Param*>& out) {
    conv1_.collect_params(out);
    bn1_.collect_params(out);
    conv2_.collect_params(out);
    bn2_.collect_params(out);
    if (projected_) {
        skip_conv_->collect_params(out);
        skip_bn_->collect_params(out);
    }
}

void ResidualBlock::collect_buffers(std::vector<std::pair<std::string, Tensor*>>& out) {
    bn1_.collect_buffers(out);
    bn2_.collect_buffers(out);
    if (projected_) skip_bn_->collect_buffers(out);
}

void export_state(Layer& layer, std::vector<std::pair<std::string, Tensor>>& out) {
    for (Param* p : parameters(layer)) out.emplace_back(p->name, p->value);
    std::vector<std::pair<std::string, Tensor*>> bufs;
    layer.collect_buffers(bufs);
    for (auto& [name, t] : bufs) out.emplace_back(name, *t);
}

void import_state(Layer& layer, const std::vector<std::pair<std::string, Tensor>>& in) {
    auto find = [&in](const std::string& name) -> const Tensor& {
        for (const auto& [n, t] : in)
            if (n == name) return t;
        throw SchemaError("missing tensor in checkpoint: " + name);
    };
    for (Param* p : parameters(layer)) {
        const Tensor& src = find(p->name);
        if (!(src.shape() == p->value.shape()))
            throw ShapeError("checkpoint shape mismatch for " + p->name);
        p->value = src;
    }
    std::vector<std::pair<std::string, Tensor*>> bufs;
    layer.collect_buffers(bufs);
    for (auto& [name, t] : bufs) {
        const Tensor& src = find(name);
        if (!(src.shape() == t->shape()))
            throw ShapeError("checkpoint shape mismatch for " + name);
        *t = src;
    }
}

}  // namespace latkit::nn
